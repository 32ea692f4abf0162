# File: src/modeling/crf_model.py

"""
Level 2: a linear-chain CRF over BIO tags.

A tag path y_1..y_L scores
    start[y_1] + sum_t E[t, y_t] + sum_t trans[y_{t-1}, y_t] + stop[y_L]
where E = Phi @ W_emit and Phi is the binary token-feature matrix. The
weight vector is laid out as [W_emit (F x T) | trans (T x T) | start (T) |
stop (T)], row-major. Inference is exact and done in log space; training
minimizes the summed NLL plus (l2/2)||w||^2 with L-BFGS from zeros.

Sequences of equal length are stacked so the forward-backward recursions
run over a whole group at once.
"""

from collections import defaultdict
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from src.annotation.schema import OUTSIDE, ActionType
from src.config_loader import config_section
from src.exceptions import (
    EmptyCorpusError, EmptyInputError, ModelLoadError, UnknownTagError,
)
from src.features.featurizer import FeatureIndex, sequence_features
from src.modeling.optim import LbfgsConfig, lbfgs_minimize

log = logging.getLogger(__name__)

FORMAT_NAME = "IER-CRF"
FORMAT_VERSION = 1


# --- Tag Alphabet ---

class TagSet:
    """Ordered tag alphabet: 'O' first, then tags in order of first appearance."""

    def __init__(self, tags=()):
        self._tags = [OUTSIDE]
        self._index = {OUTSIDE: 0}
        for tag in tags:
            self.add(tag)

    @classmethod
    def from_sequences(cls, tag_sequences):
        tagset = cls()
        for seq in tag_sequences:
            for tag in seq:
                tagset.add(tag)
        return tagset

    def add(self, tag):
        if tag not in self._index:
            self._index[tag] = len(self._tags)
            self._tags.append(tag)
        return self._index[tag]

    def index(self, tag):
        try:
            return self._index[tag]
        except KeyError:
            raise UnknownTagError(f"Tag {tag!r} is not in the model's tag set") from None

    def __getitem__(self, i):
        return self._tags[i]

    def __len__(self):
        return len(self._tags)

    def __iter__(self):
        return iter(self._tags)

    def __contains__(self, tag):
        return tag in self._index

    def __eq__(self, other):
        return isinstance(other, TagSet) and self._tags == other._tags

    @property
    def tags(self):
        return list(self._tags)


# --- Inference ---

@dataclass(frozen=True)
class Potentials:
    """Scores for one sequence: emissions (L x T), transitions (T x T), start (T), stop (T)."""
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    stop: np.ndarray

    def __post_init__(self):
        L, T = np.shape(self.emissions)
        if L < 1 or T < 1:
            raise EmptyInputError("Potentials need at least one position and one tag")
        if np.shape(self.transitions) != (T, T) or np.shape(self.start) != (T,) or np.shape(self.stop) != (T,):
            raise ValueError(
                f"Potentials shapes disagree: emissions {np.shape(self.emissions)}, "
                f"transitions {np.shape(self.transitions)}, start {np.shape(self.start)}, "
                f"stop {np.shape(self.stop)}")

    def __len__(self):
        return self.emissions.shape[0]

    @property
    def n_tags(self):
        return self.emissions.shape[1]


def _forward(E, trans, start):
    """Log forward messages for a stack of equal-length sequences, E shaped (n, L, T)."""
    n, L, T = E.shape
    alpha = np.empty((n, L, T))
    alpha[:, 0] = start + E[:, 0]
    for t in range(1, L):
        alpha[:, t] = logsumexp(alpha[:, t - 1, :, None] + trans, axis=1) + E[:, t]
    return alpha


def _backward(E, trans, stop):
    n, L, T = E.shape
    beta = np.empty((n, L, T))
    beta[:, L - 1] = stop
    for t in range(L - 2, -1, -1):
        beta[:, t] = logsumexp(trans + (E[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    return beta


def log_partition(p):
    """log of the summed exp(path score) over all T^L tag paths."""
    alpha = _forward(p.emissions[None], p.transitions, p.start)
    return float(logsumexp(alpha[0, -1] + p.stop))


def marginals(p):
    """Node marginals P(y_t = y), shaped (L, T)."""
    E = p.emissions[None]
    alpha = _forward(E, p.transitions, p.start)
    beta = _backward(E, p.transitions, p.stop)
    log_z = logsumexp(alpha[0, -1] + p.stop)
    return np.exp(alpha[0] + beta[0] - log_z)


def path_score(p, path):
    path = list(path)
    score = p.start[path[0]] + p.stop[path[-1]]
    score += sum(p.emissions[t, y] for t, y in enumerate(path))
    score += sum(p.transitions[a, b] for a, b in zip(path, path[1:]))
    return float(score)


def viterbi(p):
    """
    Highest-scoring tag path and its score.

    Ties resolve to the lower tag index, first for the final tag and then for
    each predecessor while backtracking.
    """
    L = len(p)
    delta = p.start + p.emissions[0]
    backpointers = []
    for t in range(1, L):
        cand = delta[:, None] + p.transitions
        best_prev = np.argmax(cand, axis=0)
        backpointers.append(best_prev)
        delta = cand[best_prev, np.arange(p.n_tags)] + p.emissions[t]
    last = int(np.argmax(delta + p.stop))
    path = [last]
    for best_prev in reversed(backpointers):
        path.append(int(best_prev[path[-1]]))
    path.reverse()
    return path, path_score(p, path)


# --- Training Objective ---

class _Group:
    """n sequences of one length L, stacked."""

    def __init__(self, phi, gold, n_tags):
        self.phi = phi                      # (n*L) x F CSR
        self.gold = gold                    # n x L tag indices
        self.n, self.length = gold.shape
        onehot = np.zeros((self.n * self.length, n_tags))
        onehot[np.arange(self.n * self.length), gold.ravel()] = 1.0
        self.onehot = onehot


def _feature_matrix(rows, n_features):
    """Binary CSR from per-position lists of feature ids."""
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.fromiter((i for r in rows for i in r), dtype=np.int64, count=int(indptr[-1]))
    data = np.ones(len(indices))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(rows), n_features))


class CrfObjective:
    """
    Regularized NLL of a fixed batch as a function of the flat weight vector.

    Built once per training run; each call runs batched forward-backward
    per length group and returns (value, gradient).
    """

    def __init__(self, id_sequences, gold_sequences, n_features, n_tags, l2=0.0):
        if not id_sequences:
            raise EmptyCorpusError("No sequences to train on")
        self.n_features = n_features
        self.n_tags = n_tags
        self.l2 = l2
        by_length = defaultdict(list)
        for ids, gold in zip(id_sequences, gold_sequences):
            if len(ids) == 0:
                raise EmptyInputError("Training sequences must have at least one token")
            if len(ids) != len(gold):
                raise ValueError(f"{len(ids)} feature rows but {len(gold)} gold tags")
            by_length[len(ids)].append((ids, gold))
        self.groups = []
        for length in sorted(by_length):
            items = by_length[length]
            phi = _feature_matrix([row for ids, _ in items for row in ids], n_features)
            gold = np.array([g for _, g in items], dtype=np.int64)
            self.groups.append(_Group(phi, gold, n_tags))

    @property
    def n_weights(self):
        return crf_weight_count(self.n_features, self.n_tags)

    def __call__(self, w):
        W_emit, trans, start, stop = unpack_weights(w, self.n_features, self.n_tags)
        T = self.n_tags
        value = 0.0
        g_emit = np.zeros_like(W_emit)
        g_trans = np.zeros((T, T))
        g_start = np.zeros(T)
        g_stop = np.zeros(T)

        for grp in self.groups:
            n, L = grp.n, grp.length
            E = np.asarray(grp.phi @ W_emit).reshape(n, L, T)
            alpha = _forward(E, trans, start)
            beta = _backward(E, trans, stop)
            log_z = logsumexp(alpha[:, -1] + stop, axis=1)

            rows = np.arange(n)[:, None]
            cols = np.arange(L)[None, :]
            gold = grp.gold
            gold_score = E[rows, cols, gold].sum(axis=1) + start[gold[:, 0]] + stop[gold[:, -1]]
            if L > 1:
                gold_score += trans[gold[:, :-1], gold[:, 1:]].sum(axis=1)
            value += float(np.sum(log_z - gold_score))

            mu = np.exp(alpha + beta - log_z[:, None, None])
            g_emit += grp.phi.T @ (mu.reshape(n * L, T) - grp.onehot)
            g_start += mu[:, 0].sum(axis=0)
            g_stop += mu[:, -1].sum(axis=0)
            np.subtract.at(g_start, gold[:, 0], 1.0)
            np.subtract.at(g_stop, gold[:, -1], 1.0)
            if L > 1:
                xi = np.exp(alpha[:, :-1, :, None] + trans
                            + (E[:, 1:] + beta[:, 1:])[:, :, None, :]
                            - log_z[:, None, None, None])
                g_trans += xi.sum(axis=(0, 1))
                np.subtract.at(g_trans, (gold[:, :-1].ravel(), gold[:, 1:].ravel()), 1.0)

        grad = np.concatenate([g_emit.ravel(), g_trans.ravel(), g_start, g_stop])
        if self.l2:
            value += 0.5 * self.l2 * float(w.dot(w))
            grad += self.l2 * w
        return value, grad


def crf_weight_count(n_features, n_tags):
    return n_features * n_tags + n_tags * n_tags + 2 * n_tags


def unpack_weights(w, n_features, n_tags):
    F, T = n_features, n_tags
    k = F * T
    W_emit = w[:k].reshape(F, T)
    trans = w[k:k + T * T].reshape(T, T)
    start = w[k + T * T:k + T * T + T]
    stop = w[k + T * T + T:]
    return W_emit, trans, start, stop


# --- Model ---

@dataclass(frozen=True, eq=False)
class CrfModel:
    tagset: TagSet
    features: FeatureIndex
    weights: np.ndarray
    l2: float = 1.0
    use_action_features: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        expected = crf_weight_count(len(self.features), len(self.tagset))
        if self.weights.shape != (expected,):
            raise ModelLoadError(
                f"CRF weight vector has shape {self.weights.shape}, expected ({expected},)")
        if not np.all(np.isfinite(self.weights)):
            raise ModelLoadError("CRF weights are not finite")

    def feature_ids(self, tokens, action=None):
        action = action if self.use_action_features else None
        return [self.features.ids(feats) for feats in sequence_features(tokens, action)]

    def potentials_from_ids(self, ids):
        W_emit, trans, start, stop = unpack_weights(self.weights, len(self.features), len(self.tagset))
        phi = _feature_matrix(ids, len(self.features))
        return Potentials(np.asarray(phi @ W_emit), trans, start, stop)

    def potentials(self, tokens, action=None):
        return self.potentials_from_ids(self.feature_ids(tokens, action))

    def to_json_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "tags": self.tagset.tags,
            "features": self.features.names,
            "l2": self.l2,
            "use_action_features": self.use_action_features,
            "weights": [repr(float(v)) for v in self.weights],
        }

    @classmethod
    def from_json_dict(cls, data):
        if data.get("format") != FORMAT_NAME or data.get("version") != FORMAT_VERSION:
            raise ModelLoadError(
                f"Not an {FORMAT_NAME} v{FORMAT_VERSION} model: "
                f"format={data.get('format')!r} version={data.get('version')!r}")
        try:
            tags = data["tags"]
            if not tags or tags[0] != OUTSIDE:
                raise ValueError("tag list must start with 'O'")
            return cls(
                TagSet(tags[1:]),
                FeatureIndex(data["features"]),
                np.array([float(v) for v in data["weights"]], dtype=np.float64),
                float(data.get("l2", 1.0)),
                bool(data.get("use_action_features", True)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelLoadError(f"Corrupt CRF model: {e}") from e


def nll_and_grad(model, batch):
    """
    Regularized NLL and gradient of `model` on a batch.

    Args:
        model (CrfModel): supplies weights, tag set, features and l2.
        batch (list): (feature-string lists per position, gold tag strings) pairs.

    Raises:
        UnknownTagError: a gold tag is outside model.tagset.
    """
    ids = [[model.features.ids(feats) for feats in seq] for seq, _ in batch]
    gold = [[model.tagset.index(t) for t in tags] for _, tags in batch]
    objective = CrfObjective(ids, gold, len(model.features), len(model.tagset), model.l2)
    return objective(model.weights)


def _unpack_example(example):
    if len(example) == 3:
        return example
    tokens, tags = example
    return tokens, tags, None


def train_crf(data, l2=None, cfg=None, use_action_features=None):
    """
    Fits a CRF on (tokens, tags) or (tokens, tags, action) examples.

    The tag set and feature dictionary are built from the data in order of
    first appearance. Actions feed the act= / act|w= features only when
    use_action_features is on.

    Raises:
        EmptyCorpusError: no examples.
        EmptyInputError: an example has no tokens.
    """
    if not data:
        raise EmptyCorpusError("Cannot train a CRF on an empty corpus")
    section = config_section("modeling", "entities")
    l2 = float(section.get("l2", 1.0) if l2 is None else l2)
    if use_action_features is None:
        use_action_features = bool(section.get("use_action_features", True))
    cfg = cfg or LbfgsConfig.from_config()

    examples = [_unpack_example(ex) for ex in data]
    tagset = TagSet.from_sequences(tags for _, tags, _ in examples)
    features = FeatureIndex()
    str_features = []
    for tokens, tags, action in examples:
        if len(tokens) == 0:
            raise EmptyInputError("Training sequences must have at least one token")
        if len(tokens) != len(tags):
            raise ValueError(f"{len(tokens)} tokens but {len(tags)} tags")
        seq = sequence_features(tokens, ActionType.parse(action) if use_action_features and action else None)
        for feats in seq:
            for f in feats:
                features.add(f)
        str_features.append(seq)

    ids = [[features.ids(feats) for feats in seq] for seq in str_features]
    gold = [[tagset.index(t) for t in tags] for _, tags, _ in examples]
    objective = CrfObjective(ids, gold, len(features), len(tagset), l2)
    log.info(f"Training CRF: {len(examples)} sequences in {len(objective.groups)} length groups, "
             f"{len(features)} features, {len(tagset)} tags, l2={l2}, action features={use_action_features}")

    w, trace = lbfgs_minimize(objective, np.zeros(objective.n_weights), cfg)
    log.info(f"CRF trained: {trace.message}, final objective "
             f"{trace.values[-1] if trace.values else float('nan'):.6g}")
    return CrfModel(tagset, features, w, l2, use_action_features, meta={"trace": trace})


def predict_tags(model, tokens, action=None):
    """
    Viterbi tag sequence for a token list.

    Raises:
        EmptyInputError: no tokens.
    """
    if len(tokens) == 0:
        raise EmptyInputError("Cannot tag an empty utterance")
    if action is not None:
        action = ActionType.parse(action)
    path, _ = viterbi(model.potentials(tokens, action))
    return [model.tagset[i] for i in path]
