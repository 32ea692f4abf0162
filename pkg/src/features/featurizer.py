# File: src/features/featurizer.py

"""
Turns tokens into model inputs for both levels.

Level 1 (action classification) sees one row per utterance: the mean word
vector, when a vector table is loaded, followed by binary bag-of-words
indicators over the training vocabulary. Level 2 (entity tagging) sees a
list of feature strings per token, interned through a FeatureIndex built on
the training set; features never seen in training are dropped.
"""

import logging
import math
import os
import re
import unicodedata

import numpy as np
from scipy import sparse

from src.annotation.schema import Token, make_tokens
from src.exceptions import EmbeddingDimensionError, EmbeddingFormatError

log = logging.getLogger(__name__)

EDGE_PUNCTUATION = set(".,!?;:\"'()")
BOS, EOS = "BOS", "EOS"
_NUMBER_RE = re.compile(r"^[+-]?(\d+([.,]\d+)*|\.\d+)%?$")


# --- Tokenization ---

def tokenize(text):
    """
    Lowercases, splits on whitespace and peels leading/trailing punctuation.

    Each of . , ! ? ; : " ' ( ) at either edge of a chunk becomes its own
    token; punctuation inside a word ("don't") stays put.
    """
    words = []
    for chunk in text.lower().split():
        lead, trail = [], []
        while chunk and chunk[0] in EDGE_PUNCTUATION:
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and chunk[-1] in EDGE_PUNCTUATION:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        words.extend(lead)
        if chunk:
            words.append(chunk)
        words.extend(reversed(trail))
    return list(make_tokens(words))


def _text(token):
    return token.text if isinstance(token, Token) else str(token)


# --- Word Vectors ---

class EmbeddingTable:
    """Immutable word -> vector map; unknown words map to the zero vector."""

    def __init__(self, words, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise EmbeddingFormatError("Embedding matrix must be 2-D with dimension >= 1")
        if len(words) != matrix.shape[0]:
            raise EmbeddingFormatError("Word list and matrix rows differ in length")
        self._index = {w: i for i, w in enumerate(words)}
        self._matrix = matrix
        self._matrix.setflags(write=False)
        self._zero = np.zeros(matrix.shape[1])
        self._zero.setflags(write=False)

    @property
    def dim(self):
        return self._matrix.shape[1]

    def __len__(self):
        return len(self._index)

    def __contains__(self, word):
        return word in self._index

    def lookup(self, word):
        row = self._index.get(word)
        if row is None:
            row = self._index.get(word.lower())
        return self._zero if row is None else self._matrix[row]


def load_word_vectors(source):
    """
    Reads a plain-text word-vector file ("word v1 v2 ... vD" per line).

    The first line fixes D. Blank lines are skipped and repeated words keep
    their first vector.

    Args:
        source: a path, raw bytes or a binary stream of UTF-8 text.

    Returns:
        EmbeddingTable

    Raises:
        EmbeddingDimensionError: a line has a different number of values.
        EmbeddingFormatError: a value is not a finite real, or the file is empty.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            data = f.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data

    words, rows, dim = [], [], None
    seen = set()
    for line_no, line in enumerate(text.split("\n"), start=1):
        parts = line.split()
        if not parts:
            continue
        if dim is None:
            dim = len(parts) - 1
            if dim < 1:
                raise EmbeddingFormatError(f"line {line_no}: a word needs at least one value")
        elif len(parts) - 1 != dim:
            raise EmbeddingDimensionError(
                f"line {line_no}: expected {dim} values, found {len(parts) - 1}")
        word = parts[0]
        try:
            values = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise EmbeddingFormatError(f"line {line_no}: {e}") from e
        if not all(math.isfinite(v) for v in values):
            raise EmbeddingFormatError(f"line {line_no}: non-finite value")
        if word in seen:
            continue
        seen.add(word)
        words.append(word)
        rows.append(values)
    if dim is None:
        raise EmbeddingFormatError("word-vector file is empty")
    log.info(f"Loaded {len(words)} word vectors of dimension {dim}")
    return EmbeddingTable(words, np.array(rows, dtype=np.float64))


def embed_mean(tokens, table):
    """Mean of the token vectors (unknown words count as zeros); zeros for no tokens."""
    if not tokens:
        return np.zeros(table.dim)
    return np.mean([table.lookup(_text(t)) for t in tokens], axis=0)


# --- Feature Dictionary ---

class FeatureIndex:
    """Insertion-ordered string -> column map."""

    def __init__(self, names=()):
        self._names = []
        self._ids = {}
        for name in names:
            self.add(name)

    def add(self, name):
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def get(self, name, default=None):
        return self._ids.get(name, default)

    def __contains__(self, name):
        return name in self._ids

    def __len__(self):
        return len(self._names)

    @property
    def names(self):
        return list(self._names)

    def ids(self, names):
        """Column ids of the known names, unknown names dropped."""
        return [self._ids[n] for n in names if n in self._ids]


# --- Level 1 Features ---

class ActionFeaturizer:
    """
    Utterance-level features: [mean embedding (optional) | bag-of-words].

    Fit on training token lists to fix the vocabulary; transform returns
    scipy CSR rows so a large vocabulary stays cheap.
    """

    def __init__(self, vocabulary=None, embeddings=None, embedding_dim=0):
        self.vocabulary = vocabulary if vocabulary is not None else FeatureIndex()
        self.embeddings = embeddings
        self.embedding_dim = embeddings.dim if embeddings is not None else int(embedding_dim)

    def fit(self, token_lists):
        for tokens in token_lists:
            for tok in tokens:
                self.vocabulary.add(_text(tok).lower())
        log.info(f"Action featurizer vocabulary: {len(self.vocabulary)} words, "
                 f"embedding dimension {self.embedding_dim}")
        return self

    @property
    def n_features(self):
        return self.embedding_dim + len(self.vocabulary)

    def transform_many(self, token_lists):
        rows, cols, vals = [], [], []
        dense = []
        offset = self.embedding_dim
        for r, tokens in enumerate(token_lists):
            ids = sorted(set(self.vocabulary.ids(_text(t).lower() for t in tokens)))
            rows.extend([r] * len(ids))
            cols.extend(offset + i for i in ids)
            vals.extend([1.0] * len(ids))
            if self.embedding_dim:
                if self.embeddings is None:
                    raise EmbeddingFormatError(
                        f"Featurizer expects {self.embedding_dim}-d word vectors but none are loaded")
                dense.append(embed_mean(tokens, self.embeddings))
        n = len(token_lists)
        bow = sparse.csr_matrix((vals, (rows, cols)), shape=(n, self.n_features))
        if not self.embedding_dim:
            return bow
        emb = sparse.csr_matrix(
            np.hstack([np.array(dense).reshape(n, self.embedding_dim),
                       np.zeros((n, len(self.vocabulary)))]))
        return (emb + bow).tocsr()

    def transform(self, tokens):
        return self.transform_many([tokens])

    def to_json_dict(self):
        return {"vocabulary": self.vocabulary.names, "embedding_dim": self.embedding_dim}

    @classmethod
    def from_json_dict(cls, data, embeddings=None):
        dim = int(data.get("embedding_dim", 0))
        if dim and embeddings is not None and embeddings.dim != dim:
            raise EmbeddingDimensionError(
                f"Model was trained with {dim}-d vectors, loaded table has {embeddings.dim}")
        return cls(FeatureIndex(data.get("vocabulary", [])), embeddings=embeddings if dim else None,
                   embedding_dim=dim)


# --- Level 2 Features ---

def token_shape(word):
    if word.isalpha():
        return "alpha"
    if _NUMBER_RE.match(word):
        return "num"
    if all(unicodedata.category(ch).startswith(("P", "S")) for ch in word):
        return "punct"
    return "mixed"


def crf_token_features(tokens, i, action=None):
    """
    Feature strings for position i, in a fixed order and without repeats.

    Templates: bias, w, w-1, w+1, pre1-3, suf1-3, shape, pos and, when an
    action is given, act and act|w.
    """
    words = [_text(t).lower() for t in tokens]
    word = words[i]
    feats = [
        "bias",
        f"w={word}",
        f"w-1={words[i - 1] if i > 0 else BOS}",
        f"w+1={words[i + 1] if i + 1 < len(words) else EOS}",
    ]
    feats.extend(f"pre{k}={word[:k]}" for k in (1, 2, 3))
    feats.extend(f"suf{k}={word[-k:]}" for k in (1, 2, 3))
    feats.append(f"shape={token_shape(word)}")
    if i == 0:
        feats.append("pos=first")
    elif i == len(words) - 1:
        feats.append("pos=last")
    else:
        feats.append("pos=mid")
    if action is not None:
        name = getattr(action, "value", str(action))
        feats.append(f"act={name}")
        feats.append(f"act|w={name}|{word}")
    return list(dict.fromkeys(feats))


def sequence_features(tokens, action=None):
    return [crf_token_features(tokens, i, action) for i in range(len(tokens))]
