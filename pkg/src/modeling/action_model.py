# File: src/modeling/action_model.py

"""
Level 1: multinomial logistic regression from utterance features to an action.

The model keeps one weight row per action seen in training plus a trailing
bias column. Training minimizes the summed softmax negative log-likelihood
plus (l2/2)||W||^2 over the non-bias columns, starting from zeros, with the
shared L-BFGS minimizer.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from src.annotation.schema import ActionType
from src.config_loader import config_section
from src.exceptions import DegenerateDataError, ModelLoadError
from src.features.featurizer import ActionFeaturizer
from src.modeling.optim import LbfgsConfig, lbfgs_minimize

log = logging.getLogger(__name__)

FORMAT_NAME = "IER-ACTION"
FORMAT_VERSION = 1


def _with_bias(X):
    """Appends a column of ones to a dense or sparse design matrix."""
    if sparse.issparse(X):
        return sparse.hstack([X, np.ones((X.shape[0], 1))], format="csr")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.hstack([X, np.ones((X.shape[0], 1))])


def softmax_nll_and_grad(w, X, y, n_classes, l2=0.0, sample_weight=None):
    """
    Regularized softmax NLL and its gradient for flattened weights.

    Args:
        w (np.ndarray): K*(F+1) weights, row-major, bias last in every row.
        X: n x (F+1) design matrix that already carries the bias column.
        y (np.ndarray): class indices in [0, K).
        n_classes (int): K.
        l2 (float): strength of the penalty on non-bias weights.
        sample_weight (np.ndarray | None): per-example weights.

    Returns:
        tuple[float, np.ndarray]
    """
    W = w.reshape(n_classes, -1)
    scores = np.asarray(X @ W.T)
    log_norm = logsumexp(scores, axis=1)
    n = scores.shape[0]
    rows = np.arange(n)
    c = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)

    value = float(np.sum(c * (log_norm - scores[rows, y])))
    probs = np.exp(scores - log_norm[:, None])
    probs[rows, y] -= 1.0
    probs *= c[:, None]
    grad = np.asarray((X.T @ probs).T)

    if l2:
        body = W[:, :-1]
        value += 0.5 * l2 * float(np.sum(body * body))
        grad[:, :-1] += l2 * body
    return value, grad.ravel()


@dataclass(frozen=True, eq=False)
class ActionModel:
    """Trained level-1 classifier. `weights` has shape (K, F+1)."""
    labels: tuple
    weights: np.ndarray
    featurizer: ActionFeaturizer = field(default=None, compare=False)
    l2: float = 1.0

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DegenerateDataError(f"An action model needs at least 2 labels, got {len(self.labels)}")
        if self.weights.shape[0] != len(self.labels):
            raise ModelLoadError(
                f"Weight matrix has {self.weights.shape[0]} rows for {len(self.labels)} labels")
        if not np.all(np.isfinite(self.weights)):
            raise ModelLoadError("Action model weights are not finite")

    @property
    def n_features(self):
        return self.weights.shape[1] - 1

    def scores(self, X):
        return np.asarray(_with_bias(X) @ self.weights.T)

    def featurize(self, token_lists):
        if self.featurizer is None:
            raise ModelLoadError("Action model has no featurizer attached")
        return self.featurizer.transform_many(token_lists)

    # --- Serialization ---

    def to_json_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "labels": [a.value for a in self.labels],
            "l2": self.l2,
            "featurizer": self.featurizer.to_json_dict() if self.featurizer is not None else None,
            "weights": [[repr(float(v)) for v in row] for row in self.weights],
        }

    @classmethod
    def from_json_dict(cls, data, embeddings=None):
        if data.get("format") != FORMAT_NAME or data.get("version") != FORMAT_VERSION:
            raise ModelLoadError(
                f"Not an {FORMAT_NAME} v{FORMAT_VERSION} model: "
                f"format={data.get('format')!r} version={data.get('version')!r}")
        try:
            labels = tuple(ActionType.parse(v) for v in data["labels"])
            weights = np.array([[float(v) for v in row] for row in data["weights"]], dtype=np.float64)
            if weights.ndim != 2:
                raise ValueError(f"weights must be a matrix, got shape {weights.shape}")
            feat = data.get("featurizer")
            featurizer = ActionFeaturizer.from_json_dict(feat, embeddings) if feat is not None else None
        except (KeyError, TypeError, ValueError) as e:
            raise ModelLoadError(f"Corrupt action model: {e}") from e
        return cls(labels, weights, featurizer, float(data.get("l2", 1.0)))


def _class_weights(y, n_classes):
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    per_class = len(y) / (n_classes * counts)
    return per_class[y]


def train_action(X, labels, l2=None, cfg=None, class_weighting=None, featurizer=None):
    """
    Fits the softmax classifier.

    Args:
        X: n x F feature matrix (dense or scipy sparse).
        labels (list[ActionType]): one gold action per row.
        l2 (float): penalty strength; config `modeling.action.l2` when None.
        cfg (LbfgsConfig): optimizer settings.
        class_weighting (bool): weight examples by inverse class frequency.
        featurizer (ActionFeaturizer): stored on the model for raw-text prediction.

    Returns:
        ActionModel: label order follows ActionType declaration order.

    Raises:
        DegenerateDataError: fewer than two distinct labels.
    """
    section = config_section("modeling", "action")
    l2 = float(section.get("l2", 1.0) if l2 is None else l2)
    if class_weighting is None:
        class_weighting = bool(section.get("class_weighting", False))
    cfg = cfg or LbfgsConfig.from_config()

    labels = [ActionType.parse(a) for a in labels]
    if X.shape[0] != len(labels):
        raise ValueError(f"{X.shape[0]} feature rows but {len(labels)} labels")
    present = set(labels)
    label_order = tuple(a for a in ActionType if a in present)
    if len(label_order) < 2:
        raise DegenerateDataError(
            f"Training data has {len(label_order)} distinct action(s); at least 2 are required")

    index = {a: i for i, a in enumerate(label_order)}
    y = np.array([index[a] for a in labels], dtype=np.int64)
    Xb = _with_bias(X)
    K = len(label_order)
    weights = _class_weights(y, K) if class_weighting else None
    log.info(f"Training action model: {Xb.shape[0]} examples, {Xb.shape[1] - 1} features, "
             f"{K} classes, l2={l2}, class_weighting={class_weighting}")

    def objective(w):
        return softmax_nll_and_grad(w, Xb, y, K, l2, weights)

    w, trace = lbfgs_minimize(objective, np.zeros(K * Xb.shape[1]), cfg)
    log.info(f"Action model trained: {trace.message}, final objective "
             f"{trace.values[-1] if trace.values else float('nan'):.6g}")
    return ActionModel(label_order, w.reshape(K, -1), featurizer, l2)


def predict_log_proba(model, X):
    """Log class probabilities, one row per input row, columns in model.labels order."""
    scores = model.scores(X)
    return scores - logsumexp(scores, axis=1, keepdims=True)


def predict_proba_many(model, X):
    return np.exp(predict_log_proba(model, X))


def predict_action(model, feats):
    """
    Most probable action for one feature row, with the full probability vector.

    Ties go to the earlier label in model.labels.
    """
    if not sparse.issparse(feats):
        feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    probs = predict_proba_many(model, feats)[0]
    return model.labels[int(np.argmax(probs))], probs
