# File: src/modeling/predictor.py
"""
Loads saved models and turns raw request text into an executable edit command.

Level 1 picks the action. If its probability is below the confidence gate
`tau` the request is reported as ambiguous and level 2 never runs; otherwise
the CRF tags the tokens, given the predicted action, and the tags are
decoded into entity spans.
"""

from dataclasses import dataclass
import json
import logging
import math
import os
import sys

# --- Setup Project Root Path ---
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import numpy as np

from src.annotation.bio import decode
from src.config_loader import config_section
from src.exceptions import EmptyInputError, ModelFileNotFoundError, ModelLoadError
from src.features.featurizer import tokenize
from src.modeling import crf_model
from src.modeling.action_model import ActionModel, predict_log_proba
from src.modeling.train import ACTION_MODEL_FILE, ENTITY_MODEL_FILE, MODELS_DIR

log = logging.getLogger(__name__)

_loaded_models_cache = {}


@dataclass(frozen=True)
class EntityMention:
    label: str
    start: int
    end: int
    text: str

    def to_json_dict(self):
        return {"label": self.label, "start": self.start, "end": self.end, "text": self.text}


@dataclass(frozen=True)
class EditCommand:
    """An executable request: one action plus non-overlapping entity spans."""
    id: str
    action: object
    confidence: float
    entities: tuple = ()
    n_tokens: int = None

    def __post_init__(self):
        previous_end = 0
        for ent in sorted(self.entities, key=lambda e: e.start):
            if ent.start < previous_end:
                raise ValueError(f"Entity spans overlap at token {ent.start}")
            if self.n_tokens is not None and ent.end > self.n_tokens:
                raise ValueError(f"Entity span {ent.start}-{ent.end} exceeds {self.n_tokens} tokens")
            previous_end = ent.end

    @property
    def ambiguous(self):
        return False

    def to_json_dict(self):
        return {
            "id": self.id,
            "action": str(self.action),
            "confidence": self.confidence,
            "entities": [e.to_json_dict() for e in self.entities],
        }


@dataclass(frozen=True)
class AmbiguousRequest:
    """Level 1 was not confident enough to act on the request."""
    id: str
    action: object
    confidence: float

    @property
    def ambiguous(self):
        return True

    def to_json_dict(self):
        return {"id": self.id, "ambiguous": True, "action": str(self.action), "confidence": self.confidence}


# --- Model Loading ---

def _read_model_json(path):
    if not os.path.exists(path):
        raise ModelFileNotFoundError(f"Model file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelLoadError(f"Could not read model file {path}: {e}") from e


def load_action_model(path=None, embeddings=None):
    """Loads (and caches) a level-1 model; word vectors are needed if it was trained with them."""
    path = os.path.abspath(path or os.path.join(MODELS_DIR, ACTION_MODEL_FILE))
    key = ("action", path, id(embeddings))
    if key in _loaded_models_cache:
        log.info(f"Returning cached action model from {path}.")
        return _loaded_models_cache[key]
    model = ActionModel.from_json_dict(_read_model_json(path), embeddings)
    _loaded_models_cache[key] = model
    log.info(f"Action model loaded from {path} ({len(model.labels)} actions).")
    return model


def load_crf_model(path=None):
    path = os.path.abspath(path or os.path.join(MODELS_DIR, ENTITY_MODEL_FILE))
    key = ("entity", path)
    if key in _loaded_models_cache:
        log.info(f"Returning cached entity model from {path}.")
        return _loaded_models_cache[key]
    model = crf_model.CrfModel.from_json_dict(_read_model_json(path))
    _loaded_models_cache[key] = model
    log.info(f"Entity model loaded from {path} ({len(model.tagset)} tags).")
    return model


def clear_model_cache():
    _loaded_models_cache.clear()


# --- Prediction ---

def _resolve_tau(tau):
    tau = float(config_section("prediction").get("tau", 0.0) if tau is None else tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be within [0, 1], got {tau}")
    return tau


def predict_ier(action_model, entity_model, text, tau=None, utt_id="0"):
    """
    Parses one raw request.

    Args:
        action_model (ActionModel): level 1, with its featurizer attached.
        entity_model (CrfModel): level 2.
        text (str): the request as typed.
        tau (float): confidence gate in [0, 1]; 0 never fires. Config
            `prediction.tau` when None.
        utt_id (str): copied into the result.

    Returns:
        EditCommand | AmbiguousRequest

    Raises:
        EmptyInputError: the text has no tokens.
    """
    tau = _resolve_tau(tau)
    tokens = tokenize(text or "")
    if not tokens:
        raise EmptyInputError("Cannot parse an empty request")

    log_probs = predict_log_proba(action_model, action_model.featurize([tokens]))[0]
    best = int(np.argmax(log_probs))
    action = action_model.labels[best]
    confidence = float(math.exp(log_probs[best]))
    # tau = 1 always fires; otherwise compare in log space.
    if tau >= 1.0 or (tau > 0 and log_probs[best] < math.log(tau)):
        log.info(f"Request {utt_id!r} is ambiguous: P({action})={confidence:.4f} < tau={tau}")
        return AmbiguousRequest(str(utt_id), action, confidence)

    tags = crf_model.predict_tags(entity_model, tokens, action)
    words = [t.text for t in tokens]
    entities = tuple(
        EntityMention(span.label.value, span.start, span.end, " ".join(words[span.start:span.end]))
        for span in decode(tags)
    )
    return EditCommand(str(utt_id), action, confidence, entities, len(tokens))


def predict_batch(action_model, entity_model, texts, tau=None, ids=None):
    """predict_ier over many texts; ids default to "1".."n"."""
    ids = ids if ids is not None else [str(i + 1) for i in range(len(texts))]
    return [predict_ier(action_model, entity_model, text, tau, utt_id)
            for text, utt_id in zip(texts, ids)]


# --- Main Execution ---
if __name__ == "__main__":
    request = " ".join(sys.argv[1:]) or "crop the image"
    print(f"\nParsing request: {request!r}")
    result = predict_ier(load_action_model(), load_crf_model(), request)
    print(json.dumps(result.to_json_dict(), indent=2))
