# File: src/modeling/train.py

"""
Trains, evaluates and saves both levels of the request parser.

Level 1 (action) uses the 75/25 action split; level 2 (entities) uses the
80/10/10 entity split, with the dev slice reserved for choosing the CRF's L2
strength when tuning is requested. `train_and_save_models` runs the whole
thing on a corpus file and writes model and score JSON to a models directory.
"""

import json
import logging
import os
import sys

import numpy as np

# --- Setup Project Root Path ---
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from src.analysis.evaluation import classification_report, span_f1, token_report
from src.annotation.bio import DEFAULT_MAX_DEPTH, ENCODING_INNERMOST, decode
from src.annotation.bracket_io import load_corpus
from src.annotation.schema import ActionType
from src.config_loader import config_section
from src.features.featurizer import ActionFeaturizer, load_word_vectors
from src.modeling import action_model as level1
from src.modeling import crf_model as level2
from src.modeling.preprocess import MODE_ACTION, MODE_ENTITY, SplitSpec, preprocess

log = logging.getLogger(__name__)

# --- Configuration ---
MODELS_DIR = os.path.join(PROJECT_ROOT, config_section("paths").get("models_dir", "models"))
ACTION_MODEL_FILE = "action_model.json"
ENTITY_MODEL_FILE = "entity_model.json"
ACTION_SCORES_FILE = "action_scores.json"
ENTITY_SCORES_FILE = "entity_scores.json"


def write_json(data, path):
    """Writes JSON with a fixed layout so identical inputs give identical bytes."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=1, ensure_ascii=False)
        f.write("\n")


# --- Level 1 ---

def train_action_level(examples, embeddings=None, l2=None, cfg=None, class_weighting=None):
    """
    Fits the featurizer vocabulary and the softmax classifier on (tokens, action) pairs.
    """
    featurizer = ActionFeaturizer(embeddings=embeddings).fit(tokens for tokens, _ in examples)
    X = featurizer.transform_many([tokens for tokens, _ in examples])
    return level1.train_action(X, [a for _, a in examples], l2=l2, cfg=cfg,
                               class_weighting=class_weighting, featurizer=featurizer)


def predict_actions(model, token_lists):
    """Predicted actions and their probabilities for many utterances."""
    if not token_lists:
        return [], np.zeros(0)
    probs = level1.predict_proba_many(model, model.featurize(token_lists))
    best = np.argmax(probs, axis=1)
    return [model.labels[i] for i in best], probs[np.arange(len(best)), best]


def evaluate_action_level(model, examples):
    """Classification report of `model` on (tokens, action) pairs."""
    gold = [a for _, a in examples]
    pred, _ = predict_actions(model, [tokens for tokens, _ in examples])
    present = set(model.labels) | set(gold)
    labels = [a for a in ActionType if a in present]
    return classification_report(gold, pred, labels)


# --- Level 2 ---

def train_entity_level(examples, l2=None, cfg=None, use_action_features=None,
                       dev_examples=None, tune=False, grid=None):
    """
    Trains the CRF on (tokens, tags, action) triples.

    With tune=True every L2 value in `grid` (config `modeling.entities.tune_grid`)
    is trained and scored by span F1 on `dev_examples` using gold actions; the
    best model is returned and earlier grid values win ties.
    """
    if not tune:
        return level2.train_crf(examples, l2=l2, cfg=cfg, use_action_features=use_action_features)
    if not dev_examples:
        log.warning("Tuning requested without a dev split; training with the default L2 instead.")
        return level2.train_crf(examples, l2=l2, cfg=cfg, use_action_features=use_action_features)

    grid = grid or config_section("modeling", "entities").get("tune_grid", [0.1, 1.0, 10.0])
    best_model, best_f1 = None, -1.0
    for value in grid:
        model = level2.train_crf(examples, l2=float(value), cfg=cfg, use_action_features=use_action_features)
        f1 = evaluate_entity_level(model, dev_examples)["span"].micro["f1"]
        log.info(f"  -> dev span F1 with l2={value}: {f1:.4f}")
        if f1 > best_f1:
            best_model, best_f1 = model, f1
    log.info(f"Selected l2={best_model.l2} (dev span F1 {best_f1:.4f})")
    return best_model


def predict_entity_tags(model, token_lists, actions=None):
    actions = actions if actions is not None else [None] * len(token_lists)
    return [level2.predict_tags(model, tokens, action) for tokens, action in zip(token_lists, actions)]


def evaluate_entity_level(model, examples, action_model=None):
    """
    Span-level (primary) and token-level scores for the CRF.

    Level 2 receives gold actions unless an action model is given, in which
    case it receives that model's predictions. Gold spans are read back from
    the gold tags, so both sides are scored in the same encoding.
    """
    token_lists = [tokens for tokens, _, _ in examples]
    gold_tags = [tags for _, tags, _ in examples]
    if action_model is None:
        actions = [action for _, _, action in examples]
    else:
        actions, _ = predict_actions(action_model, token_lists)
    pred_tags = predict_entity_tags(model, token_lists, actions)
    return {
        "span": span_f1([decode(t) for t in gold_tags], [decode(t) for t in pred_tags]),
        "token": token_report(gold_tags, pred_tags),
    }


# --- End-to-End ---

def train_and_save_models(corpus, models_dir=MODELS_DIR, fmt="bracket", embeddings_path=None,
                          seed=None, tune=False, encoding=ENCODING_INNERMOST,
                          max_depth=DEFAULT_MAX_DEPTH, action_l2=None, entity_l2=None,
                          use_action_features=None):
    """
    Trains both levels on a corpus and writes models plus held-out scores.

    Args:
        corpus: a Corpus, or a path to a corpus file in `fmt`.
        models_dir (str): receives action_model.json, entity_model.json,
            action_scores.json and entity_scores.json.

    Returns:
        dict: the action and entity score dictionaries that were written.
    """
    log.info("--- Starting Model Training ---")
    if not hasattr(corpus, "utterances"):
        log.info(f"Loading corpus from: {corpus}")
        corpus, errors = load_corpus(corpus, fmt)
        if errors:
            log.warning(f"{len(errors)} corpus lines were rejected and skipped.")
    embeddings = load_word_vectors(embeddings_path) if embeddings_path else None
    os.makedirs(models_dir, exist_ok=True)

    # --- Level 1: actions ---
    action_splits = preprocess(corpus, SplitSpec.from_config(MODE_ACTION, seed))
    action_model = train_action_level(action_splits["train"].examples, embeddings, l2=action_l2)
    action_metrics = evaluate_action_level(action_model, action_splits["test"].examples)
    log.info(f"  -> Held-out action weighted F1: {action_metrics.weighted['f1']:.4f}")
    write_json(action_model.to_json_dict(), os.path.join(models_dir, ACTION_MODEL_FILE))
    action_scores = action_metrics.to_dict()
    write_json(action_scores, os.path.join(models_dir, ACTION_SCORES_FILE))

    # --- Level 2: entities ---
    entity_splits = preprocess(corpus, SplitSpec.from_config(MODE_ENTITY, seed), encoding, max_depth)
    crf = train_entity_level(entity_splits["train"].examples, l2=entity_l2,
                             use_action_features=use_action_features,
                             dev_examples=entity_splits["dev"].examples, tune=tune)
    test = entity_splits["test"].examples
    with_gold = evaluate_entity_level(crf, test)
    with_pred = evaluate_entity_level(crf, test, action_model=action_model)
    log.info(f"  -> Held-out entity span F1: {with_gold['span'].micro['f1']:.4f} (gold actions), "
             f"{with_pred['span'].micro['f1']:.4f} (predicted actions)")
    write_json(crf.to_json_dict(), os.path.join(models_dir, ENTITY_MODEL_FILE))
    entity_scores = {
        "encoding": encoding,
        "l2": crf.l2,
        "gold_actions": {k: m.to_dict() for k, m in with_gold.items()},
        "pred_actions": {k: m.to_dict() for k, m in with_pred.items()},
    }
    write_json(entity_scores, os.path.join(models_dir, ENTITY_SCORES_FILE))

    log.info(f"--- Models and scores saved to {models_dir} ---")
    return {"action": action_scores, "entity": entity_scores}


# --- Main Execution ---
if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("usage: python -m src.modeling.train CORPUS [MODELS_DIR]")
        sys.exit(1)
    scores = train_and_save_models(sys.argv[1], sys.argv[2] if len(sys.argv) > 2 else MODELS_DIR)
    print(f"Action weighted F1: {scores['action']['weighted']['f1']:.4f}")
    print(f"Entity span F1:     {scores['entity']['gold_actions']['span']['micro']['f1']:.4f}")
