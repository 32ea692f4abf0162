# File: tests/modeling/test_crf_model.py

"""
Tests for the linear-chain CRF in `src/modeling/crf_model.py`: exact inference
against brute-force enumeration, the training gradient, and a toy tagger.
"""
from dataclasses import replace
import itertools
import json
import pytest
import sys
import os

import numpy as np
from scipy.special import logsumexp

# --- Setup Project Root Path ---
try:
    TEST_DIR = os.path.dirname(__file__)
    PROJECT_ROOT = os.path.abspath(os.path.join(TEST_DIR, '..', '..'))
except NameError:
    PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname('.'), '..'))
if PROJECT_ROOT not in sys.path:
     sys.path.insert(0, PROJECT_ROOT)

from src.annotation.schema import ActionType
from src.exceptions import EmptyCorpusError, EmptyInputError, ModelLoadError, UnknownTagError
from src.features.featurizer import FeatureIndex, sequence_features, tokenize
from src.modeling.crf_model import (
    CrfModel, CrfObjective, Potentials, TagSet, crf_weight_count, log_partition, marginals,
    nll_and_grad, path_score, predict_tags, train_crf, viterbi,
)
from src.modeling.optim import grad_check

VERBS = {"crop": ActionType.CROP, "rotate": ActionType.ROTATE, "brighten": ActionType.ADJUST}
LOCATIONS = ["the image", "the sky", "the corner"]
OBJECTS = ["a dog", "a cat", "a tree"]


def random_potentials(rng, L, T):
    return Potentials(rng.normal(size=(L, T)), rng.normal(size=(T, T)),
                      rng.normal(size=T), rng.normal(size=T))


def enumerate_paths(p):
    return [(path_score(p, path), list(path)) for path in itertools.product(range(p.n_tags), repeat=len(p))]


def toy_examples():
    """Each word always carries the same tag."""
    examples = []
    for verb, action in VERBS.items():
        for phrase in LOCATIONS:
            examples.append((tokenize(f"{verb} {phrase}"), ["O", "B-LOCATION", "I-LOCATION"], action))
        for phrase in OBJECTS:
            examples.append((tokenize(f"{verb} {phrase}"), ["O", "B-OBJECT", "I-OBJECT"], action))
    return examples


@pytest.fixture(scope="module")
def toy_model():
    return train_crf(toy_examples(), l2=0.1)


# --- TagSet ---

def test_tagset_puts_outside_first():
    tagset = TagSet.from_sequences([["B-VALUE", "O", "I-VALUE"]])
    assert tagset.tags == ["O", "B-VALUE", "I-VALUE"]
    assert tagset.index("I-VALUE") == 2
    with pytest.raises(UnknownTagError):
        tagset.index("B-OBJECT")


# --- Inference Oracles ---

def test_log_partition_single_position_two_tags():
    p = Potentials(np.zeros((1, 2)), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert log_partition(p) == pytest.approx(np.log(2), abs=1e-12)


def test_log_partition_factorizes_with_emissions_only():
    E = np.random.default_rng(0).normal(size=(4, 3))
    p = Potentials(E, np.zeros((3, 3)), np.zeros(3), np.zeros(3))
    assert log_partition(p) == pytest.approx(logsumexp(E, axis=1).sum(), abs=1e-10)
    assert viterbi(p)[0] == list(np.argmax(E, axis=1))


def test_viterbi_ties_go_to_lowest_index():
    p = Potentials(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
    assert viterbi(p) == ([0, 0, 0], 0.0)


def test_inference_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(200):
        L, T = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        p = random_potentials(rng, L, T)
        scored = enumerate_paths(p)
        scores = np.array([s for s, _ in scored])

        assert abs(log_partition(p) - logsumexp(scores)) <= 1e-8
        best = int(np.argmax(scores))
        path, score = viterbi(p)
        assert path == scored[best][1]
        assert abs(score - scores[best]) <= 1e-9
        np.testing.assert_allclose(marginals(p).sum(axis=1), 1.0, atol=1e-9)


def test_marginals_match_enumeration():
    rng = np.random.default_rng(5)
    p = random_potentials(rng, 4, 3)
    scored = enumerate_paths(p)
    probs = np.exp(np.array([s for s, _ in scored]) - logsumexp([s for s, _ in scored]))
    expected = np.zeros((4, 3))
    for prob, (_, path) in zip(probs, scored):
        expected[np.arange(4), path] += prob
    np.testing.assert_allclose(marginals(p), expected, atol=1e-10)


def test_potentials_reject_empty_sequences():
    with pytest.raises(EmptyInputError):
        Potentials(np.zeros((0, 2)), np.zeros((2, 2)), np.zeros(2), np.zeros(2))


# --- Training Objective ---

def test_objective_at_zero_weights_is_length_times_log_tags():
    L, T, F = 5, 3, 4
    ids = [[[0, 1]] * L]
    objective = CrfObjective(ids, [[0, 1, 2, 1, 0]], F, T, l2=2.0)
    value, _ = objective(np.zeros(objective.n_weights))
    assert value == pytest.approx(L * np.log(T), abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_objective_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    F, T = 6, 3
    n_seq = int(rng.integers(1, 4))
    ids, gold = [], []
    for _ in range(n_seq):
        L = int(rng.integers(1, 5))
        ids.append([sorted(set(rng.integers(0, F, size=3).tolist())) for _ in range(L)])
        gold.append(rng.integers(0, T, size=L).tolist())
    objective = CrfObjective(ids, gold, F, T, l2=float(rng.uniform(0, 1)))
    w = rng.normal(scale=0.5, size=objective.n_weights)
    assert grad_check(objective, w) <= 1e-4


def test_nll_and_grad_matches_finite_differences_for_a_model():
    rng = np.random.default_rng(3)
    batch = [(sequence_features(tokenize(text), ActionType.CROP), tags) for text, tags in [
        ("crop the image", ["O", "B-LOCATION", "I-LOCATION"]),
        ("crop a dog", ["O", "B-OBJECT", "I-OBJECT"]),
    ]]
    tagset = TagSet.from_sequences(tags for _, tags in batch)
    features = FeatureIndex(f for seq, _ in batch for feats in seq for f in feats)
    model = CrfModel(tagset, features, rng.normal(scale=0.3, size=crf_weight_count(len(features), len(tagset))),
                     l2=0.5)

    def objective(w):
        return nll_and_grad(replace(model, weights=w), batch)

    assert grad_check(objective, model.weights) <= 1e-4


def test_nll_rejects_unknown_gold_tags():
    model = train_crf([(tokenize("crop it"), ["O", "B-OBJECT"])], l2=1.0)
    with pytest.raises(UnknownTagError):
        nll_and_grad(model, [(sequence_features(tokenize("crop it")), ["O", "B-VALUE"])])


def test_training_rejects_empty_data():
    with pytest.raises(EmptyCorpusError):
        train_crf([])
    with pytest.raises(EmptyInputError):
        train_crf([([], [])])


# --- Toy Tagger ---

def test_toy_grammar_is_learned_exactly(toy_model):
    for tokens, tags, action in toy_examples():
        assert predict_tags(toy_model, tokens, action) == tags


def test_toy_model_tags_the_crop_example(toy_model):
    assert predict_tags(toy_model, tokenize("crop the image"), ActionType.CROP) == ["O", "B-LOCATION", "I-LOCATION"]


def test_prediction_is_repeatable(toy_model):
    tokens = tokenize("rotate a tree")
    first = predict_tags(toy_model, tokens, "ROTATE")
    assert all(predict_tags(toy_model, tokens, "ROTATE") == first for _ in range(3))


def test_predict_rejects_empty_input(toy_model):
    with pytest.raises(EmptyInputError):
        predict_tags(toy_model, [])


def test_unseen_features_are_ignored(toy_model):
    tags = predict_tags(toy_model, tokenize("crop the zebra"), ActionType.CROP)
    assert len(tags) == 3
    assert set(tags) <= set(toy_model.tagset)


def test_model_json_round_trip(toy_model):
    restored = CrfModel.from_json_dict(json.loads(json.dumps(toy_model.to_json_dict())))
    assert restored.tagset == toy_model.tagset
    assert restored.features.names == toy_model.features.names
    np.testing.assert_array_equal(restored.weights, toy_model.weights)


def test_corrupt_model_is_rejected(toy_model):
    data = toy_model.to_json_dict()
    data["weights"] = data["weights"][:-1]
    with pytest.raises(ModelLoadError):
        CrfModel.from_json_dict(data)
    with pytest.raises(ModelLoadError):
        CrfModel.from_json_dict(dict(data, format="IER-ACTION"))
