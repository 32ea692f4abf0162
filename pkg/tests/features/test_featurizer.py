# File: tests/features/test_featurizer.py

"""
Tests for tokenization, word-vector loading and the feature templates in
`src/features/featurizer.py`.
"""
import pytest
import sys
import os

import numpy as np

# --- Setup Project Root Path ---
try:
    TEST_DIR = os.path.dirname(__file__)
    PROJECT_ROOT = os.path.abspath(os.path.join(TEST_DIR, '..', '..'))
except NameError:
    PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname('.'), '..'))
if PROJECT_ROOT not in sys.path:
     sys.path.insert(0, PROJECT_ROOT)

from src.annotation.schema import ActionType
from src.exceptions import EmbeddingDimensionError, EmbeddingFormatError
from src.features.featurizer import (
    ActionFeaturizer, FeatureIndex, crf_token_features, embed_mean, load_word_vectors, tokenize,
)

VECTORS = b"the 0.1 0.2 0.3\ncat 1 0 -1\n"


# --- Tokenization ---

@pytest.mark.parametrize("text, words", [
    ("Crop the image.", ["crop", "the", "image", "."]),
    ("", []),
    ("don't crop!", ["don't", "crop", "!"]),
    ("(zoom in)", ["(", "zoom", "in", ")"]),
])
def test_tokenize(text, words):
    tokens = tokenize(text)
    assert [t.text for t in tokens] == words
    assert [t.index for t in tokens] == list(range(len(words)))


@pytest.mark.parametrize("text", ["Crop the image.", "  make it 'warmer', please!! ", "(zoom) in: now?", ""])
def test_tokenize_is_idempotent(text):
    once = [t.text for t in tokenize(text)]
    assert [t.text for t in tokenize(" ".join(once))] == once


# --- Word Vectors ---

def test_load_word_vectors(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_bytes(VECTORS)
    table = load_word_vectors(str(path))
    assert table.dim == 3
    assert len(table) == 2
    np.testing.assert_allclose(table.lookup("the"), [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(table.lookup("zebra"), np.zeros(3))


def test_load_word_vectors_dimension_mismatch():
    with pytest.raises(EmbeddingDimensionError):
        load_word_vectors(b"the 0.1 0.2\ncat 1 0 -1")


@pytest.mark.parametrize("data", [b"", b"the 0.1 abc", b"the nan 1"])
def test_load_word_vectors_bad_values(data):
    with pytest.raises(EmbeddingFormatError):
        load_word_vectors(data)


def test_embed_mean():
    table = load_word_vectors(VECTORS + b"sky 0 0 1\n")
    np.testing.assert_allclose(embed_mean(tokenize("the"), table), [0.1, 0.2, 0.3])
    np.testing.assert_allclose(embed_mean(tokenize("cat sky"), table), [0.5, 0.0, 0.0])
    np.testing.assert_array_equal(embed_mean(tokenize("foo bar"), table), np.zeros(3))
    np.testing.assert_array_equal(embed_mean([], table), np.zeros(3))


def test_embed_mean_ignores_token_order():
    table = load_word_vectors(VECTORS + b"sky 0 0 1\n")
    words = ["the", "cat", "sky", "zebra", "the"]
    expected = embed_mean(words, table)
    for order in np.random.default_rng(1).permuted(np.tile(np.arange(5), (6, 1)), axis=1):
        np.testing.assert_allclose(embed_mean([words[i] for i in order], table), expected)


# --- Level 1 ---

def test_action_featurizer_bag_of_words():
    featurizer = ActionFeaturizer().fit([tokenize("crop the image"), tokenize("rotate it")])
    X = featurizer.transform_many([tokenize("crop it now")])
    assert X.shape == (1, 5)
    assert X.toarray().tolist() == [[1.0, 0.0, 0.0, 0.0, 1.0]]


def test_action_featurizer_with_embeddings():
    table = load_word_vectors(VECTORS)
    featurizer = ActionFeaturizer(embeddings=table).fit([tokenize("the cat")])
    X = featurizer.transform(tokenize("the cat")).toarray()
    np.testing.assert_allclose(X[0], [0.55, 0.1, -0.35, 1.0, 1.0])

    restored = ActionFeaturizer.from_json_dict(featurizer.to_json_dict(), table)
    np.testing.assert_allclose(restored.transform(tokenize("the cat")).toarray(), X)


def test_feature_index_drops_unknown_names():
    index = FeatureIndex(["a", "b"])
    assert index.add("a") == 0
    assert index.ids(["b", "zzz", "a"]) == [1, 0]


# --- Level 2 ---

def test_crf_token_features_middle_position():
    feats = crf_token_features(tokenize("crop the image"), 1, ActionType.CROP)
    for expected in ("w=the", "w-1=crop", "w+1=image", "act=CROP", "act|w=CROP|the", "pos=mid"):
        assert expected in feats


def test_crf_token_features_edges():
    tokens = tokenize("crop the image")
    first = crf_token_features(tokens, 0)
    assert "w-1=BOS" in first and "pos=first" in first
    last = crf_token_features(tokens, 2)
    assert "w+1=EOS" in last and "pos=last" in last


def test_crf_token_features_without_action():
    feats = crf_token_features(tokenize("crop the image"), 1)
    assert not any(f.startswith("act") for f in feats)


def test_crf_token_features_single_token_is_first():
    feats = crf_token_features(tokenize("undo"), 0)
    assert "pos=first" in feats
    assert len(feats) == len(set(feats))
