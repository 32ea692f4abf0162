# File: tests/modeling/test_preprocess.py

"""
Tests for filtering and seeded splitting in `src/modeling/preprocess.py`.
"""
import pytest
import sys
import os

# --- Setup Project Root Path ---
try:
    TEST_DIR = os.path.dirname(__file__)
    PROJECT_ROOT = os.path.abspath(os.path.join(TEST_DIR, '..', '..'))
except NameError:
    PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname('.'), '..'))
if PROJECT_ROOT not in sys.path:
     sys.path.insert(0, PROJECT_ROOT)

from src.annotation.bracket_io import load_corpus
from src.annotation.schema import ActionType
from src.exceptions import EmptyAfterFilterError
from src.modeling.preprocess import MODE_ACTION, MODE_ENTITY, SplitSpec, preprocess

CROP = "[IER : [ACTION-CROP : crop ] [LOCATION : the image ] ]"
ROTATE = "[IER : [ACTION-ROTATE : rotate ] [OBJECT : the dog ] ]"
OTHER = "[IER : [ACTION-OTHER : clean up ] [OBJECT : the pavement ] ]"
CHATTER = "what a nice photo"


@pytest.fixture
def corpus_of_100():
    """100 executable utterances mixed with 20 that the filter removes."""
    lines = []
    for i in range(100):
        lines.append(CROP if i % 2 else ROTATE)
        if i % 5 == 0:
            lines.append(OTHER if i % 10 else CHATTER)
    corpus, errors = load_corpus("\n".join(lines).encode())
    assert not errors and len(corpus) == 120
    return corpus


def test_action_split_sizes(corpus_of_100):
    splits = preprocess(corpus_of_100, SplitSpec(MODE_ACTION, (0.75, 0.25), seed=1))
    assert list(splits) == ["train", "test"]
    assert [len(s) for s in splits.values()] == [75, 25]
    tokens, action = splits["train"].examples[0]
    assert action in (ActionType.CROP, ActionType.ROTATE)


def test_entity_split_sizes_and_examples(corpus_of_100):
    splits = preprocess(corpus_of_100, SplitSpec(MODE_ENTITY, (0.8, 0.1, 0.1), seed=1))
    assert [len(s) for s in splits.values()] == [80, 10, 10]
    tokens, tags, action = splits["dev"].examples[0]
    assert len(tokens) == len(tags) == 3
    assert tags[0] == "O"


def test_filtering_precedes_splitting(corpus_of_100):
    splits = preprocess(corpus_of_100, SplitSpec(MODE_ACTION, (0.75, 0.25), seed=3))
    for split in splits.values():
        assert ActionType.OTHER not in split.actions
        assert all(u.root is not None for u in split.utterances)


def test_same_seed_same_split(corpus_of_100):
    spec = SplitSpec(MODE_ENTITY, (0.8, 0.1, 0.1), seed=9)
    first = preprocess(corpus_of_100, spec)
    second = preprocess(corpus_of_100, spec)
    for name in spec.names:
        assert [u.id for u in first[name].utterances] == [u.id for u in second[name].utterances]


def test_different_seed_reorders(corpus_of_100):
    a = preprocess(corpus_of_100, SplitSpec(MODE_ACTION, (0.75, 0.25), seed=1))
    b = preprocess(corpus_of_100, SplitSpec(MODE_ACTION, (0.75, 0.25), seed=2))
    assert [u.id for u in a["test"].utterances] != [u.id for u in b["test"].utterances]


@pytest.mark.parametrize("n, mode, expected", [
    (100, MODE_ACTION, [75, 25]),
    (7, MODE_ACTION, [6, 1]),
    (7, MODE_ENTITY, [7, 0, 0]),
    (19, MODE_ENTITY, [17, 1, 1]),
    (0, MODE_ENTITY, [0, 0, 0]),
])
def test_sizes_floor_with_remainder_to_train(n, mode, expected):
    assert SplitSpec.from_config(mode).sizes(n) == expected


@pytest.mark.parametrize("mode, fractions", [
    (MODE_ACTION, (0.5, 0.6)),
    (MODE_ACTION, (0.8, 0.1, 0.1)),
    ("joint", (1.0,)),
    (MODE_ENTITY, (1.2, -0.1, -0.1)),
])
def test_invalid_split_specs(mode, fractions):
    with pytest.raises(ValueError):
        SplitSpec(mode, fractions)


def test_from_config_defaults():
    spec = SplitSpec.from_config(MODE_ENTITY)
    assert spec.fractions == (0.8, 0.1, 0.1)
    assert spec.seed == 42
    assert SplitSpec.from_config(MODE_ACTION, seed=5).seed == 5


def test_nothing_executable_left():
    corpus, _ = load_corpus("\n".join([OTHER, CHATTER]).encode())
    with pytest.raises(EmptyAfterFilterError):
        preprocess(corpus, SplitSpec())
