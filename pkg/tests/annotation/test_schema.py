# File: tests/annotation/test_schema.py

"""
Unit tests for the IER vocabulary in `src/annotation/schema.py`.
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

from src.annotation.schema import (
    ActionType, AnnNode, AnnotatedUtterance, EntityLabel, Span, Token,
    canonicalize_label, innermost_label, make_tokens, split_tag,
)
from src.exceptions import InvalidAnnotationError, UnknownLabelError


# --- Labels ---

def test_vocabulary_sizes():
    assert len(ActionType) == 18
    assert len(EntityLabel) == 5


@pytest.mark.parametrize("raw, expected", [
    ("REGION", EntityLabel.LOCATION),
    ("modifier/value", EntityLabel.VALUE),
    ("MODIFIER", EntityLabel.VALUE),
    ("modifier_action", EntityLabel.VALUE),
    ("Intention", EntityLabel.INTENT),
    ("attribute", EntityLabel.ATTRIBUTE),
    ("OBJECT", EntityLabel.OBJECT),
])
def test_canonicalize_label_aliases(raw, expected):
    assert canonicalize_label(raw) is expected


def test_canonicalize_label_rejects_unknown():
    with pytest.raises(UnknownLabelError):
        canonicalize_label("FOO")


@pytest.mark.parametrize("raw", ["REGION", "modifier/value", "INTENTION", "value", "Object"])
def test_canonicalize_label_is_idempotent(raw):
    once = canonicalize_label(raw)
    assert canonicalize_label(once.value) is once
    assert canonicalize_label(once) is once


def test_action_parse_is_case_insensitive():
    assert ActionType.parse("crop") is ActionType.CROP
    assert str(ActionType.ADJUST) == "ADJUST"
    with pytest.raises(UnknownLabelError):
        ActionType.parse("paint")


# --- Tokens, Spans and Trees ---

@pytest.mark.parametrize("text, index", [("", 0), ("two words", 0), ("ok", -1)])
def test_token_validation(text, index):
    with pytest.raises(InvalidAnnotationError):
        Token(text, index)


def test_span_bounds_and_alias():
    span = Span("REGION", 1, 3)
    assert span.label is EntityLabel.LOCATION
    assert len(span) == 2
    with pytest.raises(InvalidAnnotationError):
        Span(EntityLabel.VALUE, 2, 2)


def test_utterance_accessors():
    tokens = make_tokens(["add", "a", "warmer", "hue"])
    value = AnnNode.entity_node("VALUE", [tokens[2]])
    attribute = AnnNode.entity_node("ATTRIBUTE", [value, tokens[3]])
    root = AnnNode.ier([AnnNode.action_node("ADD", [tokens[0]]), tokens[1], attribute])
    utt = AnnotatedUtterance("u1", tokens, root)

    assert utt.action is ActionType.ADD
    assert utt.text == "add a warmer hue"
    assert utt.entity_spans() == [Span(EntityLabel.ATTRIBUTE, 2, 4), Span(EntityLabel.VALUE, 2, 3)]
    assert utt.max_entity_depth() == 2


def test_action_must_be_direct_child_of_ier():
    tokens = make_tokens(["crop", "it"])
    inner_action = AnnNode.action_node("CROP", [tokens[0]])
    entity = AnnNode.entity_node("OBJECT", [inner_action, tokens[1]])
    with pytest.raises(InvalidAnnotationError):
        AnnotatedUtterance("u1", tokens, AnnNode.ier([entity]))


def test_at_most_one_action():
    tokens = make_tokens(["crop", "rotate"])
    root = AnnNode.ier([AnnNode.action_node("CROP", [tokens[0]]),
                        AnnNode.action_node("ROTATE", [tokens[1]])])
    with pytest.raises(InvalidAnnotationError):
        AnnotatedUtterance("u1", tokens, root)


# --- BIO Tag Helpers ---

def test_split_tag():
    assert split_tag("O") == ("O", None)
    assert split_tag("B-ATTRIBUTE|VALUE") == ("B", "ATTRIBUTE|VALUE")
    assert innermost_label("ATTRIBUTE|VALUE") is EntityLabel.VALUE
    with pytest.raises(ValueError):
        split_tag("X-VALUE")
