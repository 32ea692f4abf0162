# File: tests/annotation/test_bracket_io.py

"""
Tests for the bracketed annotation format in `src/annotation/bracket_io.py`:
parsing, serialization, corpus loading and the executable-request filter.
"""
import io
import json
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

from src.annotation.bracket_io import (
    corpus_statistics, corpus_to_text, filter_executable, load_corpus, parse_line, serialize,
)
from src.annotation.schema import ActionType, AnnotatedUtterance, EntityLabel, NodeKind, Span, make_tokens
from src.corpus.synth import SynthConfig, generate
from src.exceptions import AnnotationParseError, CorpusDecodeError, InvalidAnnotationError, ParseErrorCategory

CROP_LINE = "[IER : [ACTION-CROP : crop ] [LOCATION : the image ] ]"
WARMER_LINE = "[IER : [ACTION-ADD : add ] a [ATTRIBUTE : [VALUE : warmer ] hue ] ]"


# --- parse_line ---

def test_parse_crop_example():
    utt = parse_line(CROP_LINE, utt_id="u1")
    assert utt.words == ["crop", "the", "image"]
    assert utt.action is ActionType.CROP
    assert utt.entity_spans() == [Span(EntityLabel.LOCATION, 1, 3)]
    kinds = [child.kind for child in utt.root.children]
    assert kinds == [NodeKind.ACTION, NodeKind.ENTITY]


def test_parse_nested_value_inside_attribute():
    utt = parse_line(WARMER_LINE)
    assert utt.words == ["add", "a", "warmer", "hue"]
    assert utt.entity_spans() == [Span(EntityLabel.ATTRIBUTE, 2, 4), Span(EntityLabel.VALUE, 2, 3)]


def test_parse_standalone_open_bracket_and_aliases():
    utt = parse_line("[ IER : [ ACTION-crop : crop ] [ region : the sky ] ]")
    assert utt.action is ActionType.CROP
    assert utt.entity_spans() == [Span(EntityLabel.LOCATION, 1, 3)]


def test_words_containing_brackets_are_plain_words():
    utt = parse_line("[IER : [ACTION-ADD : add ] [OBJECT : a[1] ] ]")
    assert utt.words == ["add", "a[1]"]


def test_glued_opener_needs_a_standalone_colon():
    assert parse_line("[IER : [ACTION-CROP : crop ] ]").action is ActionType.CROP
    utt = parse_line("[sky is blue")
    assert utt.root is None
    assert utt.words == ["[sky", "is", "blue"]


def test_line_without_ier_keeps_words():
    utt = parse_line("nice photo")
    assert utt.root is None
    assert utt.words == ["nice", "photo"]


@pytest.mark.parametrize("line, category", [
    ("[IER : [ACTION-CROP : crop ]", ParseErrorCategory.UNBALANCED_BRACKET),
    ("crop ]", ParseErrorCategory.UNBALANCED_BRACKET),
    ("[IER : [ACTION-PAINT : paint ] ]", ParseErrorCategory.UNKNOWN_LABEL),
    ("[IER : [FOO : bar ] ]", ParseErrorCategory.UNKNOWN_LABEL),
    ("[IER : [ACTION-CROP : crop ] [ACTION-ROTATE : rotate ] ]", ParseErrorCategory.MULTIPLE_ACTIONS),
    ("[IER : [ACTION-CROP : crop ] [OBJECT : ] ]", ParseErrorCategory.EMPTY_NODE),
    ("[IER : [ACTION-CROP : crop ] ] [IER : [ACTION-ADD : add ] ]", ParseErrorCategory.MULTIPLE_ROOTS),
    ("[IER : [OBJECT : [ACTION-CROP : crop ] it ] ]", ParseErrorCategory.MISPLACED_NODE),
    ("[IER crop ]", ParseErrorCategory.UNBALANCED_BRACKET),
    ("[ IER crop ]", ParseErrorCategory.MALFORMED_NODE),
])
def test_parse_errors(line, category):
    with pytest.raises(AnnotationParseError) as excinfo:
        parse_line(line)
    assert excinfo.value.category is category


def test_parse_error_reports_position():
    with pytest.raises(AnnotationParseError) as excinfo:
        parse_line("[IER : [ACTION-PAINT : paint ] ]")
    assert excinfo.value.column == 7
    assert excinfo.value.token_offset == 2


def test_parse_line_survives_random_bytes():
    """Random input either parses or raises AnnotationParseError, nothing else."""
    rng = np.random.default_rng(0)
    alphabet = [b"[", b"]", b":", b" ", b"IER", b"ACTION-CROP", b"VALUE", b"word", b"\xff", b"\n", b"[IER"]
    for _ in range(10_000):
        if rng.random() < 0.5:
            data = bytes(rng.integers(0, 256, size=int(rng.integers(0, 40)), dtype=np.uint8))
        else:
            data = b"".join(alphabet[int(i)] for i in rng.integers(0, len(alphabet), size=int(rng.integers(0, 20))))
        try:
            parse_line(data)
        except AnnotationParseError:
            pass


# --- serialize ---

def test_serialize_canonical_form():
    assert serialize(parse_line("[IER  :  [ACTION-crop : crop ]  [region : the image ] ]")) == CROP_LINE
    assert serialize(parse_line("nice photo")) == "nice photo"


@pytest.mark.parametrize("words", [["a", ":", "b"], ["[", "sky"], ["sky", "]"]])
def test_serialize_rejects_standalone_reserved_tokens(words):
    utt = AnnotatedUtterance("t", make_tokens(words), None)
    with pytest.raises(InvalidAnnotationError):
        serialize(utt)


def test_serialized_plain_words_parse_back():
    utt = AnnotatedUtterance("t", make_tokens(["[sky", "a[1]", "x:"]), None)
    assert parse_line(serialize(utt), utt_id="t") == utt


def test_parse_serialize_round_trip_over_synthetic_corpus():
    corpus = generate(SynthConfig(seed=3), n=1000)
    for utt in corpus:
        assert parse_line(serialize(utt), utt_id=utt.id) == utt


# --- load_corpus ---

def test_load_corpus_collects_errors():
    text = "\n".join([CROP_LINE, WARMER_LINE, "[IER : [ACTION-CROP : crop ]", "nice photo"]).encode("utf-8")
    corpus, errors = load_corpus(text)
    assert len(corpus) == 3
    assert len(errors) == 1
    assert errors[0].line == 3
    assert errors[0].category is ParseErrorCategory.UNBALANCED_BRACKET
    assert [u.id for u in corpus] == ["1", "2", "4"]


def test_load_corpus_empty_stream():
    corpus, errors = load_corpus(io.BytesIO(b""))
    assert len(corpus) == 0
    assert errors == []


def test_load_corpus_skips_comments_and_accepts_crlf():
    corpus, errors = load_corpus(b"# header\r\n" + CROP_LINE.encode() + b"\r\n")
    assert errors == []
    assert corpus[0].action is ActionType.CROP


def test_load_corpus_jsonl():
    lines = [
        json.dumps({"id": "u1", "ann": "[IER : [ACTION-CROP : crop ] ]"}),
        json.dumps({"id": "u2", "text": "what a day"}),
        "not json",
    ]
    corpus, errors = load_corpus("\n".join(lines).encode(), fmt="jsonl")
    assert [u.id for u in corpus] == ["u1", "u2"]
    assert corpus[0].action is ActionType.CROP
    assert corpus[1].root is None
    assert errors[0].category is ParseErrorCategory.MALFORMED_RECORD


def test_load_corpus_duplicate_ids_are_rejected():
    lines = [json.dumps({"id": "u1", "ann": CROP_LINE}), json.dumps({"id": "u1", "ann": CROP_LINE})]
    corpus, errors = load_corpus("\n".join(lines).encode(), fmt="jsonl")
    assert len(corpus) == 1
    assert errors[0].category is ParseErrorCategory.DUPLICATE_ID


def test_load_corpus_rejects_invalid_utf8():
    with pytest.raises(CorpusDecodeError):
        load_corpus(b"\xff\xfe crop")


def test_corpus_text_round_trip_in_both_formats():
    corpus, _ = load_corpus("\n".join([CROP_LINE, WARMER_LINE, "nice photo"]).encode())
    for fmt in ("bracket", "jsonl"):
        again, errors = load_corpus(corpus_to_text(corpus, fmt).encode(), fmt=fmt)
        assert errors == []
        assert [u.root for u in again] == [u.root for u in corpus]


# --- filter_executable and statistics ---

def test_filter_executable():
    lines = [
        "this image should have been taken with a nikon",
        "[IER : [ACTION-OTHER : clean up ] [OBJECT : the pavement ] ]",
        CROP_LINE,
    ]
    corpus, _ = load_corpus("\n".join(lines).encode())
    kept = filter_executable(corpus)
    assert [u.action for u in kept] == [ActionType.CROP]
    assert kept.provenance["filtered"] == {"no_ier": 1, "no_action": 0, "other_action": 1}


def test_filter_executable_drops_iers_without_an_action():
    corpus, errors = load_corpus("\n".join(["[IER : crop [LOCATION : the image ] ]", CROP_LINE]).encode())
    assert errors == []
    kept = filter_executable(corpus)
    assert [u.id for u in kept] == ["2"]
    assert kept.provenance["filtered"] == {"no_ier": 0, "no_action": 1, "other_action": 0}


def test_filter_executable_is_idempotent():
    once = filter_executable(generate(SynthConfig(seed=4, no_ier_rate=0.2), n=200))
    twice = filter_executable(once)
    assert list(twice) == list(once)
    assert twice.provenance["filtered"] == once.provenance["filtered"]


def test_corpus_statistics():
    corpus, _ = load_corpus("\n".join([CROP_LINE, WARMER_LINE, "[IER : [ACTION-ROTATE : rotate ] it ]"]).encode())
    stats = corpus_statistics(corpus)
    assert stats["iers"] == 3
    assert stats["entity_inclusion"]["LOCATION"] == pytest.approx(1 / 3)
    assert stats["nested_entity_share"] == pytest.approx(1 / 3)
    assert stats["no_entity_share"] == pytest.approx(1 / 3)
