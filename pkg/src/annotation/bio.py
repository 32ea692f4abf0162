# File: src/annotation/bio.py

"""
Converts annotation trees to BIO tag sequences and tag sequences back to spans.

Nested entities are flattened per token, either to the innermost label
(the training default) or to a composite 'OUTER|INNER' labelstring capped at
`max_depth` labels. In both cases a B tag opens the first token of every
entity node and every change of labelstring (IOB2), so "add a warmer hue"
becomes O, O, B-VALUE, B-ATTRIBUTE and two adjacent OBJECT spans each start
with B-OBJECT. ACTION and IER nodes are transparent: their words are O unless
an entity covers them.
"""

import logging

from src.annotation.schema import (
    BEGIN, COMPOSITE_SEP, INSIDE, OUTSIDE, AnnNode, NodeKind, Span,
    innermost_label, make_tag, split_tag,
)
from src.exceptions import UnknownLabelError

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 2
ENCODING_INNERMOST = "innermost"
ENCODING_NESTED = "nested"


def _node_stacks(utt):
    """Per token, the enclosing entity nodes from outermost to innermost."""
    stacks = [[] for _ in utt.tokens]
    if utt.root is None:
        return stacks

    def walk(node, enclosing):
        if node.kind is NodeKind.ENTITY:
            enclosing = enclosing + [node]
        for child in node.children:
            if isinstance(child, AnnNode):
                walk(child, enclosing)
            else:
                stacks[child.index] = enclosing

    walk(utt.root, [])
    return stacks


def _stacks_to_bio(stacks, depth):
    """
    Tags each token from the innermost `depth` nodes enclosing it.

    A token continues the previous one (I) only when both carry the same
    labelstring and the same kept nodes; anything else opens a new B.
    """
    tags = []
    previous = None
    for stack in stacks:
        kept = stack[-depth:] if stack else []
        if not kept:
            tags.append(OUTSIDE)
            previous = None
            continue
        labelstring = COMPOSITE_SEP.join(node.label.value for node in kept)
        key = (labelstring, tuple(id(node) for node in kept))
        tags.append(make_tag(INSIDE if key == previous else BEGIN, labelstring))
        previous = key
    return tags


def encode_nested(utt, max_depth=DEFAULT_MAX_DEPTH):
    """
    Encodes every token with its enclosing entity labels joined by '|'.

    Only the innermost `max_depth` labels are kept, so max_depth=1 is the
    innermost encoding.
    """
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    return _stacks_to_bio(_node_stacks(utt), max_depth)


def encode_innermost(utt):
    """Encodes every token with the label of its deepest enclosing entity."""
    return _stacks_to_bio(_node_stacks(utt), 1)


def encode(utt, mode=ENCODING_INNERMOST, max_depth=DEFAULT_MAX_DEPTH):
    if mode == ENCODING_INNERMOST:
        return encode_innermost(utt)
    if mode == ENCODING_NESTED:
        return encode_nested(utt, max_depth=max_depth)
    raise ValueError(f"Unknown BIO encoding mode {mode!r}")


def decode(bio):
    """
    Turns a tag sequence into non-overlapping spans.

    An I tag that does not continue a run of the same labelstring is read as
    B. Composite labelstrings yield a span of their innermost label. Tags that
    cannot be read at all are treated as O.
    """
    spans = []
    run_label = run_start = None

    def close(end):
        if run_label is not None:
            spans.append(Span(innermost_label(run_label), run_start, end))

    for position, tag in enumerate(bio):
        try:
            prefix, labelstring = split_tag(tag)
            if labelstring is not None:
                innermost_label(labelstring)
        except (ValueError, UnknownLabelError):
            log.debug(f"Treating unreadable tag {tag!r} at position {position} as O")
            prefix, labelstring = OUTSIDE, None
        if prefix == INSIDE and labelstring == run_label:
            continue
        close(position)
        if prefix == OUTSIDE:
            run_label = run_start = None
        else:
            run_label, run_start = labelstring, position
    close(len(bio))
    return spans
