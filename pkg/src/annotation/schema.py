# File: src/annotation/schema.py

"""
Canonical vocabulary for image edit requests (IERs).

Defines the 18 action types, the 5 entity labels (with the aliases used by
older annotation rounds), tokens, spans, annotation trees and BIO tag helpers.
All types are immutable once constructed.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Iterator, Optional, Tuple, Union

from src.exceptions import UnknownLabelError, InvalidAnnotationError

log = logging.getLogger(__name__)


class ActionType(str, Enum):
    """An editing operation an image editor could execute."""
    ADJUST = "ADJUST"
    DELETE = "DELETE"
    CROP = "CROP"
    ADD = "ADD"
    REPLACE = "REPLACE"
    APPLY = "APPLY"
    ZOOM = "ZOOM"
    ROTATE = "ROTATE"
    TRANSFORM = "TRANSFORM"
    MOVE = "MOVE"
    CLONE = "CLONE"
    SELECT = "SELECT"
    SWAP = "SWAP"
    UNDO = "UNDO"
    MERGE = "MERGE"
    REDO = "REDO"
    OTHER = "OTHER"
    SCROLL = "SCROLL"

    @classmethod
    def parse(cls, raw):
        """Case-insensitive lookup by name; raises UnknownLabelError."""
        key = str(raw).strip().upper()
        try:
            return cls[key]
        except KeyError:
            raise UnknownLabelError(raw, kind="action") from None

    def __str__(self):
        return self.value


class EntityLabel(str, Enum):
    """What a span contributes to the action."""
    ATTRIBUTE = "ATTRIBUTE"
    VALUE = "VALUE"
    OBJECT = "OBJECT"
    LOCATION = "LOCATION"
    INTENT = "INTENT"

    def __str__(self):
        return self.value


# Older annotation rounds used the long names. MODIFIER-ACTION is read as MODIFIER-VALUE.
ENTITY_ALIASES = {
    "REGION": EntityLabel.LOCATION,
    "MODIFIER-VALUE": EntityLabel.VALUE,
    "MODIFIER": EntityLabel.VALUE,
    "MODIFIER-ACTION": EntityLabel.VALUE,
    "INTENTION": EntityLabel.INTENT,
}


def _normalize_label_text(raw):
    return str(raw).strip().upper().replace("/", "-").replace("_", "-")


def canonicalize_label(raw):
    """
    Resolves an entity label name or alias to its canonical EntityLabel.

    Matching is case-insensitive; '/' and '_' are treated as '-' so
    "modifier/value" and "MODIFIER-VALUE" are the same alias.

    Raises:
        UnknownLabelError: for anything outside the canonical names and aliases.
    """
    if isinstance(raw, EntityLabel):
        return raw
    key = _normalize_label_text(raw)
    if key in EntityLabel.__members__:
        return EntityLabel[key]
    if key in ENTITY_ALIASES:
        return ENTITY_ALIASES[key]
    raise UnknownLabelError(raw)


@dataclass(frozen=True)
class Token:
    text: str
    index: int

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text:
            raise InvalidAnnotationError("Token text must be a non-empty string")
        if any(ch.isspace() for ch in self.text):
            raise InvalidAnnotationError(f"Token text contains whitespace: {self.text!r}")
        if self.index < 0:
            raise InvalidAnnotationError(f"Token index must be >= 0, got {self.index}")

    def __str__(self):
        return self.text


def make_tokens(words):
    """Builds a contiguous 0-based token tuple from a sequence of words."""
    return tuple(Token(w, i) for i, w in enumerate(words))


@dataclass(frozen=True)
class Span:
    """A flat entity annotation over tokens [start, end)."""
    label: EntityLabel
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise InvalidAnnotationError(f"Invalid span bounds ({self.start}, {self.end})")
        object.__setattr__(self, "label", canonicalize_label(self.label))

    def __len__(self):
        return self.end - self.start

    def __str__(self):
        return f"{self.label.value}({self.start},{self.end})"

    def sort_key(self):
        return (self.start, -self.end, self.label.value)


class NodeKind(str, Enum):
    IER = "IER"
    ACTION = "ACTION"
    ENTITY = "ENTITY"


Child = Union[Token, "AnnNode"]


@dataclass(frozen=True)
class AnnNode:
    """
    One labeled bracket of an annotation tree.

    `children` holds tokens and nested nodes in surface order. Use the
    `ier`, `action_node` and `entity_node` constructors rather than setting
    `action`/`label` by hand.
    """
    kind: NodeKind
    children: Tuple[Child, ...]
    action: Optional[ActionType] = None
    label: Optional[EntityLabel] = None

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.kind is NodeKind.ACTION and self.action is None:
            raise InvalidAnnotationError("ACTION node needs an action type")
        if self.kind is NodeKind.ENTITY and self.label is None:
            raise InvalidAnnotationError("ENTITY node needs a label")
        if not self.children:
            raise InvalidAnnotationError(f"{self.name} node is empty")
        indices = [t.index for t in self.iter_tokens()]
        if not indices:
            raise InvalidAnnotationError(f"{self.name} node covers no tokens")
        if indices != list(range(indices[0], indices[0] + len(indices))):
            raise InvalidAnnotationError(f"{self.name} node covers a non-contiguous token range")

    @classmethod
    def ier(cls, children):
        return cls(NodeKind.IER, tuple(children))

    @classmethod
    def action_node(cls, action, children):
        return cls(NodeKind.ACTION, tuple(children), action=ActionType.parse(action))

    @classmethod
    def entity_node(cls, label, children):
        return cls(NodeKind.ENTITY, tuple(children), label=canonicalize_label(label))

    @property
    def name(self):
        """The bracket label as written in the annotation format."""
        if self.kind is NodeKind.ACTION:
            return f"ACTION-{self.action.value}"
        if self.kind is NodeKind.ENTITY:
            return self.label.value
        return "IER"

    def iter_tokens(self) -> Iterator[Token]:
        for child in self.children:
            if isinstance(child, Token):
                yield child
            else:
                yield from child.iter_tokens()

    def iter_nodes(self, depth=0) -> Iterator[Tuple["AnnNode", int]]:
        """Pre-order walk yielding (node, depth) with this node at `depth`."""
        yield self, depth
        for child in self.children:
            if isinstance(child, AnnNode):
                yield from child.iter_nodes(depth + 1)

    @property
    def start(self):
        return next(self.iter_tokens()).index

    @property
    def end(self):
        last = None
        for last in self.iter_tokens():
            pass
        return last.index + 1


@dataclass(frozen=True)
class AnnotatedUtterance:
    """
    Tokenized text plus an optional IER tree.

    `root` is None for comments that contain no request. Tokens outside
    the root stay in `tokens` as unannotated words.
    """
    id: str
    tokens: Tuple[Token, ...]
    root: Optional[AnnNode] = None
    meta: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        for expected, tok in enumerate(self.tokens):
            if tok.index != expected:
                raise InvalidAnnotationError(
                    f"Utterance {self.id!r}: token indices must be contiguous from 0 "
                    f"(found {tok.index} at position {expected})")
        if self.root is not None:
            self._validate_tree()

    def _validate_tree(self):
        root = self.root
        if root.kind is not NodeKind.IER:
            raise InvalidAnnotationError(f"Utterance {self.id!r}: root must be an IER node")
        for tok in root.iter_tokens():
            if tok.index >= len(self.tokens) or self.tokens[tok.index] != tok:
                raise InvalidAnnotationError(
                    f"Utterance {self.id!r}: tree token {tok} does not match the token list")
        n_actions = 0
        for node, depth in root.iter_nodes():
            if node.kind is NodeKind.IER and depth > 0:
                raise InvalidAnnotationError(f"Utterance {self.id!r}: nested IER node")
            if node.kind is NodeKind.ACTION:
                n_actions += 1
                if depth != 1:
                    raise InvalidAnnotationError(
                        f"Utterance {self.id!r}: ACTION node must be a direct child of the IER")
        if n_actions > 1:
            raise InvalidAnnotationError(f"Utterance {self.id!r}: more than one ACTION node")

    @property
    def words(self):
        return [t.text for t in self.tokens]

    @property
    def text(self):
        return " ".join(self.words)

    @property
    def action_node(self):
        if self.root is None:
            return None
        for child in self.root.children:
            if isinstance(child, AnnNode) and child.kind is NodeKind.ACTION:
                return child
        return None

    @property
    def action(self) -> Optional[ActionType]:
        node = self.action_node
        return node.action if node is not None else None

    def entity_nodes(self):
        """Yields (entity node, entity depth) with depth 1 for outermost entities."""
        if self.root is None:
            return
        stack = [(self.root, 0)]
        while stack:
            node, edepth = stack.pop()
            for child in reversed(node.children):
                if isinstance(child, AnnNode):
                    child_depth = edepth + 1 if child.kind is NodeKind.ENTITY else edepth
                    stack.append((child, child_depth))
            if node.kind is NodeKind.ENTITY:
                yield node, edepth

    def entity_spans(self):
        """All entity annotations as flat spans, nesting kept, in surface order."""
        spans = [Span(n.label, n.start, n.end) for n, _ in self.entity_nodes()]
        return sorted(spans, key=Span.sort_key)

    def max_entity_depth(self):
        return max((d for _, d in self.entity_nodes()), default=0)

    def with_id(self, utt_id):
        return AnnotatedUtterance(str(utt_id), self.tokens, self.root, dict(self.meta))


# --- BIO Tags ---
OUTSIDE = "O"
BEGIN = "B"
INSIDE = "I"
COMPOSITE_SEP = "|"


def make_tag(prefix, labelstring):
    """Builds 'B-LABEL' / 'I-LABEL' (labelstring may be composite, e.g. 'ATTRIBUTE|VALUE')."""
    if prefix not in (BEGIN, INSIDE):
        raise ValueError(f"BIO prefix must be B or I, got {prefix!r}")
    return f"{prefix}-{labelstring}"


def split_tag(tag):
    """
    Splits a tag into (prefix, labelstring); 'O' gives ('O', None).

    Raises:
        ValueError: when the tag is neither 'O' nor of the form 'B-x' / 'I-x'.
    """
    if tag == OUTSIDE:
        return OUTSIDE, None
    if len(tag) > 2 and tag[1] == "-" and tag[0] in (BEGIN, INSIDE):
        return tag[0], tag[2:]
    raise ValueError(f"Malformed BIO tag: {tag!r}")


def innermost_label(labelstring):
    """The last (innermost) component of a possibly composite labelstring."""
    return canonicalize_label(labelstring.split(COMPOSITE_SEP)[-1])
