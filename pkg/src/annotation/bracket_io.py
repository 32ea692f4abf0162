# File: src/annotation/bracket_io.py

"""
Reads and writes the bracketed IER annotation format.

A line such as

    [IER : [ACTION-CROP : crop ] [LOCATION : the image ] ]

is split on whitespace. A node opens with either a token '[' followed by a
label, or a '[' glued to its label ('[IER'), and in both cases the label must
be followed by a stand-alone ':'. A stand-alone ']' closes the innermost node.
Anything else is a word, including words that merely contain brackets.

Also provides corpus loading for bracket-lines and jsonl files, corpus
writing, summary statistics, and the executable-request filter applied
before any training split is drawn.
"""

from collections import Counter
from dataclasses import dataclass, field
import io
import json
import logging
import os
import re
from typing import List, Optional, Tuple

from src.annotation.schema import (
    ActionType, AnnNode, AnnotatedUtterance, NodeKind, Token, canonicalize_label,
)
from src.exceptions import (
    AnnotationParseError, CorpusDecodeError, InvalidAnnotationError,
    ParseErrorCategory, UnknownLabelError,
)
from src.features.featurizer import tokenize

log = logging.getLogger(__name__)

# --- Format Constants ---
OPEN, CLOSE, COLON = "[", "]", ":"
RESERVED = {OPEN, CLOSE, COLON}
ACTION_PREFIX = "ACTION-"
MAX_NESTING = 64

FORMAT_BRACKET = "bracket"
FORMAT_JSONL = "jsonl"
_FORMAT_ALIASES = {"bracket": FORMAT_BRACKET, "bracket-lines": FORMAT_BRACKET, "jsonl": FORMAT_JSONL}

_WORD_RE = re.compile(r"\S+")


def normalize_format(fmt):
    try:
        return _FORMAT_ALIASES[str(fmt).lower()]
    except KeyError:
        raise ValueError(f"Unknown corpus format {fmt!r}; expected one of {sorted(_FORMAT_ALIASES)}") from None


# --- Parsing ---

@dataclass
class _Frame:
    kind: Optional[NodeKind]
    action: Optional[ActionType] = None
    label: object = None
    column: int = 0
    token_offset: int = 0
    children: list = field(default_factory=list)
    has_action: bool = False


def _fail(category, message, column=None, token_offset=None):
    raise AnnotationParseError(category, message, column=column, token_offset=token_offset)


def _opener_label(items, k):
    """
    Returns (label text, tokens consumed) when items[k] opens a node, else None.

    Raises AnnotationParseError for a stand-alone '[' that is not followed by
    LABEL ':'.
    """
    tok, col = items[k]
    if tok == OPEN:
        if k + 1 >= len(items):
            _fail(ParseErrorCategory.UNBALANCED_BRACKET, "'[' at end of line", col, k)
        label = items[k + 1][0]
        if label in RESERVED:
            _fail(ParseErrorCategory.MALFORMED_NODE, f"expected a label after '[', found {label!r}", col, k)
        if k + 2 >= len(items) or items[k + 2][0] != COLON:
            _fail(ParseErrorCategory.MALFORMED_NODE, f"expected ':' after label {label!r}", col, k)
        return label, 3
    if tok.startswith(OPEN) and len(tok) > 1 and k + 1 < len(items) and items[k + 1][0] == COLON:
        return tok[1:], 2
    return None


def parse_line(text, utt_id="0"):
    """
    Parses one line of bracketed annotation into an AnnotatedUtterance.

    Words outside every node are kept as unannotated tokens; a line without
    an IER node yields an utterance whose root is None.

    Args:
        text (str | bytes): The line. Bytes are decoded as UTF-8 with replacement.
        utt_id (str): Id given to the resulting utterance.

    Returns:
        AnnotatedUtterance

    Raises:
        AnnotationParseError: with category, column and token offset set.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    items = [(m.group(), m.start()) for m in _WORD_RE.finditer(text)]

    stack = [_Frame(kind=None)]
    tokens: List[Token] = []
    n_roots = 0
    k = 0
    while k < len(items):
        tok, col = items[k]
        opener = _opener_label(items, k)
        if opener is not None:
            label_text, consumed = opener
            frame = _open_frame(label_text, stack, col, k)
            if frame.kind is NodeKind.IER:
                n_roots += 1
                if n_roots > 1:
                    _fail(ParseErrorCategory.MULTIPLE_ROOTS, "more than one IER node on the line", col, k)
            if len(stack) > MAX_NESTING:
                _fail(ParseErrorCategory.MALFORMED_NODE, f"nesting deeper than {MAX_NESTING}", col, k)
            stack.append(frame)
            k += consumed
        elif tok == CLOSE:
            if len(stack) == 1:
                _fail(ParseErrorCategory.UNBALANCED_BRACKET, "unexpected ']'", col, k)
            frame = stack.pop()
            if not frame.children:
                _fail(ParseErrorCategory.EMPTY_NODE, "node has no words", frame.column, frame.token_offset)
            stack[-1].children.append(_close_frame(frame))
            k += 1
        elif tok == COLON:
            _fail(ParseErrorCategory.MALFORMED_NODE, "stray ':'", col, k)
        else:
            token = Token(tok, len(tokens))
            tokens.append(token)
            stack[-1].children.append(token)
            k += 1

    if len(stack) > 1:
        frame = stack[-1]
        _fail(ParseErrorCategory.UNBALANCED_BRACKET, "unclosed '['", frame.column, frame.token_offset)

    root = next((c for c in stack[0].children if isinstance(c, AnnNode)), None)
    try:
        return AnnotatedUtterance(str(utt_id), tuple(tokens), root)
    except InvalidAnnotationError as e:
        _fail(ParseErrorCategory.MALFORMED_NODE, str(e))


def _open_frame(label_text, stack, col, k):
    upper = label_text.upper()
    ier_frame = stack[1] if len(stack) > 1 else None
    if upper == "IER":
        if len(stack) > 1:
            _fail(ParseErrorCategory.MISPLACED_NODE, "IER node must be at top level", col, k)
        return _Frame(NodeKind.IER, column=col, token_offset=k)
    if upper.startswith(ACTION_PREFIX):
        try:
            action = ActionType.parse(label_text[len(ACTION_PREFIX):])
        except UnknownLabelError:
            _fail(ParseErrorCategory.UNKNOWN_LABEL, f"unknown action {label_text!r}", col, k)
        if ier_frame is None:
            _fail(ParseErrorCategory.MISPLACED_NODE, "ACTION node outside an IER", col, k)
        if ier_frame.has_action:
            _fail(ParseErrorCategory.MULTIPLE_ACTIONS, "IER already has an ACTION node", col, k)
        if stack[-1] is not ier_frame:
            _fail(ParseErrorCategory.MISPLACED_NODE, "ACTION node must be a direct child of the IER", col, k)
        ier_frame.has_action = True
        return _Frame(NodeKind.ACTION, action=action, column=col, token_offset=k)
    try:
        label = canonicalize_label(label_text)
    except UnknownLabelError:
        _fail(ParseErrorCategory.UNKNOWN_LABEL, f"unknown label {label_text!r}", col, k)
    if ier_frame is None:
        _fail(ParseErrorCategory.MISPLACED_NODE, f"{label.value} node outside an IER", col, k)
    return _Frame(NodeKind.ENTITY, label=label, column=col, token_offset=k)


def _close_frame(frame):
    if frame.kind is NodeKind.IER:
        return AnnNode.ier(frame.children)
    if frame.kind is NodeKind.ACTION:
        return AnnNode.action_node(frame.action, frame.children)
    return AnnNode.entity_node(frame.label, frame.children)


# --- Serialization ---

def _render(node):
    parts = [f"[{node.name}", COLON]
    for child in node.children:
        parts.append(child.text if isinstance(child, Token) else _render(child))
    parts.append(CLOSE)
    return " ".join(parts)


def serialize(utt):
    """
    Renders an utterance as one canonical line of bracketed annotation.

    Tokens are separated by single spaces, labels are uppercase and an
    utterance without an IER is rendered as its plain words.

    Raises:
        InvalidAnnotationError: a token is a stand-alone '[', ']' or ':',
            which `parse_line` would read as syntax.
    """
    for token in utt.tokens:
        if token.text in RESERVED:
            raise InvalidAnnotationError(
                f"Utterance {utt.id}: token {token.index} is the reserved symbol {token.text!r}")
    if utt.root is None:
        return " ".join(t.text for t in utt.tokens)
    start, end = utt.root.start, utt.root.end
    parts = [t.text for t in utt.tokens[:start]]
    parts.append(_render(utt.root))
    parts.extend(t.text for t in utt.tokens[end:])
    return " ".join(parts)


# --- Corpora ---

@dataclass(frozen=True)
class Corpus:
    """An ordered collection of utterances plus where they came from."""
    utterances: Tuple[AnnotatedUtterance, ...]
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "utterances", tuple(self.utterances))
        seen = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise InvalidAnnotationError(f"Duplicate utterance id {utt.id!r} in corpus")
            seen.add(utt.id)

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def __getitem__(self, idx):
        return self.utterances[idx]

    @property
    def counts(self):
        actions = Counter(u.action.value for u in self.utterances if u.action is not None)
        entities = Counter(n.label.value for u in self.utterances for n, _ in u.entity_nodes())
        return {
            "utterances": len(self.utterances),
            "iers": sum(1 for u in self.utterances if u.root is not None),
            "actions": dict(sorted(actions.items())),
            "entities": dict(sorted(entities.items())),
        }

    def derive(self, utterances, **extra):
        """A new corpus over `utterances` that inherits this provenance."""
        provenance = dict(self.provenance)
        provenance.update(extra)
        return Corpus(tuple(utterances), provenance)


def _read_source(source):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source), "<bytes>"
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            return f.read(), os.fspath(source)
    data = source.read()
    if isinstance(data, str):
        data = data.encode("utf-8")
    return data, getattr(source, "name", "<stream>")


def load_corpus(source, fmt=FORMAT_BRACKET):
    """
    Loads a corpus, collecting malformed lines instead of failing on them.

    Args:
        source: a path, raw bytes or a binary stream of UTF-8 text.
        fmt (str): 'bracket' (alias 'bracket-lines') or 'jsonl'.

    Returns:
        tuple[Corpus, list[AnnotationParseError]]

    Raises:
        CorpusDecodeError: if the input is not valid UTF-8.
    """
    fmt = normalize_format(fmt)
    data, name = _read_source(source)
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise CorpusDecodeError(f"{name} is not valid UTF-8: {e}") from e

    utterances, errors, seen = [], [], set()
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r").strip()
        if not line or (fmt == FORMAT_BRACKET and line.startswith("#")):
            continue
        try:
            utt = _parse_record(line, line_no, fmt)
            if utt.id in seen:
                raise AnnotationParseError(ParseErrorCategory.DUPLICATE_ID, f"duplicate id {utt.id!r}")
        except AnnotationParseError as e:
            err = e.at_line(line_no)
            log.warning(f"{name}: {err}")
            errors.append(err)
            continue
        seen.add(utt.id)
        utterances.append(utt)

    corpus = Corpus(tuple(utterances), {"source": name, "format": fmt})
    corpus.provenance["counts"] = corpus.counts
    log.info(f"Loaded {len(corpus)} utterances from {name} ({len(errors)} rejected lines).")
    return corpus, errors


def _parse_record(line, line_no, fmt):
    if fmt == FORMAT_BRACKET:
        return parse_line(line, utt_id=str(line_no))
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise AnnotationParseError(ParseErrorCategory.MALFORMED_RECORD, f"invalid JSON: {e.msg}", column=e.colno - 1)
    if not isinstance(record, dict):
        raise AnnotationParseError(ParseErrorCategory.MALFORMED_RECORD, "record is not a JSON object")
    utt_id = record.get("id")
    utt_id = str(line_no) if utt_id in (None, "") else str(utt_id)
    ann = record.get("ann")
    if ann:
        return parse_line(str(ann), utt_id=utt_id)
    tokens = tokenize(str(record.get("text") or ""))
    return AnnotatedUtterance(utt_id, tuple(tokens), None)


def write_corpus(corpus, stream, fmt=FORMAT_BRACKET):
    """Writes one utterance per line (LF endings) in the requested format."""
    fmt = normalize_format(fmt)
    for utt in corpus:
        if fmt == FORMAT_BRACKET:
            stream.write(serialize(utt) + "\n")
        else:
            record = {"id": utt.id, "text": utt.text, "ann": serialize(utt) if utt.root is not None else None}
            stream.write(json.dumps(record, ensure_ascii=False) + "\n")


def corpus_to_text(corpus, fmt=FORMAT_BRACKET):
    buf = io.StringIO()
    write_corpus(corpus, buf, fmt)
    return buf.getvalue()


def corpus_statistics(corpus):
    """
    Summary percentages in the shape the annotation report uses.

    Entity inclusion rates are per IER (an IER counts once per label however
    many spans carry it); the nested share is over all entity annotations.
    """
    iers = [u for u in corpus if u.root is not None]
    n_iers = len(iers)
    actions = Counter(u.action.value for u in iers if u.action is not None)
    n_actions = sum(actions.values())
    inclusion = Counter()
    n_entities = n_nested = n_empty = 0
    for utt in iers:
        nodes = list(utt.entity_nodes())
        if not nodes:
            n_empty += 1
        inclusion.update({n.label.value for n, _ in nodes})
        n_entities += len(nodes)
        n_nested += sum(1 for _, depth in nodes if depth > 1)
    return {
        "utterances": len(corpus),
        "iers": n_iers,
        "action_share": {a: c / n_actions for a, c in sorted(actions.items())} if n_actions else {},
        "entity_inclusion": {lbl: inclusion[lbl] / n_iers for lbl in sorted(inclusion)} if n_iers else {},
        "nested_entity_share": n_nested / n_entities if n_entities else 0.0,
        "no_entity_share": n_empty / n_iers if n_iers else 0.0,
    }


# --- Filtering ---

def filter_executable(corpus):
    """
    Keeps only utterances with an IER whose action is classifiable and not OTHER.

    Survivors keep their order. Removal counts per reason are logged and
    accumulated under provenance['filtered'].
    """
    removed = Counter()
    kept = []
    for utt in corpus:
        if utt.root is None:
            removed["no_ier"] += 1
        elif utt.action is None:
            removed["no_action"] += 1
        elif utt.action is ActionType.OTHER:
            removed["other_action"] += 1
        else:
            kept.append(utt)
    previous = corpus.provenance.get("filtered", {})
    filtered = {reason: previous.get(reason, 0) + removed.get(reason, 0)
                for reason in ("no_ier", "no_action", "other_action")}
    log.info(f"filter_executable kept {len(kept)}/{len(corpus)} utterances; removed {dict(removed)}")
    return corpus.derive(kept, filtered=filtered)
