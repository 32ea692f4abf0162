# File: src/modeling/preprocess.py

"""
Turns a loaded corpus into fixed train/test (or train/dev/test) splits.

The corpus is filtered for executable requests first, then shuffled with a
seeded generator and cut into contiguous slices. Every split except train
gets floor(N * fraction) utterances; train takes the remainder.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from src.annotation.bio import DEFAULT_MAX_DEPTH, ENCODING_INNERMOST, encode
from src.annotation.bracket_io import filter_executable
from src.config_loader import config_section
from src.exceptions import EmptyAfterFilterError

log = logging.getLogger(__name__)

MODE_ACTION = "action"
MODE_ENTITY = "entity"
SPLIT_NAMES = {MODE_ACTION: ("train", "test"), MODE_ENTITY: ("train", "dev", "test")}
DEFAULT_FRACTIONS = {MODE_ACTION: (0.75, 0.25), MODE_ENTITY: (0.80, 0.10, 0.10)}
DEFAULT_SEED = 42


@dataclass(frozen=True)
class SplitSpec:
    mode: str = MODE_ACTION
    fractions: tuple = DEFAULT_FRACTIONS[MODE_ACTION]
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.mode not in SPLIT_NAMES:
            raise ValueError(f"Unknown split mode {self.mode!r}; expected one of {sorted(SPLIT_NAMES)}")
        fractions = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, "fractions", fractions)
        if len(fractions) != len(SPLIT_NAMES[self.mode]):
            raise ValueError(f"{self.mode} mode needs {len(SPLIT_NAMES[self.mode])} fractions, got {fractions}")
        if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"Split fractions must be non-negative and sum to 1, got {fractions}")

    @property
    def names(self):
        return SPLIT_NAMES[self.mode]

    @classmethod
    def from_config(cls, mode, seed=None):
        section = config_section("splits")
        fractions = tuple(section.get(mode, DEFAULT_FRACTIONS[mode]))
        seed = section.get("seed", DEFAULT_SEED) if seed is None else seed
        return cls(mode, fractions, int(seed))

    def sizes(self, n):
        """Split sizes for n utterances, in `names` order."""
        sizes = [math.floor(n * f) for f in self.fractions]
        sizes[0] = n - sum(sizes[1:])
        return sizes


@dataclass(frozen=True)
class Split:
    """One slice of the corpus and the examples derived from it."""
    name: str
    utterances: tuple
    examples: list

    def __len__(self):
        return len(self.utterances)

    @property
    def tokens(self):
        return [list(u.tokens) for u in self.utterances]

    @property
    def actions(self):
        return [u.action for u in self.utterances]


def action_examples(utterances):
    """(tokens, gold action) pairs."""
    return [(list(u.tokens), u.action) for u in utterances]


def entity_examples(utterances, encoding=ENCODING_INNERMOST, max_depth=DEFAULT_MAX_DEPTH):
    """(tokens, BIO tags, gold action) triples."""
    return [(list(u.tokens), encode(u, encoding, max_depth), u.action) for u in utterances]


def preprocess(corpus, spec, encoding=ENCODING_INNERMOST, max_depth=DEFAULT_MAX_DEPTH):
    """
    Filters, shuffles and slices a corpus.

    Args:
        corpus (Corpus): loaded utterances.
        spec (SplitSpec): mode, fractions and seed.
        encoding (str): BIO encoding for entity mode ('innermost' or 'nested').
        max_depth (int): label cap for the nested encoding.

    Returns:
        dict[str, Split]: keyed by split name in spec order.

    Raises:
        EmptyAfterFilterError: nothing executable is left to split.
    """
    executable = filter_executable(corpus)
    n = len(executable)
    if n == 0:
        raise EmptyAfterFilterError(
            f"No executable utterances left after filtering {len(corpus)} "
            f"(removed: {executable.provenance.get('filtered')})")

    order = np.random.default_rng(spec.seed).permutation(n)
    shuffled = [executable[int(i)] for i in order]
    splits = {}
    offset = 0
    for name, size in zip(spec.names, spec.sizes(n)):
        utts = tuple(shuffled[offset:offset + size])
        offset += size
        if spec.mode == MODE_ACTION:
            examples = action_examples(utts)
        else:
            examples = entity_examples(utts, encoding, max_depth)
        splits[name] = Split(name, utts, examples)
    log.info(f"{spec.mode} splits (seed={spec.seed}): "
             + ", ".join(f"{name}={len(s)}" for name, s in splits.items()))
    return splits
