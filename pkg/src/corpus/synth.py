# File: src/corpus/synth.py

"""
Seeded, grammar-based generator of annotated image edit requests.

Each utterance is drawn independently from its own generator,
numpy's PCG64 seeded with (seed, index), so any slice of a corpus can be
regenerated on its own. An utterance is assembled as a bracketed line and
run through the regular parser, so everything emitted is valid input.

Distribution targets:
  * actions follow `action_distribution` (ADJUST 0.44 by default);
  * each entity label appears in an IER with probability `entity_rates[label]`;
  * `no_entity_rate` of the IERs carry no entity at all;
  * about `nesting_rate` of all entities are a VALUE nested in an ATTRIBUTE
    ("a warmer hue").
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from src.annotation.bracket_io import Corpus, parse_line
from src.annotation.schema import ActionType, EntityLabel
from src.config_loader import config_section

log = logging.getLogger(__name__)

RNG_NAME = "PCG64"

DEFAULT_ACTION_DISTRIBUTION = {
    ActionType.ADJUST: 0.44,
    ActionType.CROP: 0.11,
    ActionType.ADD: 0.10,
    ActionType.DELETE: 0.095,
    ActionType.REPLACE: 0.04,
    ActionType.APPLY: 0.04,
    ActionType.ZOOM: 0.03,
    ActionType.ROTATE: 0.03,
    ActionType.TRANSFORM: 0.03,
    ActionType.MOVE: 0.03,
    ActionType.CLONE: 0.02,
    ActionType.SWAP: 0.01,
    ActionType.SELECT: 0.005,
    ActionType.UNDO: 0.005,
    ActionType.MERGE: 0.005,
    ActionType.REDO: 0.005,
    ActionType.SCROLL: 0.004,
    ActionType.OTHER: 0.001,
}

DEFAULT_ENTITY_RATES = {
    EntityLabel.ATTRIBUTE: 0.56,
    EntityLabel.VALUE: 0.32,
    EntityLabel.OBJECT: 0.30,
    EntityLabel.LOCATION: 0.60,
    EntityLabel.INTENT: 0.29,
}

# --- Lexicon ---

ACTION_VERBS = {
    ActionType.ADJUST: ["adjust", "increase", "decrease", "brighten", "darken", "boost", "reduce"],
    ActionType.DELETE: ["remove", "erase", "delete", "get rid of"],
    ActionType.CROP: ["crop", "trim"],
    ActionType.ADD: ["add", "insert"],
    ActionType.REPLACE: ["replace", "substitute"],
    ActionType.APPLY: ["apply", "use"],
    ActionType.ZOOM: ["magnify", "blow up"],
    ActionType.ROTATE: ["rotate", "tilt"],
    ActionType.TRANSFORM: ["transform", "flip", "mirror", "warp"],
    ActionType.MOVE: ["move", "shift", "drag"],
    ActionType.CLONE: ["clone", "duplicate", "copy"],
    ActionType.SELECT: ["select", "highlight", "pick"],
    ActionType.SWAP: ["swap", "switch"],
    ActionType.UNDO: ["undo", "revert"],
    ActionType.MERGE: ["merge", "combine", "blend"],
    ActionType.REDO: ["redo", "repeat"],
    ActionType.OTHER: ["clean up", "fix", "improve"],
    ActionType.SCROLL: ["scroll", "pan"],
}

# (home action, guest action, shared verb). The home action always owns the
# verb; in hard mode both actions use it with probability `hard_share`.
VERB_SHARING_PAIRS = (
    (ActionType.ZOOM, ActionType.CROP, "zoom in on"),
    (ActionType.DELETE, ActionType.CROP, "cut out"),
    (ActionType.APPLY, ActionType.ADD, "put"),
    (ActionType.ROTATE, ActionType.TRANSFORM, "turn"),
)

ATTRIBUTE_PHRASES = ["the brightness", "the contrast", "the saturation", "the color", "the exposure",
                     "the sharpness", "the hue", "the size", "the shadows", "the highlights"]
# (leading words, VALUE word, trailing words) for VALUE-inside-ATTRIBUTE phrases.
NESTED_ATTRIBUTE_PHRASES = [("a", "warmer", "hue"), ("a", "brighter", "tone"), ("a", "softer", "glow"),
                            ("more", "vivid", "colors"), ("a", "darker", "shade"), ("a", "cooler", "tint")]
VALUE_PHRASES = ["slightly", "a lot", "a little", "by 20 percent", "by half", "much more", "to the maximum"]
COMMENT_VALUES = ["dark", "bright", "blurry", "dull", "grainy", "washed out"]
OBJECT_PHRASES = ["the tree", "the dog", "the car", "the sky", "the person", "the building",
                  "the logo", "the text", "the zebra", "the red balloon", "the bird"]
LOCATION_PHRASES = ["the image", "the photo", "the left side", "the right side", "the background",
                    "the top corner", "the bottom half", "the edges", "the center", "the foreground"]
INTENT_PHRASES = ["to make it pop", "so it looks natural", "to hide the blemish",
                  "for my profile picture", "so the colors match", "to make it look older"]
LOCATION_CONNECTORS = ["in", "on", "at"]
COMMENT_SUBJECTS = ["it", "this", "everything"]
COMMENT_LINKS = ["is too", "looks too", "seems too"]
NON_REQUESTS = ["this image should have been taken with a better camera", "i love this picture",
                "what a nice day it was", "my friend took this one"]

FORM_WEIGHTS = {"imperative": 0.6, "modal": 0.25, "desire": 0.15}
FORM_PREFIXES = {
    "imperative": ["", "please"],
    "modal": ["can you", "could you", "would you please"],
    "desire": ["i want you to", "i'd like you to", "please try to"],
}
COMMENT_SHARE = 0.5


def _check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be within [0, 1], got {value}")


@dataclass(frozen=True)
class SynthConfig:
    action_distribution: dict = field(default_factory=lambda: dict(DEFAULT_ACTION_DISTRIBUTION))
    entity_rates: dict = field(default_factory=lambda: dict(DEFAULT_ENTITY_RATES))
    nesting_rate: float = 0.04
    no_entity_rate: float = 0.03
    no_ier_rate: float = 0.0
    hard_mode: bool = False
    hard_share: float = 0.5
    seed: int = 7

    def __post_init__(self):
        actions = {ActionType.parse(k): float(v) for k, v in self.action_distribution.items()}
        rates = {EntityLabel(str(k).upper()): float(v) for k, v in self.entity_rates.items()}
        object.__setattr__(self, "action_distribution", actions)
        object.__setattr__(self, "entity_rates", rates)
        for action, p in actions.items():
            _check_probability(f"P({action})", p)
        total = sum(actions.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Action distribution must sum to 1, sums to {total!r}")
        for label, p in rates.items():
            _check_probability(f"rate({label})", p)
        for name in ("nesting_rate", "no_entity_rate", "no_ier_rate", "hard_share"):
            _check_probability(name, getattr(self, name))

    @classmethod
    def from_config(cls, **overrides):
        """Seed, hard_mode and hard_share from the `synth` block of config.yaml, plus overrides."""
        section = config_section("synth")
        known = {k: section[k] for k in ("seed", "hard_mode", "hard_share") if k in section}
        known.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**known)


class _Plan:
    """Sampling constants derived once per config."""

    def __init__(self, cfg):
        self.actions = [a for a in ActionType if a in cfg.action_distribution]
        probs = np.array([cfg.action_distribution[a] for a in self.actions])
        self.action_probs = probs / probs.sum()
        self.labels = [e for e in EntityLabel if cfg.entity_rates.get(e, 0.0) > 0]
        self.draw_probs = _solve_draw_probabilities(
            np.array([cfg.entity_rates[e] for e in self.labels]), cfg.no_entity_rate)
        self.nest_prob = self._nest_probability(cfg)

        self.verbs = {a: list(v) for a, v in ACTION_VERBS.items()}
        self.shared = {}
        for home, guest, verb in VERB_SHARING_PAIRS:
            self.verbs[home].append(verb)
            self.shared.setdefault(home, []).append(verb)
            self.shared.setdefault(guest, []).append(verb)

    def _nest_probability(self, cfg):
        rates = cfg.entity_rates
        p_attr = rates.get(EntityLabel.ATTRIBUTE, 0.0)
        if EntityLabel.VALUE not in self.labels or EntityLabel.ATTRIBUTE not in self.labels:
            return 0.0
        # P(ATTRIBUTE and VALUE) = p_attr * q_value under the rejection scheme.
        q_value = self.draw_probs[self.labels.index(EntityLabel.VALUE)]
        both = p_attr * q_value
        expected_entities = sum(rates.values())
        if both <= 0:
            return 0.0
        return min(1.0, cfg.nesting_rate * expected_entities / both)


def _solve_draw_probabilities(rates, no_entity_rate, iterations=200):
    """
    Per-label draw probabilities q such that, after forcing `no_entity_rate`
    of IERs to be empty and redrawing empty draws for the rest, each label's
    inclusion rate equals its target.
    """
    if len(rates) == 0 or no_entity_rate >= 1.0:
        return np.zeros(len(rates))
    keep = 1.0 - no_entity_rate
    q = np.minimum(rates / keep, 1.0)
    for _ in range(iterations):
        nonempty = 1.0 - np.prod(1.0 - q)
        q = np.minimum(rates * nonempty / keep, 1.0)
    return q


def _pick(rng, options):
    return options[int(rng.integers(len(options)))]


def _entity(label, phrase):
    return f"[{label.value} : {phrase} ]"


def _choose_verb(rng, cfg, plan, action):
    if cfg.hard_mode and action in plan.shared and rng.random() < cfg.hard_share:
        return _pick(rng, plan.shared[action])
    own = ACTION_VERBS[action] if cfg.hard_mode else plan.verbs[action]
    return _pick(rng, own)


def _draw_labels(rng, cfg, plan):
    if not plan.labels or rng.random() < cfg.no_entity_rate:
        return set()
    if not np.any(plan.draw_probs > 0):
        return set()
    while True:
        drawn = rng.random(len(plan.labels)) < plan.draw_probs
        if drawn.any():
            return {label for label, hit in zip(plan.labels, drawn) if hit}


def _comment_line(rng, action, labels):
    subject = _entity(EntityLabel.LOCATION, _pick(rng, LOCATION_PHRASES)) \
        if EntityLabel.LOCATION in labels else _pick(rng, COMMENT_SUBJECTS)
    value = _entity(EntityLabel.VALUE, _pick(rng, COMMENT_VALUES))
    return f"[IER : {subject} [ACTION-{action.value} : {_pick(rng, COMMENT_LINKS)} {value} ] ]"


def _request_line(rng, cfg, plan, action, labels):
    nested = (EntityLabel.ATTRIBUTE in labels and EntityLabel.VALUE in labels
              and rng.random() < plan.nest_prob)
    chunks = []
    if EntityLabel.ATTRIBUTE in labels:
        if nested:
            lead, value, trail = _pick(rng, NESTED_ATTRIBUTE_PHRASES)
            chunks.append(_entity(EntityLabel.ATTRIBUTE,
                                  f"{lead} {_entity(EntityLabel.VALUE, value)} {trail}"))
        else:
            chunks.append(_entity(EntityLabel.ATTRIBUTE, _pick(rng, ATTRIBUTE_PHRASES)))
    if EntityLabel.OBJECT in labels:
        if chunks:
            chunks.append("of")
        chunks.append(_entity(EntityLabel.OBJECT, _pick(rng, OBJECT_PHRASES)))
    if EntityLabel.LOCATION in labels:
        if chunks:
            chunks.append(_pick(rng, LOCATION_CONNECTORS))
        chunks.append(_entity(EntityLabel.LOCATION, _pick(rng, LOCATION_PHRASES)))
    if EntityLabel.VALUE in labels and not nested:
        chunks.append(_entity(EntityLabel.VALUE, _pick(rng, VALUE_PHRASES)))
    if EntityLabel.INTENT in labels:
        chunks.append(_entity(EntityLabel.INTENT, _pick(rng, INTENT_PHRASES)))

    forms = list(FORM_WEIGHTS)
    form = forms[int(rng.choice(len(forms), p=list(FORM_WEIGHTS.values())))]
    prefix = _pick(rng, FORM_PREFIXES[form])
    verb = _choose_verb(rng, cfg, plan, action)
    parts = [prefix, f"[ACTION-{action.value} : {verb} ]"] + chunks
    return "[IER : " + " ".join(p for p in parts if p) + " ]"


def generate_line(cfg, index, seed, plan=None):
    """The bracketed line for utterance `index` (0-based) of a corpus."""
    plan = plan or _Plan(cfg)
    rng = np.random.default_rng([seed, index])
    if cfg.no_ier_rate and rng.random() < cfg.no_ier_rate:
        return _pick(rng, NON_REQUESTS)
    action = plan.actions[int(rng.choice(len(plan.actions), p=plan.action_probs))]
    labels = _draw_labels(rng, cfg, plan)
    comment_ok = (action is ActionType.ADJUST and EntityLabel.VALUE in labels
                  and labels <= {EntityLabel.VALUE, EntityLabel.LOCATION})
    if comment_ok and rng.random() < COMMENT_SHARE:
        return _comment_line(rng, action, labels)
    return _request_line(rng, cfg, plan, action, labels)


def generate(cfg=None, n=None, seed=None):
    """
    Generates n annotated utterances with ids "1".."n".

    Args:
        cfg (SynthConfig): distributions; defaults from config.yaml.
        n (int): corpus size, >= 0 (config `synth.n` when None).
        seed (int): overrides cfg.seed.

    Returns:
        Corpus: provenance records generator, rng, seed, hard_mode and n.
    """
    cfg = cfg or SynthConfig.from_config()
    n = int(config_section("synth").get("n", 2000) if n is None else n)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    seed = cfg.seed if seed is None else int(seed)
    plan = _Plan(cfg)
    utterances = [parse_line(generate_line(cfg, i, seed, plan), utt_id=str(i + 1)) for i in range(n)]
    provenance = {"generator": "synth", "rng": RNG_NAME, "seed": seed,
                  "hard_mode": cfg.hard_mode, "n": n}
    log.info(f"Generated {n} synthetic utterances (seed={seed}, hard_mode={cfg.hard_mode})")
    return Corpus(tuple(utterances), provenance)


def sharing_pairs():
    """VERB_SHARING_PAIRS as unordered action-value pairs, for confusion analysis."""
    return {frozenset((a.value, b.value)) for a, b, _ in VERB_SHARING_PAIRS}
