"""Deterministic synthetic corpus generator for experiments and tests.

The experiment criteria need corpus structure that a natural-text download
would provide but that must be controllable at desk scale:

- nouns come from one shared pool, while each verb depends jointly on
  the preceding noun and the sentence theme (base weights rotated by the
  noun's index) and each adjective depends on the theme alone: a bigram
  chain sees only flat mixtures over themes, but a sequence model that
  reads the theme from nearby adjectives and earlier verbs can resolve
  both slots;
- the grammar is a stationary chain of short clauses, junction words are
  optional, and sentences are chains of 1-4 clauses; a context window
  starting mid-sentence (or spanning two sentences, since the token
  stream carries no boundary markers) therefore reads like any other
  clause chain, so prediction quality does not depend on window offset;
- theme evidence recurs every few words (adjectives and verbs are
  theme-specific), while noun choice is deliberately flat, keeping
  exact-match skips rare at high thresholds while near-miss predictions
  stay semantically close to the truth;
- content words are long (6-9 chars) and share multi-character prefixes
  (granite/grating/gravel, glimmers/glistens/glitters), so
  character-level completion is useful but not trivial;
- the theme persists across sentences as a slow Markov chain (stay
  probability 0.93), the way topics drift in natural text, so a longer
  context window accumulates consistent theme evidence instead of mixing
  unrelated sentences, and clauses can open with a theme place ("in the
  lagoon ...") or a matching possessive ("the sailor's chamber ...");
- a small number of sentences carry digits and apostrophes to exercise
  the full alphabet, and character frequencies are skewed enough for
  entropy coding to pay off.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

# Shared noun pool: three prefix families, no theme affiliation.
NOUNS = ["granite", "grating", "gravel",
         "harbour", "harvest", "harmony",
         "chamber", "channel", "charcoal"]

# Per theme: one verb from each cross-theme prefix family (gl/sl/fl), so a
# completion model must read the theme from context before the fourth
# character settles the word.
THEMES: dict[str, dict[str, object]] = {
    "sea": {
        "verbs": ["glimmers", "slackens", "flickers"],
        "adjs": ["salted", "misty", "briny"],
        "place": "lagoon",
        "owner": "sailor's",
    },
    "forge": {
        "verbs": ["glistens", "slumbers", "flattens"],
        "adjs": ["molten", "sooty", "beaten"],
        "place": "smithy",
        "owner": "smith's",
    },
    "garden": {
        "verbs": ["glitters", "slithers", "flutters"],
        "adjs": ["mossy", "budding", "fragrant"],
        "place": "orchard",
        "owner": "sparrow's",
    },
}

DETERMINERS = (["the", "a"], [0.68, 0.32])
CONNECTORS = (["and", "while", "then"], [0.50, 0.30, 0.20])
PREPOSITIONS = (["beneath", "beside", "within", "against", "near"],
                [0.34, 0.26, 0.20, 0.12, 0.08])
ADVERBS = (["again", "slowly", "still", "gently"], [0.35, 0.28, 0.20, 0.17])
TIMES = (["morning", "evening", "midday"], [0.40, 0.35, 0.25])
DIGITS = (["7", "9", "12"], [0.45, 0.35, 0.20])
TERMINATOR_CHOICES = ([".", "?", "!"], [0.85, 0.08, 0.07])

# Verb choice given (noun, theme): the base weights are rotated by the
# noun's index, so the right verb is a joint function of noun and theme;
# a bigram chain conditioned on the noun still faces the theme mixture.
_VERB_BASE = np.array([0.76, 0.16, 0.08])
# Adjective choice given theme; adjectives precede their noun, so the only
# usable evidence is theme context, which a bigram chain cannot carry.
_ADJ_BASE = np.array([0.62, 0.24, 0.14])

ADJ_RATE = 0.60      # adjective before a noun
ADV_RATE = 0.25      # adverb after a verb
TAIL_RATE = 0.40     # prepositional tail after a clause
JUNCTION_RATE = 0.55  # connector between clauses (else juxtaposition)
PLACE_RATE_FIRST = 0.30  # "in the <place>" opener on a sentence's first clause
PLACE_RATE_LATER = 0.08  # same prefix on later clauses
THEME_STAY = 0.93    # per-sentence probability of keeping the theme
_CLAUSE_COUNTS = ([1, 2, 3, 4], [0.30, 0.34, 0.22, 0.14])
_NOUN_PROBS = None   # lazily built Zipf-lite weights


@dataclass(frozen=True)
class SyntheticConfig:
    num_sentences: int = 3000
    seed: int = 0
    theme_noise: float = 0.04   # per content slot: draw from a foreign theme
    special_rate: float = 0.035  # digit / apostrophe sentences


def _zipf_weights(n: int) -> np.ndarray:
    w = 1.0 / (np.arange(n) + 3.0)
    return w / w.sum()


def _pick(rng: np.random.Generator, options: list[str],
          weights: list[float] | np.ndarray) -> str:
    p = np.asarray(weights, dtype=np.float64)
    return options[int(rng.choice(len(options), p=p / p.sum()))]


def _maybe_foreign(rng: np.random.Generator, theme: str, noise: float) -> str:
    if rng.random() < noise:
        others = [t for t in THEMES if t != theme]
        return others[int(rng.integers(len(others)))]
    return theme


def _noun(rng: np.random.Generator) -> str:
    global _NOUN_PROBS
    if _NOUN_PROBS is None:
        _NOUN_PROBS = _zipf_weights(len(NOUNS))
    return _pick(rng, NOUNS, _NOUN_PROBS)


def _verb(rng: np.random.Generator, theme: str, noun: str,
          noise: float) -> str:
    theme = _maybe_foreign(rng, theme, noise)
    verbs = THEMES[theme]["verbs"]
    weights = np.roll(_VERB_BASE, NOUNS.index(noun) % 3)
    return _pick(rng, verbs, weights)


def _adj(rng: np.random.Generator, theme: str, noise: float) -> str:
    theme = _maybe_foreign(rng, theme, noise)
    return _pick(rng, THEMES[theme]["adjs"], _ADJ_BASE)


def _noun_phrase(rng: np.random.Generator, theme: str,
                 noise: float) -> tuple[list[str], str]:
    words = [_pick(rng, *DETERMINERS)]
    if rng.random() < ADJ_RATE:
        words.append(_adj(rng, theme, noise))
    noun = _noun(rng)
    words.append(noun)
    return words, noun


def _clause(rng: np.random.Generator, theme: str, noise: float,
            owner: bool = False, first: bool = False) -> list[str]:
    words: list[str] = []
    place_rate = PLACE_RATE_FIRST if first else PLACE_RATE_LATER
    if rng.random() < place_rate:
        words += ["in", "the", THEMES[theme]["place"]]
    if owner:
        noun = _noun(rng)
        words += ["the", THEMES[theme]["owner"], noun]
    else:
        phrase, noun = _noun_phrase(rng, theme, noise)
        words += phrase
    words.append(_verb(rng, theme, noun, noise))
    if rng.random() < ADV_RATE:
        words.append(_pick(rng, *ADVERBS))
    if rng.random() < TAIL_RATE:
        words.append(_pick(rng, *PREPOSITIONS))
        words.extend(_noun_phrase(rng, theme, noise)[0])
    return words


def _sentence_words(rng: np.random.Generator, theme: str,
                    cfg: SyntheticConfig) -> list[str]:
    noise = cfg.theme_noise
    count = int(_pick(rng, [str(c) for c in _CLAUSE_COUNTS[0]],
                      _CLAUSE_COUNTS[1]))
    words: list[str] = []
    if rng.random() < 0.10:
        words += ["every", _pick(rng, *TIMES)]
    for i in range(count):
        if i > 0 and rng.random() < JUNCTION_RATE:
            words.append(_pick(rng, *CONNECTORS))
        owner = (i == count - 1 and count >= 3 and rng.random() < 0.5)
        words += _clause(rng, theme, noise, owner=owner, first=(i == 0))
    return words


def _sentence(rng: np.random.Generator, theme: str,
              cfg: SyntheticConfig) -> str:
    if rng.random() < cfg.special_rate:
        noun = _noun(rng)
        words = ["the", THEMES[theme]["owner"], noun,
                 _verb(rng, theme, noun, 0.0),
                 "at", _pick(rng, *DIGITS), "o'clock"]
    else:
        words = _sentence_words(rng, theme, cfg)
    return " ".join(words) + _pick(rng, *TERMINATOR_CHOICES)


def generate_text(cfg: SyntheticConfig = SyntheticConfig()) -> str:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    themes = list(THEMES)
    theme = themes[int(rng.integers(len(themes)))]
    pieces = []
    for _ in range(cfg.num_sentences):
        if rng.random() > THEME_STAY:
            others = [t for t in themes if t != theme]
            theme = others[int(rng.integers(len(others)))]
        pieces.append(_sentence(rng, theme, cfg))
    return " ".join(pieces)


def write_corpus(path: str, cfg: SyntheticConfig = SyntheticConfig()) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(generate_text(cfg))
        fh.write("\n")
