"""Noiseless and character-erasure channels.

Each transmitted character unit (a plain character or one Huffman codeword)
is independently replaced by the erasure mark with probability epsilon.
Erasure granularity is the whole unit even under compression; bit-level
erasure inside a codeword would break prefix-code synchronization, which is
not modeled.  Erased units still cost their bits at the source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Control-picture rendering of the erasure symbol in traces and streams.
ERASURE_MARK = "␀"


@dataclass(frozen=True)
class CharUnit:
    """One channel use: payload is a character or a Huffman bit string."""
    payload: str
    bits: int

    @property
    def erased(self) -> bool:
        return self.payload == ERASURE_MARK


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "noiseless"  # "noiseless" or "erasure"
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("noiseless", "erasure"):
            raise ValueError(f"unknown channel kind: {self.kind!r}")
        if self.kind == "noiseless" and self.epsilon != 0.0:
            raise ValueError("noiseless channel requires epsilon = 0")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


class Channel:
    """A seeded channel instance; one persistent generator per session."""

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))

    def transmit(self, units: list[CharUnit]) -> list[CharUnit]:
        if self.cfg.kind == "noiseless" or self.cfg.epsilon == 0.0 or not units:
            return list(units)
        draws = self.rng.random(len(units))
        return [CharUnit(ERASURE_MARK, u.bits) if d < self.cfg.epsilon else u
                for u, d in zip(units, draws)]


def transmit(units: list[CharUnit], cfg: ChannelConfig,
             rng: np.random.Generator | None = None) -> list[CharUnit]:
    """One-shot form of Channel.transmit with an optional external generator."""
    ch = Channel(cfg)
    if rng is not None:
        ch.rng = rng
    return ch.transmit(units)
