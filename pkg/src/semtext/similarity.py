"""Word embeddings and the semantic similarity score r(x, y) in [0, 1].

The embedding table is the trained word model's embedding layer; the Markov
predictor reuses the same table so similarity numbers stay comparable across
predictors.  Similarity is the standard cosine ratio clamped below at 0,
with exact string equality short-circuiting to 1 and out-of-vocabulary words
scoring 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary


class DegenerateEmbeddingError(ValueError):
    """Raised when a cosine is requested against an all-zero vector."""


@dataclass(frozen=True)
class EmbeddingTable:
    """Rows indexed by token; row 0 is the reserved padding row (all zero)."""
    vectors: np.ndarray

    @property
    def n_embed(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0]) - 1

    def row(self, token: int) -> np.ndarray:
        if not 1 <= token <= self.size:
            raise IndexError(f"token out of range: {token}")
        return self.vectors[token]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateEmbeddingError("cosine undefined for zero vector")
    return max(0.0, float(np.dot(a, b)) / (na * nb))


def word_similarity(actual: str, estimate: str | None, vocab: Vocabulary,
                    table: EmbeddingTable) -> float:
    """Exact match scores 1; a missing or out-of-vocabulary side scores 0."""
    if estimate is not None and estimate == actual:
        return 1.0
    if estimate is None:
        return 0.0
    ta = vocab.token(actual)
    te = vocab.token(estimate)
    if ta is None or te is None:
        return 0.0
    return cosine_similarity(table.row(ta), table.row(te))
