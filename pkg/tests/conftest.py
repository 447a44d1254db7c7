"""Shared test fixtures: tiny deterministic corpora and trained models.

Model-training fixtures are module- or session-scoped because even tiny
LSTM fits cost seconds; tests must not retrain per test function.
"""

import numpy as np
import pytest

from semtext import corpus as corpmod
from semtext.completion import CharTrainingConfig, char_train
from semtext.predictors import TrainingConfig, slm_train

# Distinct first words so that memorization is not blocked by prefix
# ambiguity: each sentence is recoverable from its first two tokens.
MEMORIZABLE_TEXT = (
    "alpha stone rings true. bravo river bends south. "
    "carbon flame burns bright. delta cloud drifts north. "
    "ember frost melts early."
)

# One long periodic sentence: completion of "a" after "ab ab " is "ab".
PERIODIC_TEXT = " ".join(["ab"] * 60) + "."

# A corpus where the word after "the" is nearly forced, for completion
# oracles: "king" dominates, "kite" shares the "ki" prefix.
KING_TEXT = (
    "the king rings the bell. the king sings the tune. "
    "the king rings the bell. the king sings the tune. "
    "the kite rises the wind. "
) * 12


@pytest.fixture(scope="session")
def memor_corpus():
    return corpmod.parse_corpus(MEMORIZABLE_TEXT)


@pytest.fixture(scope="session")
def memor_vocab(memor_corpus):
    return corpmod.build_vocabulary(memor_corpus)


@pytest.fixture(scope="session")
def memor_slm(memor_corpus, memor_vocab):
    data = corpmod.build_ngram_dataset(memor_corpus, memor_vocab)
    cfg = TrainingConfig(epochs=220, batch_size=8, learning_rate=0.01,
                         hidden=24, n_embed=16, seed=0)
    return slm_train(data, cfg, memor_vocab.size, vocab_hash="test")


@pytest.fixture(scope="session")
def king_corpus():
    return corpmod.parse_corpus(KING_TEXT)


@pytest.fixture(scope="session")
def king_char_model(king_corpus):
    cfg = CharTrainingConfig(window=24, hidden=48, epochs=30, batch_size=16,
                             learning_rate=0.01, stride=1, seed=1)
    return char_train(king_corpus, cfg)


@pytest.fixture(scope="session")
def ab_char_model():
    corp = corpmod.parse_corpus(PERIODIC_TEXT)
    cfg = CharTrainingConfig(window=8, hidden=16, epochs=40, batch_size=16,
                             learning_rate=0.02, stride=1, seed=2)
    return char_train(corp, cfg)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(1234))
