"""Markov and neural next-word predictors."""

import numpy as np
import pytest

from semtext.corpus import build_ngram_dataset, build_vocabulary, parse_corpus
from semtext.datagen import SyntheticConfig, generate_text
from semtext.predictors import (
    MarkovPredictor,
    NeuralPredictor,
    TrainingConfig,
    TrainingDivergedError,
    mcm_fit,
    mcm_predict,
    slm_gradient_check,
    slm_predict,
    slm_train,
)

# ---------------------------------------------------------------- MCM


def _fit_tokens(token_sentences):
    """Build a corpus whose token stream equals the given sentences."""
    names = {}

    def name(t):
        return names.setdefault(t, "w" + "abcdefghij"[t] * 2)

    text = " ".join(" ".join(name(t) for t in sent) + "." for sent in
                    token_sentences)
    corp = parse_corpus(text)
    vocab = build_vocabulary(corp)
    # first-occurrence order maps w_t back to token t iff tokens appear
    # in increasing first-use order; the fixtures below honor that
    return corp, vocab


def test_mcm_counts_hand_example():
    corp, vocab = _fit_tokens([[1, 2, 1, 3, 1, 2]])
    tm = mcm_fit(corp, vocab)
    # successors of token 1: 2, 3, 2 -> P(2|1)=2/3, P(3|1)=1/3
    assert tm.matrix[1, 2] == pytest.approx(2 / 3)
    assert tm.matrix[1, 3] == pytest.approx(1 / 3)
    assert mcm_predict(tm, 1) == 2


def test_mcm_rows_are_distributions():
    text = generate_text(SyntheticConfig(num_sentences=150, seed=21))
    corp = parse_corpus(text)
    vocab = build_vocabulary(corp)
    tm = mcm_fit(corp, vocab)
    sums = tm.matrix[1:, :].sum(axis=1)
    for s in sums:
        assert s == pytest.approx(1.0) or s == 0.0


def test_mcm_brute_force_oracle():
    # independent oracle: dict-of-counters bigram scan
    text = generate_text(SyntheticConfig(num_sentences=200, seed=13))
    corp = parse_corpus(text)
    assert sum(len(s) for s in corp.sentences) >= 1000
    vocab = build_vocabulary(corp)
    tm = mcm_fit(corp, vocab)

    counts: dict[int, dict[int, int]] = {}
    for sent in corp.sentences:
        toks = [vocab.token(w) for w in sent]
        for a, b in zip(toks, toks[1:]):
            counts.setdefault(a, {})[b] = counts.setdefault(a, {}).get(b, 0) + 1
    for t in range(1, vocab.size + 1):
        succ = counts.get(t)
        want = None
        if succ:
            best = max(succ.values())
            want = min(b for b, c in succ.items() if c == best)
        assert mcm_predict(tm, t) == want


def test_mcm_tie_breaks_to_smallest_token():
    corp, vocab = _fit_tokens([[1, 2, 1, 3]])
    tm = mcm_fit(corp, vocab)
    assert mcm_predict(tm, 1) == 2  # 2 and 3 tie with one count each


def test_mcm_unseen_row_predicts_none():
    corp, vocab = _fit_tokens([[1, 2]])
    tm = mcm_fit(corp, vocab)
    assert mcm_predict(tm, 2) is None  # token 2 never has a successor


def test_mcm_out_of_range_raises():
    corp, vocab = _fit_tokens([[1, 2]])
    tm = mcm_fit(corp, vocab)
    with pytest.raises(ValueError):
        mcm_predict(tm, 0)
    with pytest.raises(ValueError):
        mcm_predict(tm, 99)


def test_mcm_bigrams_do_not_cross_sentences():
    corp, vocab = _fit_tokens([[1, 2], [3, 4]])
    tm = mcm_fit(corp, vocab)
    assert tm.matrix[2, 3] == 0.0


# ---------------------------------------------------------------- SLM


def test_slm_memorizes_distinct_sentences(memor_corpus, memor_vocab,
                                          memor_slm):
    # distinct first words make every continuation unambiguous
    hits = total = 0
    for sent in memor_corpus.sentences:
        toks = [memor_vocab.token(w) for w in sent]
        for p in range(1, len(toks)):
            hits += (slm_predict(memor_slm, toks[:p], 25) == toks[p])
            total += 1
    assert hits == total


def test_slm_probabilities_normalized(memor_slm, memor_vocab, rng):
    for _ in range(100):
        n = int(rng.integers(1, 6))
        ctx = rng.integers(1, memor_vocab.size + 1, size=n).tolist()
        probs = memor_slm.forward(ctx)
        assert probs.shape == (memor_vocab.size,)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert (probs >= 0).all()


def test_slm_short_context_equals_padded(memor_slm):
    ctx = [1, 2]
    a = slm_predict(memor_slm, ctx, 10)
    b = slm_predict(memor_slm, [0, 0, 0] + ctx, 10)
    assert a == b


def test_slm_l_context_truncates(memor_slm, memor_vocab):
    long_ctx = [1, 2, 3, 1, 2]
    assert slm_predict(memor_slm, long_ctx, 2) == slm_predict(
        memor_slm, long_ctx[-2:], 2)


def test_slm_empty_context_raises(memor_slm):
    with pytest.raises(ValueError):
        slm_predict(memor_slm, [], 10)


def test_slm_deterministic_same_seed(memor_corpus, memor_vocab):
    data = build_ngram_dataset(memor_corpus, memor_vocab)
    cfg = TrainingConfig(epochs=3, batch_size=8, hidden=12, n_embed=8, seed=5)
    m1 = slm_train(data, cfg, memor_vocab.size, "h")
    m2 = slm_train(data, cfg, memor_vocab.size, "h")
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])
    assert m1.loss_history == m2.loss_history


def test_slm_different_seeds_differ(memor_corpus, memor_vocab):
    data = build_ngram_dataset(memor_corpus, memor_vocab)
    cfg5 = TrainingConfig(epochs=2, batch_size=8, hidden=12, n_embed=8, seed=5)
    cfg6 = TrainingConfig(epochs=2, batch_size=8, hidden=12, n_embed=8, seed=6)
    m1 = slm_train(data, cfg5, memor_vocab.size, "h")
    m2 = slm_train(data, cfg6, memor_vocab.size, "h")
    assert not np.array_equal(m1.params["emb"], m2.params["emb"])


def test_slm_loss_decreases(memor_slm):
    hist = memor_slm.loss_history
    assert hist[-1] < hist[0]
    assert hist[-1] < 0.2


def test_slm_embedding_pad_row_stays_zero(memor_slm):
    assert np.allclose(memor_slm.params["emb"][0], 0.0)


def test_slm_embedding_table_excludes_pad(memor_slm, memor_vocab):
    table = memor_slm.embedding_table
    assert table.size == memor_vocab.size
    assert table.vectors.shape[0] == memor_vocab.size + 1


def test_slm_gradient_check_small_models(memor_corpus, memor_vocab):
    data = build_ngram_dataset(memor_corpus, memor_vocab)
    for seed in (0, 1):
        cfg = TrainingConfig(epochs=1, batch_size=8, hidden=6, n_embed=5,
                             seed=seed)
        model = slm_train(data, cfg, memor_vocab.size, "h")
        err = slm_gradient_check(model, data.inputs[:4], data.labels[:4])
        assert err < 1e-3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_slm_divergence_raises(memor_corpus, memor_vocab):
    # a step size past float range overflows the weight products
    data = build_ngram_dataset(memor_corpus, memor_vocab)
    cfg = TrainingConfig(epochs=5, batch_size=4, learning_rate=1e200,
                         hidden=8, n_embed=8, seed=0, clip_norm=1e300)
    with pytest.raises(TrainingDivergedError):
        slm_train(data, cfg, memor_vocab.size, "h")


# ------------------------------------------------------ wrapper classes


def test_neural_predictor_predicts_from_context(memor_corpus, memor_vocab,
                                                memor_slm):
    pred = NeuralPredictor(memor_slm, memor_vocab, l_context=10)
    pred.reset()
    sent = memor_corpus.sentences[0]
    pred.observe(sent[0])
    pred.observe(sent[1])
    assert pred.predict() == sent[2]


def test_neural_predictor_skips_oov_words(memor_corpus, memor_vocab,
                                          memor_slm):
    pred = NeuralPredictor(memor_slm, memor_vocab, l_context=10)
    pred.reset()
    sent = memor_corpus.sentences[0]
    pred.observe(sent[0])
    pred.observe("notaword")
    pred.observe(sent[1])
    assert pred.predict() == sent[2]


def test_neural_predictor_empty_context_predicts_none(memor_slm, memor_vocab):
    pred = NeuralPredictor(memor_slm, memor_vocab, l_context=10)
    pred.reset()
    assert pred.predict() is None
    pred.observe("notaword")
    assert pred.predict() is None


def test_markov_predictor_wraps_matrix(memor_corpus, memor_vocab):
    tm = mcm_fit(memor_corpus, memor_vocab)
    pred = MarkovPredictor(tm, memor_vocab)
    pred.reset()
    sent = memor_corpus.sentences[0]
    pred.observe(sent[0])
    got = pred.predict()
    want = mcm_predict(tm, memor_vocab.token(sent[0]))
    assert memor_vocab.token(got) == want


def test_markov_predictor_oov_context_predicts_none(memor_corpus,
                                                    memor_vocab):
    tm = mcm_fit(memor_corpus, memor_vocab)
    pred = MarkovPredictor(tm, memor_vocab)
    pred.reset()
    pred.observe("notaword")
    assert pred.predict() is None


def test_predictor_names(memor_corpus, memor_vocab, memor_slm):
    assert NeuralPredictor(memor_slm, memor_vocab, 5).name == "slm"
    assert MarkovPredictor(mcm_fit(memor_corpus, memor_vocab),
                           memor_vocab).name == "mcm"
