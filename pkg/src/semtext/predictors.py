"""Next-word predictors: bigram Markov chain and the neural sequence model.

Both predictors sit behind one stateful interface (reset / observe /
predict) so the transmission policies do not care which one is running.
The neural model is an embedding layer feeding a bidirectional LSTM whose
final states drive a dense softmax over the vocabulary; training minimizes
cross-entropy over all left-zero-padded sentence prefixes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import pairwise

import numpy as np

from . import nn, serialize
from .corpus import Corpus, TrainingSet, Vocabulary
from .similarity import EmbeddingTable


from .nn import TrainingDivergedError  # noqa: F401  (part of this module's API)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.01
    hidden: int = 64
    n_embed: int = 64
    bidirectional: bool = True
    clip_norm: float = 5.0
    seed: int = 0


# ---------------------------------------------------------------------------
# Markov chain model


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row i holds the relative successor frequencies of token i.

    Stored (U+1, U+1) so tokens index directly; row and column 0 belong to
    the padding token and stay zero.
    """
    matrix: np.ndarray
    vocab_hash: str = ""

    @property
    def rows(self) -> np.ndarray:
        return self.matrix[1:, 1:]


def mcm_fit(corpus: Corpus, vocab: Vocabulary) -> TransitionMatrix:
    """Bigram relative frequencies counted within sentences only."""
    size = vocab.size + 1
    counts = np.zeros((size, size), dtype=np.float64)
    for sentence in corpus.sentences:
        tokens = [vocab.word_to_token[w] for w in sentence]
        for a, b in pairwise(tokens):
            counts[a, b] += 1.0
    sums = counts.sum(axis=1, keepdims=True)
    nonzero = sums[:, 0] > 0
    counts[nonzero] /= sums[nonzero]
    fingerprint = serialize.vocab_fingerprint(vocab.words_in_token_order())
    return TransitionMatrix(counts, fingerprint)


def mcm_predict(m: TransitionMatrix, last: int) -> int | None:
    """Argmax successor of `last`; smallest token wins ties; None if the
    row has no observed successor."""
    if not 1 <= last < m.matrix.shape[0]:
        raise ValueError(f"token out of range: {last}")
    row = m.matrix[last, 1:]
    if not row.any():
        return None
    return int(np.argmax(row)) + 1


# ---------------------------------------------------------------------------
# Neural sequence model


@dataclass(eq=False)
class NeuralSLM:
    """Embedding + (bi)LSTM + dense softmax over tokens 1..U.

    params keys: emb (U+1, N); fwd_wx/fwd_wh/fwd_b (and bwd_* when
    bidirectional); dense_w ((2)H, U); dense_b (U).  Class c of the softmax
    corresponds to token c+1.
    """
    params: dict[str, np.ndarray]
    cfg: TrainingConfig
    m_max: int
    vocab_hash: str = ""
    loss_history: list[float] = field(default_factory=list)

    @property
    def vocab_size(self) -> int:
        return int(self.params["dense_b"].shape[0])

    @property
    def embedding_table(self) -> EmbeddingTable:
        return EmbeddingTable(self.params["emb"])

    def forward(self, tokens) -> np.ndarray:
        """Class probabilities for one context (1D) or a batch (2D)."""
        arr = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        probs, _ = _forward_batch(self.params, arr, self.cfg.bidirectional)
        return probs[0] if np.asarray(tokens).ndim == 1 else probs


def _gate_params(params: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    return {"wx": params[f"{prefix}_wx"], "wh": params[f"{prefix}_wh"],
            "b": params[f"{prefix}_b"]}


def _forward_batch(params, tokens: np.ndarray, bidirectional: bool):
    mask = (tokens != 0).astype(nn.DTYPE)
    x = params["emb"][tokens]
    h_f, cache_f = nn.lstm_forward(x, mask, _gate_params(params, "fwd"))
    feats = [h_f[:, -1]]
    cache_b = None
    if bidirectional:
        h_b, cache_b = nn.lstm_forward(x[:, ::-1], mask[:, ::-1],
                                       _gate_params(params, "bwd"))
        feats.append(h_b[:, -1])
    h = np.concatenate(feats, axis=1)
    logits = h @ params["dense_w"] + params["dense_b"]
    probs = nn.softmax(logits)
    cache = (tokens, mask, h, cache_f, cache_b)
    return probs, cache


def _backward_batch(params, probs, labels_cls: np.ndarray, cache, bidirectional):
    tokens, mask, h, cache_f, cache_b = cache
    bsz, steps = tokens.shape
    hidden = params["fwd_wh"].shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(bsz), labels_cls] -= 1.0
    dlogits /= bsz
    grads = {
        "dense_w": h.T @ dlogits,
        "dense_b": dlogits.sum(axis=0),
    }
    dh = dlogits @ params["dense_w"].T
    dh_all = np.zeros((bsz, steps, hidden), dtype=nn.DTYPE)
    dh_all[:, -1] = dh[:, :hidden]
    dx, g_f = nn.lstm_backward(dh_all, cache_f, _gate_params(params, "fwd"))
    for k, v in g_f.items():
        grads[f"fwd_{k}"] = v
    if bidirectional:
        dh_all_b = np.zeros_like(dh_all)
        dh_all_b[:, -1] = dh[:, hidden:]
        dx_b, g_b = nn.lstm_backward(dh_all_b, cache_b, _gate_params(params, "bwd"))
        for k, v in g_b.items():
            grads[f"bwd_{k}"] = v
        dx = dx + dx_b[:, ::-1]
    demb = np.zeros_like(params["emb"])
    np.add.at(demb, tokens.reshape(-1),
              dx.reshape(-1, dx.shape[-1]))
    demb[0] = 0.0  # padding row is pinned at zero
    grads["emb"] = demb
    return grads


def _init_params(vocab_size: int, cfg: TrainingConfig,
                 rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {"emb": rng.uniform(-0.05, 0.05,
                                 size=(vocab_size + 1, cfg.n_embed)).astype(nn.DTYPE)}
    params["emb"][0] = 0.0
    directions = ["fwd", "bwd"] if cfg.bidirectional else ["fwd"]
    for d in directions:
        gates = nn.init_lstm_params(cfg.n_embed, cfg.hidden, rng)
        for k, v in gates.items():
            params[f"{d}_{k}"] = v
    feat = cfg.hidden * len(directions)
    params["dense_w"] = rng.uniform(-0.08, 0.08, size=(feat, vocab_size)).astype(nn.DTYPE)
    params["dense_b"] = np.zeros(vocab_size, dtype=nn.DTYPE)
    return params


def slm_train(data: TrainingSet, cfg: TrainingConfig, vocab_size: int,
              vocab_hash: str = "") -> NeuralSLM:
    """Adam training over all prefix samples; deterministic under cfg.seed.

    Batches are grouped by effective prefix length so the shared left
    padding can be sliced off (exact under state-carrying masking, and much
    cheaper than running the LSTM over columns that are padding for the
    whole batch).
    """
    if data.num_samples == 0:
        raise ValueError("empty training set")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = _init_params(vocab_size, cfg, rng)
    opt = nn.Adam(params, lr=cfg.learning_rate)
    inputs = data.inputs
    labels_cls = data.labels - 1
    lengths = (inputs != 0).sum(axis=1)
    order = np.argsort(lengths, kind="stable")
    batches = [order[i:i + cfg.batch_size]
               for i in range(0, len(order), cfg.batch_size)]
    width = inputs.shape[1]
    history: list[float] = []
    for _ in range(cfg.epochs):
        total = 0.0
        for bi in rng.permutation(len(batches)):
            idx = batches[bi]
            t0 = width - int(lengths[idx].max())
            tok = inputs[idx][:, t0:]
            lab = labels_cls[idx]
            probs, cache = _forward_batch(params, tok, cfg.bidirectional)
            loss = nn.cross_entropy(probs, lab)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss}")
            total += loss * len(idx)
            grads = _backward_batch(params, probs, lab, cache, cfg.bidirectional)
            nn.clip_gradients(grads, cfg.clip_norm)
            opt.step(grads)
        history.append(total / data.num_samples)
    return NeuralSLM(params, cfg, data.m_max, vocab_hash, history)


def slm_predict(model: NeuralSLM, context: list[int], l_context: int) -> int:
    """Argmax next token from the last l_context tokens, left-zero-padded
    to the training width; smallest token wins ties."""
    if not context:
        raise ValueError("empty context: a seed text must precede prediction")
    if l_context < 1:
        raise ValueError("l_context must be >= 1")
    width = model.m_max - 1
    tail = list(context[-min(l_context, width):])
    row = np.zeros((1, width), dtype=np.int64)
    row[0, width - len(tail):] = tail
    probs = model.forward(row)
    return int(np.argmax(probs[0])) + 1


def slm_gradient_check(model: NeuralSLM, tokens: np.ndarray,
                       labels: np.ndarray, step: float = 1e-4) -> float:
    """Max relative error of the analytic gradients against central finite
    differences on one batch; meant for tiny models."""
    labels_cls = labels - 1

    def loss_fn() -> float:
        probs, _ = _forward_batch(model.params, tokens, model.cfg.bidirectional)
        return nn.cross_entropy(probs, labels_cls)

    probs, cache = _forward_batch(model.params, tokens, model.cfg.bidirectional)
    analytic = _backward_batch(model.params, probs, labels_cls, cache,
                               model.cfg.bidirectional)
    return nn.gradient_check(loss_fn, model.params, analytic, step)


# ---------------------------------------------------------------------------
# The stateful interface the policies consume


class NeuralPredictor:
    """Tracks the destination token stream; out-of-vocabulary words carry
    no token and are skipped in the context."""

    name = "slm"

    def __init__(self, model: NeuralSLM, vocab: Vocabulary, l_context: int):
        self.model = model
        self.vocab = vocab
        self.l_context = l_context
        self.vocab_hash = model.vocab_hash
        self._tokens: list[int] = []

    def reset(self) -> None:
        self._tokens = []

    def observe(self, word: str) -> None:
        token = self.vocab.token(word)
        if token is not None:
            self._tokens.append(token)
            cap = max(self.l_context, self.model.m_max)
            if len(self._tokens) > cap:
                del self._tokens[:-cap]

    def predict(self) -> str | None:
        if not self._tokens:
            return None
        token = slm_predict(self.model, self._tokens, self.l_context)
        return self.vocab.word(token)


class MarkovPredictor:
    """Predicts from the literal previous word; None when that word is
    unknown or has no observed successor."""

    name = "mcm"

    def __init__(self, matrix: TransitionMatrix, vocab: Vocabulary):
        self.matrix = matrix
        self.vocab = vocab
        self.vocab_hash = matrix.vocab_hash
        self._last: str | None = None

    def reset(self) -> None:
        self._last = None

    def observe(self, word: str) -> None:
        self._last = word

    def predict(self) -> str | None:
        if self._last is None:
            return None
        token = self.vocab.token(self._last)
        if token is None:
            return None
        nxt = mcm_predict(self.matrix, token)
        return None if nxt is None else self.vocab.word(nxt)


# ---------------------------------------------------------------------------
# Serialization


def save_slm(model: NeuralSLM, vocab: Vocabulary, path: str) -> None:
    config = asdict(model.cfg) | {"m_max": model.m_max}
    meta = {"vocab_words": vocab.words_in_token_order(),
            "loss_history": model.loss_history}
    serialize.save_model(path, "neural_slm", config, model.vocab_hash,
                         model.params, meta)


def load_slm(path: str) -> tuple[NeuralSLM, Vocabulary]:
    mf = serialize.load_model(path)
    if mf.kind != "neural_slm":
        raise serialize.ModelFormatError(f"expected neural_slm, got {mf.kind!r}")
    config = dict(mf.config)
    m_max = config.pop("m_max")
    cfg = TrainingConfig(**config)
    model = NeuralSLM(dict(mf.tensors), cfg, m_max, mf.vocab_hash,
                      list(mf.meta.get("loss_history", [])))
    return model, _vocab_from_words(mf.meta["vocab_words"])


def save_mcm(matrix: TransitionMatrix, vocab: Vocabulary, path: str) -> None:
    meta = {"vocab_words": vocab.words_in_token_order()}
    serialize.save_model(path, "markov_chain", {}, matrix.vocab_hash,
                         {"matrix": matrix.matrix}, meta)


def load_mcm(path: str) -> tuple[TransitionMatrix, Vocabulary]:
    mf = serialize.load_model(path)
    if mf.kind != "markov_chain":
        raise serialize.ModelFormatError(f"expected markov_chain, got {mf.kind!r}")
    matrix = TransitionMatrix(mf.tensors["matrix"], mf.vocab_hash)
    return matrix, _vocab_from_words(mf.meta["vocab_words"])


def _vocab_from_words(words: list[str]) -> Vocabulary:
    word_to_token = {w: i + 1 for i, w in enumerate(words)}
    return Vocabulary(word_to_token, {i + 1: w for i, w in enumerate(words)})
