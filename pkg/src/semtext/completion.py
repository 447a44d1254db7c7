"""Character-level word completion and erasure repair.

A unidirectional LSTM over one-hot characters is trained to predict the
next character at every position of a sliding window over the corpus
character stream.  At inference the model state is primed on the last W
characters of the available context and then advanced one character at a
time: greedy argmax completion of a transmitted prefix, in-place repair of
erased characters, and the minimal-prefix search the threshold policy uses
to decide how many characters a word actually needs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn, serialize
from .channel import ERASURE_MARK
from .corpus import ALPHABET, DELIMITERS, Corpus, build_vocabulary
from .nn import TrainingDivergedError


@dataclass(frozen=True)
class CharTrainingConfig:
    window: int = 100
    hidden: int = 128
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 0.005
    clip_norm: float = 5.0
    # Stride 1 trains on every window position; desk-scale configs may
    # subsample positions to trade accuracy for training time.
    stride: int = 1
    seed: int = 0


@dataclass(frozen=True)
class CompletionResult:
    word: str
    chars_predicted: int


@dataclass(eq=False)
class CharModel:
    """params keys: lstm_wx (V, 4H), lstm_wh (H, 4H), lstm_b (4H,),
    dense_w (H, V), dense_b (V,)."""
    params: dict[str, np.ndarray]
    cfg: CharTrainingConfig
    alphabet: str = ALPHABET
    max_word_len: int = 0
    vocab_hash: str = ""
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self._index = {ch: i for i, ch in enumerate(self.alphabet)}

    @property
    def vocab_size(self) -> int:
        return len(self.alphabet)

    def char_class(self, ch: str) -> int:
        return self._index[ch]

    # -- state handling -----------------------------------------------------

    def zero_state(self, batch: int = 1):
        hidden = self.params["lstm_wh"].shape[0]
        return (np.zeros((batch, hidden), dtype=nn.DTYPE),
                np.zeros((batch, hidden), dtype=nn.DTYPE))

    def prime(self, texts: list[str]):
        """Run the recurrence over the tail-W window of each text (from the
        zero state) and return the batched final (h, c)."""
        window = self.cfg.window
        tails = [t[-window:] for t in texts]
        width = max(len(t) for t in tails)
        batch = len(tails)
        vocab = self.vocab_size
        x = np.zeros((batch, width, vocab), dtype=nn.DTYPE)
        mask = np.zeros((batch, width), dtype=nn.DTYPE)
        for r, tail in enumerate(tails):
            off = width - len(tail)
            for j, ch in enumerate(tail):
                x[r, off + j, self._index[ch]] = 1.0
            mask[r, off:] = 1.0
        lstm = _lstm_params(self.params)
        h_all, cache = nn.lstm_forward(x, mask, lstm)
        return h_all[:, -1], _final_cell_state(cache, lstm)

    def step(self, state, chars: list[str]):
        h, c = state
        x = np.zeros((len(chars), self.vocab_size), dtype=nn.DTYPE)
        for r, ch in enumerate(chars):
            x[r, self._index[ch]] = 1.0
        return nn.lstm_step(h, c, x, _lstm_params(self.params))

    def next_logits(self, state) -> np.ndarray:
        h, _ = state
        return h @ self.params["dense_w"] + self.params["dense_b"]

    def next_chars(self, state) -> list[str]:
        logits = self.next_logits(state)
        return [self.alphabet[int(i)] for i in np.argmax(logits, axis=1)]


def _lstm_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {"wx": params["lstm_wx"], "wh": params["lstm_wh"], "b": params["lstm_b"]}


def _final_cell_state(cache, lstm):
    # lstm_forward returns h only; recover the final c from its cache.
    _, mask, gates, c_prev_all, _, _ = cache
    hidden = lstm["wh"].shape[0]
    i = gates[:, -1, :hidden]
    f = gates[:, -1, hidden:2 * hidden]
    g = gates[:, -1, 2 * hidden:3 * hidden]
    c_prev = c_prev_all[:, -1]
    m = mask[:, -1:]
    return m * (f * c_prev + i * g) + (1.0 - m) * c_prev


def char_train(corpus: Corpus, cfg: CharTrainingConfig) -> CharModel:
    """Next-character training over sliding windows of the corpus stream."""
    text = corpus.raw_text
    window = cfg.window
    if len(text) <= window + 1:
        raise ValueError(f"corpus stream ({len(text)} chars) must exceed window+1")
    index = {ch: i for i, ch in enumerate(ALPHABET)}
    stream = np.array([index[ch] for ch in text], dtype=np.int64)
    starts = np.arange(0, len(text) - window, cfg.stride)
    vocab = len(ALPHABET)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    lstm_init = nn.init_lstm_params(vocab, cfg.hidden, rng)
    params = {f"lstm_{k}": v for k, v in lstm_init.items()}
    params["dense_w"] = rng.uniform(-0.08, 0.08, size=(cfg.hidden, vocab)).astype(nn.DTYPE)
    params["dense_b"] = np.zeros(vocab, dtype=nn.DTYPE)
    opt = nn.Adam(params, lr=cfg.learning_rate)
    eye = np.eye(vocab, dtype=nn.DTYPE)
    history: list[float] = []
    lstm = _lstm_params(params)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(starts))
        total = 0.0
        count = 0
        for i in range(0, len(order), cfg.batch_size):
            idx = starts[order[i:i + cfg.batch_size]]
            pos = idx[:, None] + np.arange(window)[None, :]
            tok_in = stream[pos]
            tok_out = stream[pos + 1]
            x = eye[tok_in]
            h_all, cache = nn.lstm_forward(x, None, lstm)
            logits = h_all @ params["dense_w"] + params["dense_b"]
            probs = nn.softmax(logits)
            flat = probs.reshape(-1, vocab)
            labels = tok_out.reshape(-1)
            loss = nn.cross_entropy(flat, labels)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss}")
            total += loss * len(idx)
            count += len(idx)
            dlogits = flat.copy()
            dlogits[np.arange(len(labels)), labels] -= 1.0
            dlogits /= len(labels)
            dlogits = dlogits.reshape(logits.shape)
            grads = {
                "dense_w": np.einsum("bth,btv->hv", h_all, dlogits),
                "dense_b": dlogits.sum(axis=(0, 1)),
            }
            dh_all = dlogits @ params["dense_w"].T
            _, lstm_grads = nn.lstm_backward(dh_all, cache, lstm)
            for k, v in lstm_grads.items():
                grads[f"lstm_{k}"] = v
            nn.clip_gradients(grads, cfg.clip_norm)
            opt.step(grads)
        history.append(total / count)
    max_word_len = max(len(w) for s in corpus.sentences for w in s)
    word_vocab = build_vocabulary(corpus)
    vocab_hash = serialize.vocab_fingerprint(word_vocab.words_in_token_order())
    return CharModel(params, cfg, ALPHABET, max_word_len, vocab_hash, history)


def complete_word(model: CharModel, context: str, prefix: str) -> CompletionResult:
    """Greedy argmax continuation of prefix until a delimiter is emitted or
    the word reaches the longest training word length."""
    if not context and not prefix:
        raise ValueError("context + prefix must be nonempty")
    state = model.prime([context + prefix])
    word = prefix
    predicted = 0
    while len(word) < model.max_word_len:
        ch = model.next_chars(state)[0]
        if ch in DELIMITERS:
            break
        word += ch
        predicted += 1
        state = model.step(state, [ch])
    return CompletionResult(word, predicted)


def fill_erasures(model: CharModel, context: str, damaged: str) -> str:
    """Replace each erasure mark with the argmax next character given
    everything to its left; non-erased characters pass through unchanged."""
    if not damaged:
        return damaged
    state = model.prime([context]) if context else model.zero_state(1)
    out: list[str] = []
    for ch in damaged:
        if ch == ERASURE_MARK:
            ch = model.next_chars(state)[0]
        out.append(ch)
        state = model.step(state, [ch])
    return "".join(out)


def minimal_prefix(model: CharModel, context: str, target: str,
                   min_k: int = 0) -> int:
    """Smallest k >= min_k with complete_word(context, target[:k]).word ==
    target; len(target) when no shorter prefix completes correctly.

    The transmission policy passes min_k = 1: a zero-character prefix cannot
    be transmitted, and because the priming window slides with the prefix,
    completability at k is not monotone in k, so the constraint must enter
    the search rather than be applied after it.

    All candidate prefixes are primed as one batch and generated together;
    the winning k is re-verified with the canonical single-row path (batched
    and single-row BLAS reductions may round differently on near-ties).
    """
    if not target:
        raise ValueError("target must be nonempty")
    # k = 0 with an empty context cannot be primed; start the scan at 1 then.
    first_k = max(min_k, 0 if context else 1)
    ks = list(range(first_k, len(target)))
    if not ks:
        return len(target)
    texts = [context + target[:k] for k in ks]
    words = _generate_against_target(model, texts, [target[:k] for k in ks], target)
    for pos, k in enumerate(ks):
        if words[pos] == target:
            if complete_word(model, context, target[:k]).word == target:
                return k
            # Rounding disagreement: fall back to the sequential scan.
            for k2 in range(k + 1, len(target)):
                if complete_word(model, context, target[:k2]).word == target:
                    return k2
            return len(target)
    return len(target)


def _generate_against_target(model: CharModel, texts: list[str],
                             prefixes: list[str], target: str) -> list[str]:
    """Batched greedy generation with early cutoff: a row stops as soon as
    its word can no longer equal the target, which does not change the
    outcome of the equality test against complete_word."""
    state = model.prime(texts)
    words = list(prefixes)
    # None = still generating; True/False = settled outcome.
    settled: list[bool | None] = [
        (w == target) if len(w) >= model.max_word_len else None for w in words]
    while any(s is None for s in settled):
        active = [r for r, s in enumerate(settled) if s is None]
        h, c = state
        sub = (h[active], c[active])
        chars = model.next_chars(sub)
        feed = [""] * len(words)
        for ch, r in zip(chars, active):
            if ch in DELIMITERS:
                settled[r] = words[r] == target
                continue
            words[r] += ch
            if not target.startswith(words[r]):
                settled[r] = False
            elif len(words[r]) >= model.max_word_len:
                settled[r] = words[r] == target
            else:
                feed[r] = ch
        rows = [r for r in active if feed[r]]
        if rows:
            h_new, c_new = model.step((h[rows], c[rows]), [feed[r] for r in rows])
            h[rows] = h_new
            c[rows] = c_new
        state = (h, c)
    return [w if ok else "" for w, ok in zip(words, [s is True for s in settled])]


def char_gradient_check(model: CharModel, text: str, step: float = 1e-4) -> float:
    """Finite-difference validation of the character model's gradients on
    one window batch; meant for tiny models."""
    index = {ch: i for i, ch in enumerate(model.alphabet)}
    vocab = model.vocab_size
    tok = np.array([[index[ch] for ch in text]], dtype=np.int64)
    x = np.eye(vocab, dtype=nn.DTYPE)[tok[:, :-1]]
    labels = tok[:, 1:].reshape(-1)
    lstm = _lstm_params(model.params)

    def forward():
        h_all, cache = nn.lstm_forward(x, None, lstm)
        logits = h_all @ model.params["dense_w"] + model.params["dense_b"]
        probs = nn.softmax(logits)
        return probs.reshape(-1, vocab), h_all, cache

    def loss_fn() -> float:
        flat, _, _ = forward()
        return nn.cross_entropy(flat, labels)

    flat, h_all, cache = forward()
    dlogits = flat.copy()
    dlogits[np.arange(len(labels)), labels] -= 1.0
    dlogits /= len(labels)
    dlogits = dlogits.reshape(h_all.shape[0], h_all.shape[1], vocab)
    grads = {
        "dense_w": np.einsum("bth,btv->hv", h_all, dlogits),
        "dense_b": dlogits.sum(axis=(0, 1)),
    }
    dh_all = dlogits @ model.params["dense_w"].T
    _, lstm_grads = nn.lstm_backward(dh_all, cache, lstm)
    for k, v in lstm_grads.items():
        grads[f"lstm_{k}"] = v
    return nn.gradient_check(loss_fn, model.params, grads, step)


def save_char_model(model: CharModel, path: str) -> None:
    config = asdict(model.cfg) | {"alphabet": model.alphabet,
                                  "max_word_len": model.max_word_len}
    meta = {"loss_history": model.loss_history}
    serialize.save_model(path, "char_completion", config, model.vocab_hash,
                         model.params, meta)


def load_char_model(path: str) -> CharModel:
    mf = serialize.load_model(path)
    if mf.kind != "char_completion":
        raise serialize.ModelFormatError(f"expected char_completion, got {mf.kind!r}")
    config = dict(mf.config)
    alphabet = config.pop("alphabet")
    max_word_len = config.pop("max_word_len")
    cfg = CharTrainingConfig(**config)
    return CharModel(dict(mf.tensors), cfg, alphabet, max_word_len,
                     mf.vocab_hash, list(mf.meta.get("loss_history", [])))
