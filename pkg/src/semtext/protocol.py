"""End-to-end transmission sessions under the threshold and periodic policies.

A session walks the test word stream once.  Under the threshold policy (TP)
the source runs a synchronized replica of the destination's models, skips a
word when the destination's prediction is similar enough, and otherwise
sends the minimal completable prefix (or the full word).  Under the
periodic policy (PP) every tau-th post-seed word is sent in full and the
rest are predicted at the destination with no feedback.

The simulation keeps one copy of the destination context and lets the
source read it directly: under a noiseless channel the replica is exact by
construction, and under erasures the per-word error-free acknowledgement
re-synchronizes the replica after every word, so a single shared state is
faithful.  Feedback bits are not counted in the cost.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .channel import ERASURE_MARK, Channel, ChannelConfig, CharUnit
from .coding import HuffmanCodebook, decode, encode_word
from .completion import CharModel, complete_word, fill_erasures, minimal_prefix
from .corpus import Corpus, Vocabulary
from .similarity import EmbeddingTable, word_similarity

BITS_PER_CHAR = 8


class ConfigMismatchError(ValueError):
    """Raised when models trained on different vocabularies are combined."""


@dataclass(frozen=True)
class PolicyConfig:
    kind: str  # "TP" or "PP"
    threshold: float | None = None
    period: int | None = None
    seed_words: int = 1

    def __post_init__(self):
        if self.kind == "TP":
            if self.threshold is None or not 0.0 <= self.threshold <= 1.0:
                raise ValueError("TP requires a threshold in [0, 1]")
            if self.period is not None:
                raise ValueError("TP takes no period")
        elif self.kind == "PP":
            if self.period is None or self.period < 1:
                raise ValueError("PP requires a period >= 1")
            if self.threshold is not None:
                raise ValueError("PP takes no threshold")
        else:
            raise ValueError(f"unknown policy kind: {self.kind!r}")
        if self.seed_words < 1:
            raise ValueError("seed_words must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    index: int
    word: str
    char_count: int
    decision: str        # "skip" | "prefix" | "full"
    prefix_len: int      # transmitted characters (0 when skipped)
    bits_sent: int
    full_cost_bits: int  # cost of the whole word under the active codec
    estimate: str | None
    similarity: float
    mechanism: str       # "WP" | "WC" | "FULL" | "SEED"


@dataclass(frozen=True)
class TransmissionTrace:
    records: tuple[TraceRecord, ...]
    bits_per_char: int
    predict_seconds: tuple[float, ...]


@dataclass(frozen=True)
class Metrics:
    cbar: float
    sbar: float
    pct_wp: float
    pct_wc: float
    t_avg_ms: float


def flatten_corpus(corpus: Corpus) -> tuple[list[str], list[str]]:
    """Word stream plus the free delimiter that follows each word, mirroring
    the raw_text layout (space inside a sentence, terminator at its end)."""
    words: list[str] = []
    delims: list[str] = []
    for sentence, term in zip(corpus.sentences, corpus.terminators):
        for i, w in enumerate(sentence):
            words.append(w)
            delims.append(term + " " if i == len(sentence) - 1 else " ")
    if delims:
        delims[-1] = delims[-1].rstrip()
    return words, delims


class _Codec:
    """Uniform b-bit characters or per-character Huffman codewords."""

    def __init__(self, book: HuffmanCodebook | None, bits_per_char: int):
        self.book = book
        self.b = bits_per_char

    def units(self, text: str) -> list[CharUnit]:
        if self.book is None:
            return [CharUnit(ch, self.b) for ch in text]
        return [CharUnit(bits, len(bits)) for bits in encode_word(self.book, text)]

    def chars(self, received: list[CharUnit]) -> str:
        if self.book is None:
            return "".join(u.payload for u in received)
        return decode(self.book, [u.payload for u in received])

    def cost(self, text: str) -> int:
        return sum(u.bits for u in self.units(text))


def run_session(test: Corpus, predictor, char_model: CharModel | None,
                codebook: HuffmanCodebook | None, channel_cfg: ChannelConfig,
                policy: PolicyConfig, vocab: Vocabulary, table: EmbeddingTable,
                bits_per_char: int = BITS_PER_CHAR) -> TransmissionTrace:
    _check_vocab_hashes(predictor, char_model)
    words, delims = flatten_corpus(test)
    if policy.seed_words > len(words):
        raise ValueError("seed_words exceeds the test stream length")
    codec = _Codec(codebook, bits_per_char)
    channel = Channel(channel_cfg)
    predictor.reset()
    dest_text = ""
    records: list[TraceRecord] = []
    predict_seconds: list[float] = []

    def send(text: str) -> str:
        """Push text through the channel and return the received characters
        (erasure marks repaired by the completion model when available)."""
        received = codec.chars(channel.transmit(codec.units(text)))
        if ERASURE_MARK in received and char_model is not None:
            received = fill_erasures(char_model, dest_text, received)
        return received

    for n, (word, delim) in enumerate(zip(words, delims)):
        full_cost = codec.cost(word)
        if n < policy.seed_words:
            estimate = send(word)
            record = TraceRecord(n, word, len(word), "full", len(word),
                                 full_cost, full_cost, estimate,
                                 word_similarity(word, estimate, vocab, table),
                                 "SEED")
        elif policy.kind == "TP":
            record = _tp_step(n, word, predictor, char_model, codec, channel,
                              policy.threshold, vocab, table, dest_text,
                              full_cost, send, predict_seconds)
        else:
            record = _pp_step(n, word, predictor, policy, vocab, table,
                              full_cost, send, predict_seconds)
        records.append(record)
        if record.estimate is not None:
            predictor.observe(record.estimate)
            dest_text += record.estimate + delim
    return TransmissionTrace(tuple(records), bits_per_char,
                             tuple(predict_seconds))


def _tp_step(n, word, predictor, char_model, codec, channel, threshold,
             vocab, table, dest_text, full_cost, send, predict_seconds):
    t0 = time.perf_counter()
    prediction = predictor.predict()
    predict_seconds.append(time.perf_counter() - t0)
    if prediction is not None:
        sim = word_similarity(word, prediction, vocab, table)
        if sim >= threshold:
            return TraceRecord(n, word, len(word), "skip", 0, 0, full_cost,
                               prediction, sim, "WP")
    if char_model is not None:
        # min_k = 1: a zero-character prefix cannot mark the word slot.
        k = minimal_prefix(char_model, dest_text, word, min_k=1)
    else:
        k = len(word)
    if word in vocab and k < len(word):
        prefix_rx = send(word[:k])
        estimate = complete_word(char_model, dest_text, prefix_rx).word
        bits = codec.cost(word[:k])
        return TraceRecord(n, word, len(word), "prefix", k, bits,
                           full_cost, estimate,
                           word_similarity(word, estimate, vocab, table), "WC")
    estimate = send(word)
    return TraceRecord(n, word, len(word), "full", len(word), full_cost,
                       full_cost, estimate,
                       word_similarity(word, estimate, vocab, table), "FULL")


def _pp_step(n, word, predictor, policy, vocab, table, full_cost, send,
             predict_seconds):
    post = n - policy.seed_words
    if post % policy.period == 0:
        estimate = send(word)
        return TraceRecord(n, word, len(word), "full", len(word), full_cost,
                           full_cost, estimate,
                           word_similarity(word, estimate, vocab, table),
                           "FULL")
    t0 = time.perf_counter()
    prediction = predictor.predict()
    predict_seconds.append(time.perf_counter() - t0)
    return TraceRecord(n, word, len(word), "skip", 0, 0, full_cost,
                       prediction,
                       word_similarity(word, prediction, vocab, table), "WP")


def _check_vocab_hashes(predictor, char_model) -> None:
    hashes = set()
    for obj in (predictor, char_model):
        h = getattr(obj, "vocab_hash", "")
        if h:
            hashes.add(h)
    if len(hashes) > 1:
        raise ConfigMismatchError("models were trained on different vocabularies")


def compute_metrics(trace: TransmissionTrace) -> Metrics:
    """Average cost against the uncompressed b-bit baseline, mean word
    similarity, savings attribution, and mean prediction latency."""
    if not trace.records:
        raise ValueError("empty trace")
    bits = sum(r.bits_sent for r in trace.records)
    baseline = sum(trace.bits_per_char * r.char_count for r in trace.records)
    sbar = sum(r.similarity for r in trace.records) / len(trace.records)
    pct_wp, pct_wc = attribute_savings(trace)
    t_avg = (sum(trace.predict_seconds) / len(trace.predict_seconds) * 1e3
             if trace.predict_seconds else 0.0)
    return Metrics(bits / baseline, sbar, pct_wp, pct_wc, t_avg)


def attribute_savings(trace: TransmissionTrace) -> tuple[float, float]:
    """Split the post-seed bit savings between word prediction (skips) and
    word completion (prefix transmissions), as percentages of the total."""
    wp = 0
    wc = 0
    for r in trace.records:
        if r.mechanism == "WP":
            wp += r.full_cost_bits
        elif r.mechanism == "WC":
            wc += r.full_cost_bits - r.bits_sent
    total = wp + wc
    if total == 0:
        return 0.0, 0.0
    return 100.0 * wp / total, 100.0 * wc / total


TRACE_COLUMNS = ("index", "word", "decision", "k", "bits_sent", "estimate",
                 "similarity", "mechanism")


def trace_to_text(trace: TransmissionTrace) -> str:
    """Tab-separated trace export, one line per word, stable under a seed."""
    lines = ["\t".join(TRACE_COLUMNS)]
    for r in trace.records:
        estimate = r.estimate if r.estimate is not None else "-"
        lines.append("\t".join([
            str(r.index), r.word, r.decision, str(r.prefix_len),
            str(r.bits_sent), estimate, f"{r.similarity:.6f}", r.mechanism,
        ]))
    return "\n".join(lines) + "\n"
