"""Corpus loading, tokenization, and the padded n-gram training set.

A corpus is an ordered list of sentences (word lists) plus the cleaned
character stream the completion model trains on.  Vocabulary tokens are
assigned in first-occurrence order starting at 1; token 0 is reserved for
left-padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Closed character set: everything outside it is dropped during cleaning.
# Terminal punctuation both ends sentences and acts as a word delimiter for
# the completion model, so it stays in the alphabet.
WORD_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789'"
TERMINALS = ".?!"
DELIMITERS = " " + TERMINALS
ALPHABET = WORD_CHARS + DELIMITERS


class EmptyCorpusError(ValueError):
    """Raised when cleaning leaves no usable sentence."""


class ConsistencyError(ValueError):
    """Raised when a corpus word is missing from the vocabulary."""


@dataclass(frozen=True)
class PreprocessConfig:
    lowercase: bool = True
    stopwords: tuple[str, ...] = ()
    terminators: str = TERMINALS


@dataclass(frozen=True)
class Corpus:
    """Sentences after cleaning plus the flat character stream.

    terminators[k] is the punctuation mark that closed sentence k; raw_text
    joins each sentence's words with single spaces, appends its terminator,
    and joins sentences with single spaces.
    """
    sentences: tuple[tuple[str, ...], ...]
    terminators: tuple[str, ...]
    raw_text: str

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)

    def word_count(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class Vocabulary:
    word_to_token: dict[str, int]
    token_to_word: dict[int, str]

    @property
    def size(self) -> int:
        return len(self.word_to_token)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_token

    def token(self, word: str) -> int | None:
        return self.word_to_token.get(word)

    def word(self, token: int) -> str:
        return self.token_to_word[token]

    def words_in_token_order(self) -> list[str]:
        return [self.token_to_word[t] for t in range(1, self.size + 1)]


@dataclass(frozen=True)
class TrainingSet:
    """Left-zero-padded token rows; the last column is the label."""
    rows: np.ndarray
    m_max: int

    @property
    def num_samples(self) -> int:
        return int(self.rows.shape[0])

    @property
    def inputs(self) -> np.ndarray:
        return self.rows[:, :-1]

    @property
    def labels(self) -> np.ndarray:
        return self.rows[:, -1]


def clean_text(text: str, prep: PreprocessConfig = PreprocessConfig()) -> str:
    """Lowercase, collapse whitespace to single spaces, drop foreign chars."""
    if prep.lowercase:
        text = text.lower()
    keep = set(WORD_CHARS) | set(prep.terminators)
    out: list[str] = []
    for ch in text:
        if ch.isspace():
            out.append(" ")
        elif ch in keep:
            out.append(ch)
    return "".join(out)


def parse_corpus(text: str, prep: PreprocessConfig = PreprocessConfig()) -> Corpus:
    """Split cleaned text on terminal punctuation and build a Corpus.

    Sentences with fewer than 2 words are dropped (they yield no n-gram
    samples).  A trailing fragment without a terminator is closed with '.'.
    """
    cleaned = clean_text(text, prep)
    stop = set(prep.stopwords)
    sentences: list[tuple[str, ...]] = []
    terminators: list[str] = []
    pieces: list[str] = []
    buf: list[str] = []
    for ch in cleaned:
        if ch in prep.terminators:
            _flush_sentence(buf, ch, stop, sentences, terminators, pieces)
            buf = []
        else:
            buf.append(ch)
    _flush_sentence(buf, ".", stop, sentences, terminators, pieces)
    if not sentences:
        raise EmptyCorpusError("no sentence with >= 2 words after cleaning")
    return Corpus(tuple(sentences), tuple(terminators), " ".join(pieces))


def _flush_sentence(buf: list[str], terminator: str, stop: set[str],
                    sentences: list[tuple[str, ...]],
                    terminators: list[str], pieces: list[str]) -> None:
    words = tuple(w for w in "".join(buf).split() if w not in stop)
    if len(words) < 2:
        return
    sentences.append(words)
    terminators.append(terminator)
    pieces.append(" ".join(words) + terminator)


def load_corpus(path: str, prep: PreprocessConfig = PreprocessConfig()) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh.read(), prep)


def build_vocabulary(corpus: Corpus) -> Vocabulary:
    word_to_token: dict[str, int] = {}
    for sentence in corpus.sentences:
        for word in sentence:
            if word not in word_to_token:
                word_to_token[word] = len(word_to_token) + 1
    token_to_word = {t: w for w, t in word_to_token.items()}
    return Vocabulary(word_to_token, token_to_word)


def build_ngram_dataset(corpus: Corpus, vocab: Vocabulary,
                        m_max: int | None = None) -> TrainingSet:
    """All length-2..M_k prefixes of every sentence, left-zero-padded.

    Row count is sum(M_k - 1); the rightmost entry of each row is the label.
    """
    if m_max is None:
        m_max = max(len(s) for s in corpus.sentences)
    rows: list[np.ndarray] = []
    for sentence in corpus.sentences:
        tokens = []
        for word in sentence:
            t = vocab.token(word)
            if t is None:
                raise ConsistencyError(f"word not in vocabulary: {word!r}")
            tokens.append(t)
        tokens = tokens[:m_max]
        for end in range(2, len(tokens) + 1):
            row = np.zeros(m_max, dtype=np.int64)
            row[m_max - end:] = tokens[:end]
            rows.append(row)
    return TrainingSet(np.stack(rows), m_max)


@dataclass(frozen=True)
class CorpusSplit:
    train: Corpus
    test: Corpus


def split_corpus(corpus: Corpus, train_fraction: float = 0.95,
                 test_sentences: int = 100) -> CorpusSplit:
    """First `train_fraction` of sentences train; the evaluation set is the
    next `test_sentences` sentences of the remainder."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    cut = int(len(corpus.sentences) * train_fraction)
    cut = max(1, min(cut, len(corpus.sentences) - 1))
    rest = len(corpus.sentences) - cut
    if rest < test_sentences:
        raise ValueError(
            f"need {test_sentences} test sentences, only {rest} remain "
            f"after the {train_fraction:.0%} training cut")
    train = _subcorpus(corpus, 0, cut)
    test = _subcorpus(corpus, cut, cut + test_sentences)
    return CorpusSplit(train, test)


def _subcorpus(corpus: Corpus, start: int, end: int) -> Corpus:
    sentences = corpus.sentences[start:end]
    terminators = corpus.terminators[start:end]
    pieces = [" ".join(s) + t for s, t in zip(sentences, terminators)]
    return Corpus(sentences, terminators, " ".join(pieces))
