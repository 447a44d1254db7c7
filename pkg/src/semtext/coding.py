"""Character-level Huffman coding over the corpus alphabet.

The codebook is built once from training-corpus character frequencies and
shared by source and destination.  Construction is fully deterministic:
nodes merge lowest-count first, ties broken by the lexicographically
smallest character contained in the node, and the smaller of the two merged
branches takes the 0 bit.  Zero-count alphabet characters get a count floor
of 1 so every test character stays encodable.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass

from .channel import ERASURE_MARK
from .corpus import ALPHABET


class CodingError(ValueError):
    """Raised for out-of-alphabet characters or degenerate alphabets."""


class DecodeError(ValueError):
    """Raised when a received unit is not a valid codeword."""


@dataclass(frozen=True)
class FrequencyTable:
    counts: dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def count_frequencies(text: str, alphabet: str = ALPHABET) -> FrequencyTable:
    """Character counts over `alphabet` with a Laplace floor of 1."""
    raw = Counter(text)
    bad = set(raw) - set(alphabet)
    if bad:
        raise CodingError(f"text contains out-of-alphabet characters: {sorted(bad)!r}")
    return FrequencyTable({ch: max(1, raw.get(ch, 0)) for ch in alphabet})


@dataclass(frozen=True)
class HuffmanCodebook:
    code: dict[str, str]

    def expected_length(self, freq: FrequencyTable) -> float:
        """Mean codeword length in bits under the given character distribution."""
        total = freq.total
        return sum(freq.counts[ch] * len(self.code[ch]) for ch in freq.counts) / total


def build_codebook(freq: FrequencyTable) -> HuffmanCodebook:
    if len(freq.counts) < 2:
        raise CodingError("Huffman needs at least 2 distinct characters")
    # Heap entries: (count, smallest contained char, {char: partial code}).
    heap = [(count, ch, {ch: ""}) for ch, count in freq.counts.items()]
    heapq.heapify(heap)
    while len(heap) > 1:
        lo = heapq.heappop(heap)
        hi = heapq.heappop(heap)
        merged = {ch: "0" + bits for ch, bits in lo[2].items()}
        merged.update({ch: "1" + bits for ch, bits in hi[2].items()})
        heapq.heappush(heap, (lo[0] + hi[0], min(lo[1], hi[1]), merged))
    return HuffmanCodebook(dict(heap[0][2]))


def code_length(book: HuffmanCodebook, char: str) -> int:
    if char not in book.code:
        raise CodingError(f"character not in codebook: {char!r}")
    return len(book.code[char])


def encode_word(book: HuffmanCodebook, word: str) -> list[str]:
    """One bit string per character; boundaries are kept because the channel
    erases whole characters, not bits."""
    out = []
    for ch in word:
        if ch not in book.code:
            raise CodingError(f"character not in codebook: {ch!r}")
        out.append(book.code[ch])
    return out


def decode(book: HuffmanCodebook, units: list[str]) -> str:
    """Per-unit decode; erased units pass through as the erasure mark."""
    inverse = {bits: ch for ch, bits in book.code.items()}
    chars = []
    for unit in units:
        if unit == ERASURE_MARK:
            chars.append(ERASURE_MARK)
            continue
        ch = inverse.get(unit)
        if ch is None:
            raise DecodeError(f"not a codeword: {unit!r}")
        chars.append(ch)
    return "".join(chars)


def export_codebook(book: HuffmanCodebook, alphabet: str = ALPHABET) -> str:
    """Canonical text form, one `char<TAB>bits` line per alphabet character."""
    lines = [f"{ch}\t{book.code[ch]}" for ch in alphabet if ch in book.code]
    return "\n".join(lines) + "\n"


def import_codebook(text: str) -> HuffmanCodebook:
    code: dict[str, str] = {}
    for line in text.splitlines():
        if not line:
            continue
        char, _, bits = line.partition("\t")
        if len(char) != 1 or not bits or set(bits) - {"0", "1"}:
            raise CodingError(f"malformed codebook line: {line!r}")
        code[char] = bits
    if len(code) < 2:
        raise CodingError("codebook must hold at least 2 characters")
    return HuffmanCodebook(code)
