"""Prefix-free fixed-to-variable block codes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence


class MalformedCodeword(ValueError):
    """The bits cannot be the start of any codeword."""


class TruncatedCodeword(MalformedCodeword):
    """The bits end before a complete codeword."""


def is_prefix_free(words: Sequence[str]) -> bool:
    ordered = sorted(words)
    return all(not b.startswith(a) for a, b in zip(ordered, ordered[1:])) and \
        len(set(words)) == len(words)


def kraft_sum(lengths: Sequence[int]) -> Fraction:
    return sum((Fraction(1, 2 ** l) for l in lengths), Fraction(0))


@dataclass
class PrefixCode:
    """A total map from length-``block_len`` input blocks to a prefix-free set of bit strings.

    Blocks are tuples of symbol indices. ``y`` arguments are accepted so this
    class is interchangeable with the conditional universal code, and ignored.
    """

    alphabet_size: int
    block_len: int
    codebook: Mapping[tuple, str]
    code_id: str = "prefix"
    _inverse: dict = field(init=False, repr=False)
    _max_len: int = field(init=False, repr=False)

    def __post_init__(self):
        self.codebook = {tuple(k): v for k, v in self.codebook.items()}
        expected = set(itertools.product(range(self.alphabet_size), repeat=self.block_len))
        if set(self.codebook) != expected:
            raise ValueError("codebook must cover every input block exactly once")
        words = list(self.codebook.values())
        if any(not w or set(w) - {"0", "1"} for w in words):
            raise ValueError("codewords must be nonempty bit strings")
        if not is_prefix_free(words):
            raise ValueError("codebook is not prefix-free")
        if kraft_sum([len(w) for w in words]) > 1:
            raise ValueError("codeword lengths violate the Kraft inequality")
        self._inverse = {w: k for k, w in self.codebook.items()}
        self._max_len = max(len(w) for w in words)

    def length(self, block, y_block=None) -> int:
        return len(self.codebook[tuple(block)])

    def encode(self, block, y_block=None) -> str:
        return self.codebook[tuple(block)]

    def read(self, bits: str, pos: int = 0, y_block=None) -> tuple[tuple, int]:
        """Parse one codeword starting at ``bits[pos]``; return ``(block, next_pos)``."""
        for end in range(pos + 1, min(pos + self._max_len, len(bits)) + 1):
            block = self._inverse.get(bits[pos:end])
            if block is not None:
                return block, end
        if len(bits) - pos < self._max_len:
            raise TruncatedCodeword(f"need more bits after position {pos}")
        raise MalformedCodeword(f"no codeword matches at position {pos}")

    def decode(self, bits: str) -> list[tuple]:
        blocks, pos = [], 0
        while pos < len(bits):
            block, pos = self.read(bits, pos)
            blocks.append(block)
        return blocks

    def kraft(self) -> Fraction:
        return kraft_sum([len(w) for w in self.codebook.values()])


TERNARY_SYMBOLS = "ABC"

_TERNARY_WORDS = {
    "AA": "0",
    "AB": "1000", "AC": "1001", "BA": "1010", "BB": "1011",
    "BC": "1100", "CA": "1101", "CB": "1110", "CC": "1111",
}


def ternary_prefix_code() -> PrefixCode:
    """Two-symbol blocks over {A, B, C}: ``AA -> 0`` and every other pair gets 4 bits."""
    book = {tuple(TERNARY_SYMBOLS.index(c) for c in k): v for k, v in _TERNARY_WORDS.items()}
    return PrefixCode(alphabet_size=3, block_len=2, codebook=book, code_id="ternary")
