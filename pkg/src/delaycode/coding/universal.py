"""Universal fixed-to-variable code built on conditional type classes.

A codeword is ``1``, then the joint type of ``(x, y)`` as a fixed-width
index, then the index of ``x`` inside its conditional type class given ``y``.
Nothing depends on the source distribution, only on the alphabet sizes.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..source_model import EmpiricalType
from .prefix import MalformedCodeword, TruncatedCodeword


@lru_cache(maxsize=4096)
def _factorial(n: int) -> int:
    return math.factorial(n)


def multinomial(counts: Sequence[int]) -> int:
    out = _factorial(sum(counts))
    for c in counts:
        out //= _factorial(c)
    return out


def rank_permutation(seq: Sequence[int], alphabet: int) -> int:
    """Lexicographic rank of ``seq`` among all rearrangements of its multiset."""
    counts = [0] * alphabet
    for s in seq:
        counts[s] += 1
    rank = 0
    for s in seq:
        for v in range(s):
            if counts[v]:
                counts[v] -= 1
                rank += multinomial(counts)
                counts[v] += 1
        counts[s] -= 1
    return rank


def unrank_permutation(rank: int, counts: Sequence[int]) -> list[int]:
    counts = list(counts)
    n = sum(counts)
    out = []
    for _ in range(n):
        for v in range(len(counts)):
            if not counts[v]:
                continue
            counts[v] -= 1
            block = multinomial(counts)
            if rank < block:
                out.append(v)
                break
            rank -= block
            counts[v] += 1
        else:
            raise MalformedCodeword("permutation rank out of range")
    return out


def _int_to_bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


class UniversalCode:
    """Conditional-type code for blocks of ``block_len`` symbols."""

    def __init__(self, x_size: int, y_size: int, block_len: int):
        if x_size < 2 or y_size < 1 or block_len < 1:
            raise ValueError("need |X| >= 2, |Y| >= 1, N >= 1")
        self.x_size = x_size
        self.y_size = y_size
        self.block_len = block_len
        self.cells = x_size * y_size
        self.type_width = ((block_len + 1) ** self.cells - 1).bit_length()
        self.code_id = f"universal-{x_size}x{y_size}-N{block_len}"

    # -- types ----------------------------------------------------------------

    def joint_counts(self, x_block, y_block=None) -> np.ndarray:
        y_block = self._y(y_block, len(x_block))
        if len(x_block) != self.block_len:
            raise ValueError(f"block must have length {self.block_len}")
        counts = np.zeros((self.x_size, self.y_size), dtype=np.int64)
        np.add.at(counts, (np.asarray(x_block, dtype=int), np.asarray(y_block, dtype=int)), 1)
        return counts

    def type_index(self, counts: np.ndarray) -> int:
        base = self.block_len + 1
        idx = 0
        for c in reversed(np.asarray(counts).ravel().tolist()):
            idx = idx * base + int(c)
        return idx

    def counts_from_index(self, idx: int) -> np.ndarray:
        base = self.block_len + 1
        flat = []
        for _ in range(self.cells):
            idx, c = divmod(idx, base)
            flat.append(c)
        if idx:
            raise MalformedCodeword("type index out of range")
        return np.array(flat, dtype=np.int64).reshape(self.x_size, self.y_size)

    @staticmethod
    def class_size(counts: np.ndarray) -> int:
        size = 1
        for col in np.asarray(counts).T:
            size *= multinomial([int(c) for c in col])
        return size

    def length_from_counts(self, counts: np.ndarray) -> int:
        return 1 + self.type_width + (self.class_size(counts) - 1).bit_length()

    def length(self, x_block, y_block=None) -> int:
        return self.length_from_counts(self.joint_counts(x_block, y_block))

    def _y(self, y_block, n):
        if y_block is None:
            if self.y_size != 1:
                raise ValueError("side-information block required")
            return [0] * n
        if len(y_block) != n:
            raise ValueError("x and y blocks differ in length")
        return list(y_block)

    # -- coding ---------------------------------------------------------------

    def encode(self, x_block, y_block=None) -> str:
        x_block = [int(v) for v in x_block]
        y_block = self._y(y_block, len(x_block))
        counts = self.joint_counts(x_block, y_block)
        index, radix = 0, 1
        for y in range(self.y_size):
            sub = [x for x, yy in zip(x_block, y_block) if yy == y]
            index += rank_permutation(sub, self.x_size) * radix
            radix *= multinomial([int(c) for c in counts[:, y]])
        width = (radix - 1).bit_length()
        return "1" + _int_to_bits(self.type_index(counts), self.type_width) + \
            _int_to_bits(index, width)

    def read(self, bits: str, pos: int = 0, y_block=None) -> tuple[tuple, int]:
        """Parse one codeword at ``bits[pos]`` given the decoder's ``y`` block."""
        y_block = self._y(y_block, self.block_len)
        if pos >= len(bits):
            raise TruncatedCodeword("empty input")
        if bits[pos] != "1":
            raise MalformedCodeword(f"expected flag bit 1 at position {pos}")
        start = pos + 1
        end = start + self.type_width
        if end > len(bits):
            raise TruncatedCodeword("truncated joint type")
        counts = self.counts_from_index(int(bits[start:end], 2) if self.type_width else 0)
        y_counts = np.bincount(np.asarray(y_block, dtype=int), minlength=self.y_size)
        if counts.sum() != self.block_len or np.any(counts.sum(axis=0) != y_counts):
            raise MalformedCodeword("joint type inconsistent with block length or side-information")
        size = self.class_size(counts)
        width = (size - 1).bit_length()
        if end + width > len(bits):
            raise TruncatedCodeword("truncated conditional index")
        index = int(bits[end:end + width], 2) if width else 0
        if index >= size:
            raise MalformedCodeword("conditional index out of range")
        x_block = [0] * self.block_len
        for y in range(self.y_size):
            col = [int(c) for c in counts[:, y]]
            m = multinomial(col)
            index, sub_rank = divmod(index, m)
            sub = unrank_permutation(sub_rank, col)
            it = iter(sub)
            for i, yy in enumerate(y_block):
                if yy == y:
                    x_block[i] = next(it)
        return tuple(x_block), end + width

    def decode(self, bits: str, y_block=None) -> tuple:
        block, pos = self.read(bits, 0, y_block)
        if pos != len(bits):
            raise MalformedCodeword("trailing bits after codeword")
        return block

    def epsilon_bound(self) -> float:
        """``(2 + |X||Y| log2(N+1)) / N``, the per-symbol overhead allowance."""
        return (2.0 + self.cells * math.log2(self.block_len + 1)) / self.block_len

    def length_bounds(self, x_block, y_block=None) -> tuple[float, float]:
        """``(N H_emp(x|y), N (H_emp(x|y) + eps_N))`` for this block."""
        n = self.block_len
        h = EmpiricalType(self.joint_counts(x_block, y_block)).conditional_entropy()
        return n * h, n * (h + self.epsilon_bound())
