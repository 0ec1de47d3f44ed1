"""Fixed-block-length baseline: buffer a block, send its index during the next block.

With block length ``n`` and ``floor(nR)`` bits per block, the codebook holds
the ``2^floor(nR)`` most probable sequences. Sequences are ranked by
probability (type classes in order, ties broken by the type vector, then
lexicographically inside a class). Anything outside the codebook is sent as
index 0, so the decoder outputs the most probable sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from ..oracles import compositions
from ..source_model import SingleDistribution
from .stream import StreamTrace, as_rate
from .universal import multinomial, rank_permutation, unrank_permutation


@dataclass
class BlockCodebook:
    probs: np.ndarray
    block_len: int
    bits: int

    def __post_init__(self):
        self.probs = np.asarray(getattr(self.probs, "probs", self.probs), dtype=float).ravel()
        self.block_len, self.bits = int(self.block_len), int(self.bits)
        if np.any(self.probs <= 0):
            raise ValueError("baseline needs a source with full support")

    @property
    def size(self) -> int:
        return 2 ** self.bits

    @cached_property
    def types(self) -> list[tuple]:
        """Type vectors sorted from most to least probable sequence."""
        logp = np.log2(self.probs)
        comps = compositions(self.block_len, len(self.probs))
        keys = [(-float(np.dot(c, logp)), tuple(-int(v) for v in c)) for c in comps]
        order = sorted(range(len(comps)), key=keys.__getitem__)
        return [tuple(int(v) for v in comps[i]) for i in order]

    @cached_property
    def offsets(self) -> dict[tuple, int]:
        out, acc = {}, 0
        for c in self.types:
            out[c] = acc
            acc += multinomial(c)
        return out

    def index(self, block: Sequence[int]) -> int:
        counts = tuple(np.bincount(np.asarray(block, dtype=int), minlength=len(self.probs)).tolist())
        return self.offsets[counts] + rank_permutation(block, len(self.probs))

    def encode(self, block: Sequence[int]) -> int:
        idx = self.index(block)
        return idx if idx < self.size else 0

    def decode(self, index: int) -> tuple:
        if not 0 <= index < self.size:
            raise ValueError("index outside the codebook")
        for c in self.types:
            m = multinomial(c)
            if index < m:
                return tuple(unrank_permutation(index, c))
            index -= m
        raise ValueError("index outside the type space")

    def type_coverage(self) -> list[tuple[tuple, int, int]]:
        """``(type, class size, how many of its sequences are in the codebook)``."""
        out, left = [], self.size
        for c in self.types:
            m = multinomial(c)
            cover = min(m, max(left, 0))
            left -= cover
            out.append((c, m, cover))
        return out

    def symbol_error_probability(self) -> float:
        """Exact per-symbol error probability by summing over type classes."""
        guess = self.decode(0)
        assert len(set(guess)) == 1, "most probable block should be constant"
        logp = np.log2(self.probs)
        total = 0.0
        for c, m, cover in self.type_coverage():
            miss = m - cover
            if miss == 0:
                continue
            wrong = sum(cnt for s, cnt in enumerate(c) if s != guess[0])
            # Exact big-int count times per-sequence probability.
            total += math.exp(math.log(miss) + float(np.dot(c, logp)) * math.log(2)) * \
                wrong / self.block_len
        return total


def baseline_bits(block_len: int, rate) -> int:
    b, t = as_rate(rate)
    return (block_len * b) // t


def codebook_for(source, delta: int, rate) -> BlockCodebook:
    if isinstance(source, SingleDistribution):
        source = source.probs
    n = int(delta) // 2
    if n < 1:
        raise ValueError("delay must be at least 2 for the block baseline")
    return BlockCodebook(np.asarray(source, dtype=float), n, baseline_bits(n, rate))


def block_baseline(x: Sequence[int], delta: int, rate, source) -> StreamTrace:
    """Encode and decode ``x`` with the optimal block code of length ``delta // 2``."""
    book = codebook_for(source, delta, rate)
    n = book.block_len
    if len(x) % n:
        raise ValueError("stream length must be a multiple of delta // 2")
    out = []
    for k in range(0, len(x), n):
        out.extend(book.decode(book.encode(x[k:k + n])))
    arrival = np.arange(1, len(x) + 1)
    decoded_at = ((arrival - 1) // n + 2) * n
    correct = np.asarray(out) == np.asarray(x)
    return StreamTrace(arrival, decoded_at, correct, as_rate(rate))
