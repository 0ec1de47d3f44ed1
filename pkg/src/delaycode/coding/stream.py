"""Fixed-rate streaming on top of a block code.

Time is an integer symbol clock. Symbol ``i`` (1-based) is revealed at time
``i``. At the end of period ``j``:

1. if ``j`` is a multiple of ``t``, ``b`` bits leave the FIFO (rate ``b/t``),
   padded with filler when the queue runs dry;
2. if ``j`` is a multiple of the block length ``N``, the block that just
   completed is encoded and its codeword enters the FIFO.

A block is decoded at the first drain that delivers its last bit. The
decoder tells filler from data with the clock alone: bits in a drain at time
``j`` can only belong to blocks completed before ``j``, so once all of those
are parsed whatever is left in that drain is filler.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .prefix import TruncatedCodeword

FILLER_TAG = -1


class BitQueue:
    """FIFO of bits, each tagged with the index of the block it describes."""

    def __init__(self):
        self._bits: deque[tuple[str, int]] = deque()
        self.enqueued = 0
        self.drained = 0
        self.filler = 0

    def __len__(self) -> int:
        return len(self._bits)

    def push(self, bits: str, tag: int) -> None:
        self._bits.extend((b, tag) for b in bits)
        self.enqueued += len(bits)

    def drain(self, n: int, filler: str = "0") -> tuple[str, list[int]]:
        out, tags = [], []
        for _ in range(n):
            if self._bits:
                b, tag = self._bits.popleft()
            else:
                b, tag = filler, FILLER_TAG
                self.filler += 1
            out.append(b)
            tags.append(tag)
        self.drained += n
        return "".join(out), tags


def as_rate(rate) -> tuple[int, int]:
    """``(b, t)``: b bits every t symbol periods."""
    if isinstance(rate, tuple):
        b, t = rate
    else:
        frac = Fraction(rate).limit_denominator(1000)
        b, t = frac.numerator, frac.denominator
    if b <= 0 or t <= 0:
        raise ValueError("rate must be positive")
    return int(b), int(t)


@dataclass
class StreamTrace:
    """Per-symbol timing of one streamed run."""

    arrival: np.ndarray
    decoded_at: np.ndarray
    correct: np.ndarray
    rate: tuple[int, int]
    queue_at_block: np.ndarray | None = None

    @property
    def delay(self) -> np.ndarray:
        return self.decoded_at - self.arrival

    def errors_at(self, delta: int) -> np.ndarray:
        """Per-symbol error indicator for deadline ``i + delta``."""
        return (self.delay > delta) | ~self.correct

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["symbol_index", "decode_delay", "correct"])
        for i, d, c in zip(self.arrival.tolist(), self.delay.tolist(), self.correct.tolist()):
            w.writerow([i, d, int(c)])
        return buf.getvalue()


def _blocks(seq, n):
    return [tuple(seq[k:k + n]) for k in range(0, len(seq), n)]


def stream_encode(x: Sequence[int], code, rate, y: Sequence[int] | None = None,
                  flush: bool = True) -> tuple[str, StreamTrace]:
    """Run the encoder clock over ``x`` and return the emitted bits and the timing trace.

    ``code`` is any object with ``block_len`` and ``encode(x_block, y_block)``.
    With ``flush`` the clock keeps running after the source ends until the
    queue is empty, so every symbol gets a finite decode time.
    """
    b, t = as_rate(rate)
    n = code.block_len
    if len(x) % n:
        raise ValueError(f"stream length {len(x)} is not a multiple of the block length {n}")
    if y is not None and len(y) != len(x):
        raise ValueError("x and y streams differ in length")
    xb = _blocks(list(x), n)
    yb = _blocks(list(y), n) if y is not None else [None] * len(xb)
    n_blocks = len(xb)

    queue = BitQueue()
    finish = np.zeros(n_blocks, dtype=np.int64)
    backlog = np.zeros(n_blocks, dtype=np.int64)
    pending = [0] * n_blocks
    out = []
    j = 0
    enqueued_blocks = 0
    while True:
        j += 1
        if j % t == 0:
            bits, tags = queue.drain(b)
            out.append(bits)
            for tag in tags:
                if tag != FILLER_TAG:
                    pending[tag] -= 1
                    if pending[tag] == 0:
                        finish[tag] = j
        if j % n == 0 and enqueued_blocks < n_blocks:
            k = enqueued_blocks
            word = code.encode(xb[k], yb[k])
            backlog[k] = len(queue)
            pending[k] = len(word)
            queue.push(word, k)
            enqueued_blocks += 1
        if enqueued_blocks == n_blocks and (not flush or len(queue) == 0) and j % t == 0:
            break
    arrival = np.arange(1, len(x) + 1)
    decoded_at = np.repeat(finish, n)
    if not flush:
        decoded_at = np.where(decoded_at == 0, np.iinfo(np.int64).max, decoded_at)
    trace = StreamTrace(arrival, decoded_at, np.ones(len(x), dtype=bool), (b, t), backlog)
    return "".join(out), trace


def stream_decode(bits: str, code, rate, n_symbols: int,
                  y: Sequence[int] | None = None) -> tuple[list[int], np.ndarray]:
    """Replay the decoder clock; return reconstructed symbols and their decode times."""
    b, t = as_rate(rate)
    n = code.block_len
    if n_symbols % n:
        raise ValueError("symbol count must be a multiple of the block length")
    n_blocks = n_symbols // n
    yb = _blocks(list(y), n) if y is not None else [None] * n_blocks
    out: list[int] = []
    times = np.zeros(n_blocks, dtype=np.int64)
    buf = ""
    decoded = 0
    for c in range(len(bits) // b):
        j = (c + 1) * t
        buf += bits[c * b:(c + 1) * b]
        available = min((j - 1) // n, n_blocks)
        pos = 0
        while decoded < available:
            try:
                block, pos = code.read(buf, pos, yb[decoded])
            except TruncatedCodeword:
                break
            out.extend(block)
            times[decoded] = j
            decoded += 1
        buf = buf[pos:]
        if decoded == available:
            # Whatever is left was emitted while the encoder was idle.
            assert len(buf) <= b, "filler spans more than one drain"
            buf = ""
    if decoded != n_blocks:
        raise ValueError(f"stream ended after {decoded} of {n_blocks} blocks")
    return out, np.repeat(times, n)


def fifo_block_schedule(lengths: np.ndarray, block_len: int, rate) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized queue recursion when drains line up with block boundaries.

    Requires ``t`` to divide ``block_len``. Returns ``(backlog, finish)`` per
    block: the queue length just before the block's codeword enters, and the
    time its last bit leaves. Identical to :func:`stream_encode` on the same
    codeword lengths.
    """
    b, t = as_rate(rate)
    if block_len % t:
        raise ValueError("fast path needs the drain period to divide the block length")
    per_block = b * block_len // t
    lengths = np.asarray(lengths, dtype=np.int64)
    steps = lengths[:-1] - per_block
    walk = np.concatenate([[0], np.cumsum(steps)])
    backlog = walk - np.minimum.accumulate(walk)
    k = np.arange(1, len(lengths) + 1, dtype=np.int64)
    finish = k * block_len + t * (-(-(backlog + lengths) // b))
    return backlog, finish
