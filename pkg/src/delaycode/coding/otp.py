"""One-time pad over the cyclic group of order ``m``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GroupAlphabet:
    """Integers modulo ``m`` under addition."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("group order must be at least 2")

    def add(self, a, b):
        return (np.asarray(a) + np.asarray(b)) % self.m

    def sub(self, a, b):
        return (np.asarray(a) - np.asarray(b)) % self.m

    def neg(self, a):
        return (-np.asarray(a)) % self.m


def _check(a, key, g: GroupAlphabet):
    a = np.asarray(a, dtype=np.int64)
    key = np.asarray(key, dtype=np.int64)
    if a.shape != key.shape:
        raise ValueError(f"stream and key lengths differ: {a.shape} vs {key.shape}")
    if a.size and (a.min() < 0 or a.max() >= g.m or key.min() < 0 or key.max() >= g.m):
        raise ValueError(f"symbols must lie in 0..{g.m - 1}")
    return a, key


def otp_transform(s, key, g: GroupAlphabet) -> np.ndarray:
    """``x_i = s_i + key_i`` in the group."""
    s, key = _check(s, key, g)
    return g.add(s, key)


def otp_inverse(x, key, g: GroupAlphabet) -> np.ndarray:
    """Recover ``s`` from ``x`` and the key."""
    x, key = _check(x, key, g)
    return g.sub(x, key)
