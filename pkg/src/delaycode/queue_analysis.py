"""Closed-form analysis of the +1/-2 reflecting random walk.

The walk is the bit backlog of the ternary prefix scheme sampled every two
symbols: a 1-bit codeword (probability ``q``) lowers it by 2, a 4-bit
codeword raises it by 1, and it cannot go below zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

STEP_UP = 1
STEP_DOWN = 2
BITS_PER_SLOT = 3


class NonErgodicError(ValueError):
    pass


@dataclass(frozen=True)
class QueueWalkParams:
    q_down: float

    def __post_init__(self):
        if not 0.0 < self.q_down < 1.0:
            raise ValueError(f"q_down must lie in (0, 1), got {self.q_down}")
        if self.q_down <= 1.0 / 3.0:
            raise NonErgodicError(f"no stationary distribution for q_down = {self.q_down} <= 1/3")

    @classmethod
    def from_source(cls, a: float) -> "QueueWalkParams":
        """The walk induced by the ternary source with ``P(A) = a``."""
        return cls(a * a)


@dataclass(frozen=True)
class StationaryAnalysis:
    q: float
    r: float
    Z: float
    G: float
    tail_constant: float
    exponent: float

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k)
        return self.Z * self.r ** k

    def tail(self, k: int) -> float:
        """``P(L >= k)``."""
        return 1.0 if k <= 0 else self.r ** k


def stationary(params: QueueWalkParams) -> StationaryAnalysis:
    """Geometric stationary law ``pi_k = Z r^k`` and the derived constants.

    ``G = Z (q (1 + r + r^2) + 1 - q)`` is the constant as printed with the
    scheme's analysis. ``tail_constant = q r^3 + 1 - q`` is what the union of
    the two codeword-length cases actually sums to, so that the error
    probability at delay ``Delta`` is ``tail_constant * r^(M-3)``.
    """
    q = params.q_down
    r = (-1.0 + math.sqrt(1.0 + 4.0 * (1.0 - q) / q)) / 2.0
    z = 1.0 - r
    g = z * (q * (1.0 + r + r * r) + (1.0 - q))
    tail_c = q * r ** 3 + (1.0 - q)
    return StationaryAnalysis(q=q, r=r, Z=z, G=g, tail_constant=tail_c,
                              exponent=scheme_exponent_from_r(r))


def scheme_exponent_from_r(r: float) -> float:
    return 1.5 * math.log2(1.0 / r)


def scheme_exponent(analysis: StationaryAnalysis) -> float:
    """Delay exponent of the prefix scheme, ``(3/2) log2(1/r)`` bits per symbol of delay."""
    return scheme_exponent_from_r(analysis.r)


def backlog_threshold(delta: int) -> int:
    """``floor(3 (Delta - 1) / 2)``: bits that leave between a block's arrival and its deadline."""
    return (3 * (delta - 1)) // 2


def _check_delta(delta: int) -> int:
    if delta != int(delta) or delta < 3 or delta % 2 == 0:
        raise ValueError(f"delay must be an odd integer >= 3, got {delta}")
    return int(delta)


def delay_error_bound(analysis: StationaryAnalysis, delta: int) -> float:
    """Steady-state probability that a block is not fully delivered within ``Delta``.

    Sum of the two codeword-length cases:
    ``q P(L > M - 1) + (1 - q) P(L > M - 4)`` with ``M = floor(3(Delta-1)/2)``.
    """
    delta = _check_delta(delta)
    m = backlog_threshold(delta)
    q = analysis.q
    val = q * analysis.tail(m) + (1.0 - q) * analysis.tail(m - 3)
    return float(min(max(val, 0.0), 1.0))


def closed_form_bound(analysis: StationaryAnalysis, delta: int) -> float:
    """``G r^(M-3)`` with the printed constant ``G``; see :func:`stationary`."""
    delta = _check_delta(delta)
    val = analysis.G * analysis.r ** (backlog_threshold(delta) - 3)
    return float(min(max(val, 0.0), 1.0))


def min_delay_for(analysis: StationaryAnalysis, target: float, bound=delay_error_bound,
                  max_delta: int = 100001) -> int:
    """Smallest odd ``Delta`` whose bound is at most ``target``."""
    for delta in range(3, max_delta, 2):
        if bound(analysis, delta) <= target:
            return delta
    raise ValueError(f"no delay below {max_delta} reaches {target}")


def transition_matrix(params: QueueWalkParams, state_cap: int = 200) -> np.ndarray:
    """Truncated transition matrix on states ``0..state_cap-1``.

    Down-steps from states 0 and 1 land on 0. The up-step out of the last
    state is folded back onto it so that rows stay stochastic.
    """
    if state_cap < 3:
        raise ValueError("state_cap must be at least 3")
    q = params.q_down
    P = np.zeros((state_cap, state_cap))
    for k in range(state_cap):
        P[k, max(k - STEP_DOWN, 0)] += q
        P[k, min(k + STEP_UP, state_cap - 1)] += 1.0 - q
    return P


def power_iteration(P: np.ndarray, tol: float = 1e-14, max_iter: int = 200000) -> np.ndarray:
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ P
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi


def report(analysis: StationaryAnalysis, deltas: Iterable[int]) -> dict:
    """JSON-ready summary ``{q, r, Z, G, exponent, delays: [{delta, bound}]}``."""
    out = {k: v for k, v in asdict(analysis).items()}
    out["delays"] = [{"delta": int(d), "bound": delay_error_bound(analysis, d),
                      "closed_form": closed_form_bound(analysis, d)} for d in deltas]
    return out
