"""Brute-force reference computations.

These enumerate candidate distributions on a regular simplex grid and never
touch Gallager's function, so they can cross-check the rho-domain code paths.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .source_model import JointDistribution, SingleDistribution


@lru_cache(maxsize=None)
def compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int32)
    blocks = []
    for first in range(total, -1, -1):
        rest = compositions(total - first, parts - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int32), rest]))
    return np.vstack(blocks)


def simplex_grid(cells: int, den: int, tail: int = 4) -> Iterator[np.ndarray]:
    """Yield chunks of the grid ``{k/den : k in N^cells, sum k = den}``.

    The last ``tail`` coordinates are enumerated as one block per prefix, which
    keeps every chunk vectorized.
    """
    tail = min(tail, cells)
    head = cells - tail
    if head == 0:
        yield compositions(den, cells) / den
        return
    for used in range(den + 1):
        for prefix in compositions(used, head):
            rest = compositions(den - used, tail)
            chunk = np.empty((len(rest), cells))
            chunk[:, :head] = prefix
            chunk[:, head:] = rest
            yield chunk / den


def _grid_measures(p: JointDistribution, den: int):
    """Yield (D(q||p), D(q_x||p_x), H(q_{x|y})) for grid points q on supp(p)."""
    mask = p.probs > 0
    rows, cols = np.nonzero(mask)
    pv = p.probs[mask]
    px = p.p_x
    nx, ny = p.x_size, p.y_size
    for q in simplex_grid(pv.size, den):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(q > 0, q * np.log2(q / pv), 0.0).sum(axis=1)
            qx = np.zeros((len(q), nx))
            qy = np.zeros((len(q), ny))
            for j in range(pv.size):
                qx[:, rows[j]] += q[:, j]
                qy[:, cols[j]] += q[:, j]
            dx = np.where(qx > 0, qx * np.log2(qx / px), 0.0).sum(axis=1)
            h = -np.where(q > 0, q * np.log2(q / qy[:, cols]), 0.0).sum(axis=1)
        yield d, dx, h


def block_upper_grid(p, rates: Sequence[float], den: int = 400,
                     slack: float = 1e-9) -> np.ndarray:
    """``min D(q||p)`` over grid ``q`` with ``H(q_{x|y}) >= R`` for every rate."""
    if isinstance(p, SingleDistribution):
        p = p.as_joint()
    rates = np.asarray(rates, dtype=float)
    best = np.full(rates.shape, np.inf)
    for d, _, h in _grid_measures(p, den):
        for i, r in enumerate(rates):
            ok = h >= r - slack
            if ok.any():
                best[i] = min(best[i], d[ok].min())
    return best


def si_upper_grid(p, rate: float, alphas: Sequence[float], den: int = 200,
                  slack: float = 1e-9) -> float:
    """Exhaustive ``(alpha, q)`` grid for the decoder-only side-information bound."""
    alphas = np.asarray(alphas, dtype=float)
    best = np.inf
    for d, dx, h in _grid_measures(p, den):
        for a in alphas:
            ok = h >= (1.0 + a) * rate - slack
            if not ok.any():
                continue
            if a >= 1.0:
                val = d[ok] / a
            else:
                val = (1.0 - a) / a * dx[ok] + d[ok]
            best = min(best, float(val.min()))
    return best


def focusing_grid(p, rate: float, alphas: Sequence[float], den: int = 400) -> float:
    """``min over alpha of block_upper_grid((1+alpha) R) / alpha``."""
    alphas = np.asarray(alphas, dtype=float)
    vals = block_upper_grid(p, (1.0 + alphas) * rate, den)
    return float(np.min(vals / alphas))
