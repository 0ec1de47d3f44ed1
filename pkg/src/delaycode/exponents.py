"""Reliability functions for lossless source coding with side-information.

All exponents are in bits per source symbol and may be ``math.inf``. The
rho-domain forms are evaluated by bisection on the (monotone) derivative of
Gallager's function; the distribution-domain bound for decoder-only
side-information is a convex program solved numerically.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .source_model import (
    LN2,
    JointDistribution,
    SingleDistribution,
    conditional_entropy,
    gallager_e0,
    is_conditionally_uniform,
    max_conditional_support,
    tilted_distribution,
    tilted_conditional_entropy,
)

RHO_MAX = 1e4
RHO_TOL = 1e-10
INF = math.inf

# Geometric alpha grid for the decoder-only side-information bound.
SI_ALPHA_GRID = np.unique(np.concatenate([np.geomspace(1e-2, 1e2, 60), [1.0]]))
FOCUSING_ALPHA_GRID = np.geomspace(1e-3, 1e3, 50)

BOUND_KINDS = ("lower", "upper", "focusing", "si_upper")
CSV_HEADER = ("rate", "E_lower_block", "E_upper_block", "E_focusing", "E_si_upper")


def _joint(p) -> JointDistribution:
    if isinstance(p, SingleDistribution):
        return p.as_joint()
    return p


def _bisect(f: Callable[[float], float], target: float, lo: float, hi: float,
            tol: float = RHO_TOL) -> float:
    """Smallest-bracket bisection for an increasing ``f`` with f(lo) < target <= f(hi)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def _bracket(f: Callable[[float], float], target: float) -> float | None:
    """Upper end of a bracket for ``f(rho) >= target``, or None past ``RHO_MAX``."""
    hi = 1.0
    while f(hi) < target:
        if hi >= RHO_MAX:
            return None
        hi = min(2.0 * hi, RHO_MAX)
    return hi


def _log2_support(p: JointDistribution) -> float:
    return math.log2(max_conditional_support(p))


def _rho_for_slope(p: JointDistribution, rate: float) -> float | None:
    """The rho where dE0/drho = rate, or None if the rate is never reached."""
    f = lambda r: tilted_conditional_entropy(p, r)
    hi = _bracket(f, rate)
    if hi is None:
        return None
    return _bisect(f, rate, 0.0, hi)


def block_upper(p, rate: float) -> float:
    """Block exponent with encoder side-information, ``sup_{rho>=0} rho R - E0(rho)``."""
    p = _joint(p)
    if rate <= conditional_entropy(p):
        return 0.0
    if rate >= _log2_support(p):
        return INF
    rho = _rho_for_slope(p, rate)
    if rho is None:
        return INF
    return max(rho * rate - gallager_e0(p, rho), 0.0)


def block_lower(p, rate: float) -> float:
    """Random-binning exponent, ``sup_{0<=rho<=1} rho R - E0(rho)``."""
    p = _joint(p)
    if rate <= conditional_entropy(p):
        return 0.0
    if tilted_conditional_entropy(p, 1.0) < rate:
        return max(rate - gallager_e0(p, 1.0), 0.0)
    f = lambda r: tilted_conditional_entropy(p, r)
    rho = _bisect(f, rate, 0.0, 1.0)
    return max(rho * rate - gallager_e0(p, rho), 0.0)


def critical_rate(p) -> float:
    """Rate below which the two block bounds coincide: dE0/drho at rho = 1."""
    return tilted_conditional_entropy(_joint(p), 1.0)


def focusing_rho(p, rate: float) -> float | None:
    """Root of ``E0(rho)/rho = rate``; None when the rate is not attainable."""
    p = _joint(p)
    f = lambda r: gallager_e0(p, r) / r
    hi = _bracket(f, rate)
    if hi is None:
        return None
    return _bisect(f, rate, 0.0, hi)


def focusing_bound(p, rate: float) -> float:
    """Fixed-delay exponent with encoder side-information (parametric form).

    Solves ``E0(rho) = rho R`` and returns ``E0(rho*)``.
    """
    p = _joint(p)
    if rate <= conditional_entropy(p):
        return 0.0
    if rate >= _log2_support(p):
        return INF
    rho = focusing_rho(p, rate)
    if rho is None:
        return INF
    return gallager_e0(p, rho)


def focusing_bound_direct(p, rate: float, alpha_grid: Sequence[float] | None = None) -> float:
    """``inf_{alpha>0} block_upper((1+alpha) R) / alpha`` evaluated directly.

    The grid locates the basin; a bounded scalar search in ``log alpha``
    between the neighbouring grid points polishes it.
    """
    p = _joint(p)
    if rate <= conditional_entropy(p):
        return 0.0
    grid = np.asarray(FOCUSING_ALPHA_GRID if alpha_grid is None else alpha_grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("alpha grid must be positive")
    grid = np.sort(grid)
    g = lambda a: block_upper(p, (1.0 + a) * rate) / a
    vals = np.array([g(a) for a in grid])
    i = int(np.argmin(vals))
    best = float(vals[i])
    if not math.isfinite(best):
        return INF
    lo = math.log(grid[max(i - 1, 0)])
    hi = math.log(grid[min(i + 1, len(grid) - 1)])
    if hi > lo:
        # Brent cannot interpolate through inf; cap it.
        res = minimize_scalar(lambda t: min(g(math.exp(t)), 1e300), bounds=(lo, hi),
                              method="bounded",
                              options={"xatol": 1e-10})
        if res.fun < best:
            best = float(res.fun)
    return best


def focusing_slope_at_entropy(p, h: float = 1e-3) -> float:
    """Slope of the focusing bound as the rate leaves ``H(x|y)``: ``2H / E0''(0)``."""
    p = _joint(p)
    hcond = conditional_entropy(p)
    if hcond <= 1e-15:
        return 0.0
    if is_conditionally_uniform(p):
        return INF
    d2 = (gallager_e0(p, h) - 2.0 * gallager_e0(p, 0.0) + gallager_e0(p, -h)) / (h * h)
    if d2 <= 1e-12:
        return INF
    return 2.0 * hcond / d2


# -- decoder-only side-information ------------------------------------------------


@dataclass
class SiUpperResult:
    value: float
    branch: str | None = None
    alpha: float | None = None
    q: np.ndarray | None = None


def _support_layout(p: JointDistribution):
    mask = p.probs > 0
    rows, cols = np.nonzero(mask)
    return mask, rows, cols


def penalized_divergence_min(p, weight: float, target: float,
                             x0: np.ndarray | None = None,
                             restarts: int = 3, seed: int = 0) -> tuple[float, np.ndarray | None]:
    """Minimize ``weight * D(q_x||p_x) + D(q||p)`` subject to ``H(q_{x|y}) >= target``.

    ``weight = inf`` pins the x-marginal: ``q_x = p_x``. The feasible set is
    convex and the objective convex, so a single converged SLSQP run is the
    global optimum; extra restarts only guard against a failed solve.
    Returns ``(value, q)``; ``(inf, None)`` if the target is unattainable.
    """
    p = _joint(p)
    if target >= _log2_support(p) - 1e-12:
        return INF, None
    pinned = math.isinf(weight)
    if target <= conditional_entropy(p):
        return 0.0, p.probs.copy()

    mask, rows, cols = _support_layout(p)
    pv = p.probs[mask]
    px = p.p_x
    nx, ny = p.x_size, p.y_size
    n = pv.size
    log_pv = np.log2(pv)
    log_px = np.log2(px)
    c = 0.0 if pinned else float(weight)

    def marg_x(v):
        return np.bincount(rows, weights=v, minlength=nx)

    def marg_y(v):
        return np.bincount(cols, weights=v, minlength=ny)

    def objective(v):
        v = np.maximum(v, 1e-300)
        lv = np.log2(v)
        val = np.dot(v, lv - log_pv)
        grad = lv - log_pv + 1.0 / LN2
        if c > 0:
            qx = np.maximum(marg_x(v), 1e-300)
            lq = np.log2(qx)
            val += c * np.dot(qx, lq - log_px)
            grad = grad + c * (lq - log_px + 1.0 / LN2)[rows]
        return val, grad

    def cond_ent(v):
        v = np.maximum(v, 1e-300)
        qy = marg_y(v)[cols]
        lr = np.log2(v / qy)
        return -np.dot(v, lr) - target, -lr

    constraints = [{"type": "ineq", "fun": lambda v: cond_ent(v)[0],
                    "jac": lambda v: cond_ent(v)[1]}]
    if pinned:
        sel = np.zeros((nx, n))
        sel[rows, np.arange(n)] = 1.0
        constraints.append({"type": "eq", "fun": lambda v: sel @ v - px,
                            "jac": lambda v: sel})
    else:
        constraints.append({"type": "eq", "fun": lambda v: np.sum(v) - 1.0,
                            "jac": lambda v: np.ones_like(v)})

    starts = []
    if x0 is not None:
        starts.append(np.asarray(x0, dtype=float)[mask] if np.ndim(x0) == 2 else np.asarray(x0))
    rho = _rho_for_slope(p, target)
    if rho is not None:
        starts.append(tilted_distribution(p, rho).probs[mask])
    rng = np.random.default_rng(seed)
    starts.extend(rng.dirichlet(np.ones(n)) for _ in range(restarts))

    best_val, best_q = INF, None
    for k, v0 in enumerate(starts):
        with warnings.catch_warnings():
            # SLSQP nudges iterates back inside the bounds and warns about it.
            warnings.filterwarnings("ignore", "Values in x were outside bounds")
            res = minimize(objective, v0, jac=True, method="SLSQP", constraints=constraints,
                           bounds=[(1e-15, 1.0)] * n,
                           options={"ftol": 1e-13, "maxiter": 1000})
        v = np.clip(res.x, 0.0, None)
        v = v / v.sum()
        feasible = cond_ent(v)[0] >= -1e-7
        if pinned:
            feasible = feasible and np.max(np.abs(marg_x(v) - px)) <= 1e-7
        if not feasible:
            continue
        val = objective(v)[0]
        if val < best_val:
            best_val = float(val)
            best_q = np.zeros_like(p.probs)
            best_q[mask] = v
        # Convex problem: one clean convergence is enough.
        if res.success and k < len(starts) - restarts:
            break
    return max(best_val, 0.0), best_q


def _branch_value(p, rate, alpha, x0=None):
    """Objective of the decoder-only bound at one alpha, minimized over q."""
    target = (1.0 + alpha) * rate
    if alpha >= 1.0:
        # inf_q D(q||p) s.t. H >= target is the block upper exponent.
        return block_upper(p, target) / alpha, "A", None
    weight = INF if alpha == 0.0 else (1.0 - alpha) / alpha
    val, q = penalized_divergence_min(p, weight, target, x0=x0)
    return val, "B", q


def si_only_upper_detail(p, rate: float, alpha_grid: Sequence[float] | None = None,
                         refine: bool = True) -> SiUpperResult:
    """Upper bound on the fixed-delay exponent when only the decoder sees ``y``.

    Minimum over two branches: ``alpha >= 1`` with ``D(q||p)/alpha`` and
    ``0 <= alpha <= 1`` with ``(1-alpha)/alpha D(q_x||p_x) + D(q||p)``, both
    under ``H(q_{x|y}) >= (1+alpha) R``. ``alpha = 0`` is the limit where the
    marginal penalty forces ``q_x = p_x``.
    """
    p = _joint(p)
    if rate <= conditional_entropy(p):
        return SiUpperResult(0.0, "B", 0.0, p.probs.copy())
    if rate >= _log2_support(p):
        return SiUpperResult(INF)
    grid = np.asarray(SI_ALPHA_GRID if alpha_grid is None else alpha_grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("alpha grid must be positive")
    alphas = np.concatenate([[0.0], np.sort(grid)])

    best = SiUpperResult(INF)
    vals = []
    x0 = None
    for a in alphas:
        v, branch, q = _branch_value(p, rate, float(a), x0)
        if q is not None:
            x0 = q
        vals.append(v)
        if v < best.value:
            best = SiUpperResult(float(v), branch, float(a), q)

    if refine and math.isfinite(best.value) and best.alpha and best.alpha > 0:
        i = int(np.searchsorted(alphas, best.alpha))
        lo = alphas[max(i - 1, 1)]
        hi = alphas[min(i + 1, len(alphas) - 1)]
        if hi > lo:
            res = minimize_scalar(lambda t: _branch_value(p, rate, math.exp(t), best.q)[0],
                                  bounds=(math.log(lo), math.log(hi)), method="bounded",
                                  options={"xatol": 1e-4, "maxiter": 25})
            if res.fun < best.value:
                a = math.exp(res.x)
                v, branch, q = _branch_value(p, rate, a, best.q)
                best = SiUpperResult(float(v), branch, a, q)
    return best


def si_only_upper(p, rate: float, alpha_grid: Sequence[float] | None = None) -> float:
    return si_only_upper_detail(p, rate, alpha_grid).value


def symmetric_si_upper(p_s: SingleDistribution, rate: float) -> float:
    """``sup_rho rho R - (1+rho) log2 sum_s p_s(s)^(1/(1+rho))``.

    This is the point-to-point block exponent of the noise ``s``; for a
    symmetric joint ``x = y + s`` it coincides with the decoder-only bound.
    """
    if not isinstance(p_s, SingleDistribution):
        p_s = SingleDistribution(p_s)
    return block_upper(p_s.as_joint(), rate)


# -- curves ------------------------------------------------------------------------


_BOUNDS: dict[str, Callable] = {
    "lower": block_lower,
    "upper": block_upper,
    "focusing": focusing_bound,
    "si_upper": si_only_upper,
}


@dataclass
class ExponentCurve:
    kind: str
    rates: np.ndarray
    exponents: np.ndarray

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        self.exponents = np.asarray(self.exponents, dtype=float)
        if self.rates.shape != self.exponents.shape:
            raise ValueError("rates and exponents differ in length")
        if np.any(np.diff(self.rates) <= 0):
            raise ValueError("rates must be strictly increasing")
        if np.any(self.exponents < 0):
            raise ValueError("exponents must be nonnegative")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.rates.tolist(), self.exponents.tolist()))


def _check_grid(rates) -> np.ndarray:
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if rates.size == 0:
        raise ValueError("empty rate grid")
    if np.any(np.diff(rates) <= 0):
        raise ValueError("rate grid must be strictly increasing")
    return rates


def curve(p, kind: str, rates: Sequence[float], threads: int | None = None) -> ExponentCurve:
    """Evaluate one bound on a rate grid. Threads do not change the result."""
    if kind not in _BOUNDS:
        raise ValueError(f"unknown bound {kind!r}; expected one of {BOUND_KINDS}")
    rates = _check_grid(rates)
    p = _joint(p)
    fn = _BOUNDS[kind]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(lambda r: fn(p, r), rates))
    else:
        vals = [fn(p, r) for r in rates]
    return ExponentCurve(kind, rates, np.array(vals))


def curves_table(p, rates: Sequence[float], threads: int | None = None,
                 kinds: Sequence[str] = BOUND_KINDS) -> dict[str, ExponentCurve]:
    return {k: curve(p, k, rates, threads) for k in kinds}


def format_value(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def parse_value(s: str) -> float:
    return float(s)


def curves_csv(table: dict[str, ExponentCurve]) -> str:
    """Serialize a full table (all four bounds) using ``CSV_HEADER``."""
    order = ("lower", "upper", "focusing", "si_upper")
    missing = [k for k in order if k not in table]
    if missing:
        raise ValueError(f"table is missing bounds {missing}")
    rates = table["upper"].rates
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i, r in enumerate(rates):
        w.writerow([format_value(r)] + [format_value(table[k].exponents[i]) for k in order])
    return buf.getvalue()


def read_curves_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"unexpected header {rows[0]}")
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(CSV_HEADER)
    return {name: np.array([parse_value(v) for v in col]) for name, col in zip(CSV_HEADER, cols)}
