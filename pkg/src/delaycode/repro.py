"""Reproduction checks for the ternary example and the general bounds.

Each check returns a :class:`CriterionResult`; ``run_all`` runs the full
set. A check passes only if its value is within tolerance and it finished
inside its time budget.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coding.baseline import codebook_for
from .coding.prefix import ternary_prefix_code
from .coding.universal import UniversalCode
from .exponents import (block_lower, block_upper, critical_rate, focusing_bound,
                        focusing_bound_direct, si_only_upper, symmetric_si_upper)
from .montecarlo import (SimConfig, estimate_error_vs_delay, fit_line, prefix_queue_samples,
                         queue_chi_square)
from .oracles import block_upper_grid
from .queue_analysis import (QueueWalkParams, delay_error_bound, min_delay_for, scheme_exponent,
                             stationary)
from .source_model import (JointDistribution, SingleDistribution, bsc_joint,
                           conditional_entropy, gallager_e0, tilted_conditional_entropy,
                           ternary_source)

DEFAULT_A = 0.65


@dataclass
class CriterionResult:
    id: int
    name: str
    expected: str
    got: dict
    tol: str
    passed: bool
    seconds: float = 0.0
    limit: float = math.inf
    detail: str = ""

    def to_json(self) -> dict:
        return {"id": self.id, "criterion": self.name, "expected": self.expected,
                "got": self.got, "tol": self.tol, "pass": self.passed,
                "seconds": round(self.seconds, 3), "limit_seconds": self.limit}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        got = ", ".join(f"{k}={_short(v)}" for k, v in self.got.items())
        return f"[{status}] {self.id:2d} {self.name}: {got} (expected {self.expected}; " \
               f"{self.seconds:.1f}s of {self.limit:g}s)"


def _short(v):
    if isinstance(v, float):
        return format(v, ".6g")
    if isinstance(v, (list, tuple)) and (len(v) > 6 or any(isinstance(e, list) for e in v)):
        return f"[{len(v)} values]"
    return v


@dataclass
class Settings:
    a: float = DEFAULT_A
    seed: int = 20240611
    threads: int | None = None
    # Monte Carlo budget for the simulation checks.
    mc_pairs: int = 10_000_000
    mc_trials: int = 10
    queue_blocks: int = 10_000_000

    @property
    def source(self) -> SingleDistribution:
        return ternary_source(self.a)


def _within(x: float, target: float, tol: float) -> bool:
    return abs(x - target) <= tol


# -- individual checks ---------------------------------------------------------------


def c01_critical_rate(s: Settings) -> CriterionResult:
    v = tilted_conditional_entropy(s.source, 1.0)
    return CriterionResult(1, "critical rate", "1.509", {"critical_rate": v}, "0.002",
                           _within(v, 1.509, 0.002), limit=1.0)


def c02_queue_constants(s: Settings) -> CriterionResult:
    an = stationary(QueueWalkParams.from_source(s.a))
    ok = _within(an.Z, 0.228, 5e-4) and _within(an.G, 0.360, 5e-4)
    return CriterionResult(2, "queue constants", "Z=0.228, G=0.360",
                           {"q": an.q, "Z": an.Z, "G": an.G}, "5e-4", ok, limit=1.0)


def ratio_grid(p, lo: float = 1.30, hi: float = 1.55, n: int = 200):
    """``focusing / block_upper`` on a grid; NaN where the block exponent is zero."""
    rates = np.linspace(lo, hi, n)
    ratio = []
    for r in rates:
        up = block_upper(p, r)
        ratio.append(focusing_bound(p, r) / up if up > 0 else math.nan)
    return rates, np.array(ratio)


def c03_ignorance_ratio(s: Settings) -> CriterionResult:
    rates, ratio = ratio_grid(s.source)
    i = int(np.nanargmin(ratio))
    ok = 47 <= ratio[i] <= 57 and 1.40 <= rates[i] <= 1.50
    return CriterionResult(3, "ignorance ratio", "min in [47, 57] at rate in [1.40, 1.50]",
                           {"min_ratio": float(ratio[i]), "at_rate": float(rates[i])},
                           "range", bool(ok), limit=30.0)


def c04_prefix_delay(s: Settings) -> CriterionResult:
    an = stationary(QueueWalkParams.from_source(s.a))
    d = min_delay_for(an, 1e-6)
    return CriterionResult(4, "prefix-scheme delay", "smallest odd delay in [35, 45]",
                           {"delta": d, "bound": delay_error_bound(an, d)}, "range",
                           35 <= d <= 45, limit=1.0)


def ordering_grid(p, n: int = 100) -> np.ndarray:
    h = conditional_entropy(p)
    top = math.log2(p.size if isinstance(p, SingleDistribution) else p.x_size)
    return np.linspace(h + 0.01 * (top - h), top - 0.02 * (top - h), n)


def c05_ordering(s: Settings) -> CriterionResult:
    p = s.source
    rates = ordering_grid(p)
    rc = critical_rate(p)
    worst_order, worst_eq = 0.0, 0.0
    for r in rates:
        lo, up, fo = block_lower(p, r), block_upper(p, r), focusing_bound(p, r)
        worst_order = max(worst_order, lo - up, up - fo)
        if r <= rc:
            worst_eq = max(worst_eq, abs(lo - up))
    ok = worst_order <= 1e-12 and worst_eq <= 1e-6
    return CriterionResult(5, "bound ordering", "lower <= upper <= focusing; equal below Rcr",
                           {"max_order_violation": worst_order, "max_gap_below_rcr": worst_eq,
                            "critical_rate": rc}, "1e-6", ok, limit=30.0)


def c06_parametric(s: Settings) -> CriterionResult:
    p = s.source
    worst = 0.0
    for r in ordering_grid(p):
        a, b = focusing_bound(p, r), focusing_bound_direct(p, r)
        if math.isfinite(a) or math.isfinite(b):
            worst = max(worst, abs(a - b))
    return CriterionResult(6, "parametric focusing", "parametric = direct",
                           {"max_abs_diff": worst}, "1e-4", worst <= 1e-4, limit=60.0)


_ORACLE_SHAPES = [(2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (2, 2), (2, 3), (3, 2)]
_ORACLE_DEN = {2: 4000, 3: 1000, 4: 300, 5: 150, 6: 80}


def random_joints(seed: int, count: int = 10) -> list[JointDistribution]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        nx, ny = _ORACLE_SHAPES[rng.integers(len(_ORACLE_SHAPES))]
        out.append(JointDistribution(rng.dirichlet(2.0 * np.ones(nx * ny)).reshape(nx, ny)))
    return out


def oracle_rates(p: JointDistribution) -> np.ndarray:
    h = conditional_entropy(p)
    return h + (math.log2(p.x_size) - h) * np.array([0.1, 0.3, 0.5, 0.7, 0.9])


def c07_oracle(s: Settings) -> CriterionResult:
    worst = 0.0
    for p in random_joints(s.seed):
        rates = oracle_rates(p)
        grid = block_upper_grid(p, rates, den=_ORACLE_DEN[p.probs.size])
        rho = np.array([block_upper(p, r) for r in rates])
        worst = max(worst, float(np.max(np.abs(grid - rho))))
    return CriterionResult(7, "oracle equivalence", "rho-form = simplex grid",
                           {"max_abs_diff": worst}, "2e-2", worst <= 2e-2, limit=300.0)


def c08_symmetric(s: Settings) -> CriterionResult:
    p = bsc_joint(0.2)
    noise = SingleDistribution([0.8, 0.2])
    worst = 0.0
    rows = []
    for r in np.linspace(0.75, 0.95, 5):
        r = float(r)
        si, up, sym = si_only_upper(p, r), block_upper(p, r), symmetric_si_upper(noise, r)
        rows.append([r, float(si), float(up), float(sym)])
        worst = max(worst, abs(si - up), abs(si - sym), abs(up - sym))
    return CriterionResult(8, "symmetric collapse", "si_only = block_upper = symmetric",
                           {"max_abs_diff": worst, "rows": rows}, "2e-2", worst <= 2e-2,
                           limit=120.0)


def c09_tilt_identity(s: Settings) -> CriterionResult:
    rng = np.random.default_rng(s.seed + 9)
    sources = [s.source.as_joint(), bsc_joint(0.2)] + random_joints(s.seed + 9, 3)
    h = 1e-5
    worst = 0.0
    for k in range(20):
        p = sources[k % len(sources)]
        rho = float(rng.uniform(-0.5, 3.0))
        fd = (gallager_e0(p, rho + h) - gallager_e0(p, rho - h)) / (2 * h)
        worst = max(worst, abs(fd - tilted_conditional_entropy(p, rho)))
    return CriterionResult(9, "tilt identity", "dE0/drho = H(tilted)",
                           {"max_abs_diff": worst}, "1e-6", worst <= 1e-6, limit=1.0)


def c10_simulation(s: Settings) -> CriterionResult:
    deltas = [5, 7, 9, 11]
    an = stationary(QueueWalkParams.from_source(s.a))
    cfg = SimConfig("prefix", s.source, 3, 2, deltas, trials=s.mc_trials,
                    symbols_per_trial=2 * s.mc_pairs // s.mc_trials, seed=s.seed,
                    threads=s.threads)
    est = estimate_error_vs_delay(cfg)
    margins = [(e.p_hat - delay_error_bound(an, e.delta)) / e.sigma for e in est]
    samples = prefix_queue_samples(s.a, s.queue_blocks, s.seed)
    stat, pval, cells = queue_chi_square(samples, s.a)
    ok = max(margins) <= 3.0 and pval >= 0.05
    got = {"p_hat": [e.p_hat for e in est],
           "bound": [delay_error_bound(an, d) for d in deltas],
           "max_sigma_excess": max(margins), "chi2": stat, "chi2_p": pval, "cells": cells}
    return CriterionResult(10, "simulation soundness", "p_hat <= bound + 3 sigma; chi2 p >= 0.05",
                           got, "3 sigma / 5%", ok, limit=300.0)


def c11_codecs(s: Settings) -> CriterionResult:
    code = ternary_prefix_code()
    prefix_ok = all(code.decode(code.encode(b)) == [b] for b in code.codebook)
    uc = UniversalCode(2, 2, 2)
    blocks = list(itertools.product(range(2), repeat=2))
    universal_ok = all(uc.decode(uc.encode(x, y), y) == x for x in blocks for y in blocks)
    rng = np.random.default_rng(s.seed + 11)
    big = UniversalCode(2, 2, 64)
    violations = 0
    for _ in range(10_000):
        probs = rng.dirichlet(np.ones(4)).reshape(2, 2)
        flat = rng.choice(4, size=64, p=probs.ravel())
        x, y = flat // 2, flat % 2
        lo, hi = big.length_bounds(x, y)
        length = big.length(x, y)
        violations += not (lo - 1e-9 <= length <= hi + 1e-9)
    ok = prefix_ok and universal_ok and violations == 0
    return CriterionResult(11, "codec totality", "exhaustive round trips; length bounds hold",
                           {"prefix_round_trip": prefix_ok, "universal_round_trip": universal_ok,
                            "length_violations": violations}, "exact", ok, limit=60.0)


def block_baseline_slope(p, deltas=range(80, 101, 2), rate=(3, 2)) -> float:
    """Slope of ``-log2 Pe`` against delay for the exact block baseline."""
    deltas = list(deltas)
    pe = [codebook_for(p, d, rate).symbol_error_probability() for d in deltas]
    return -fit_line(list(zip(deltas, np.log2(pe))))[0]


def prefix_scheme_slope(s: Settings, deltas=range(5, 22, 2)) -> float:
    cfg = SimConfig("prefix", s.source, 3, 2, list(deltas), trials=s.mc_trials,
                    symbols_per_trial=2 * s.mc_pairs // s.mc_trials, seed=s.seed + 12,
                    threads=s.threads)
    est = [e for e in estimate_error_vs_delay(cfg) if e.errors > 0]
    return -fit_line([(e.delta, math.log2(e.p_hat)) for e in est])[0]


def c12_baselines(s: Settings) -> CriterionResult:
    p = s.source
    target_prefix = scheme_exponent(stationary(QueueWalkParams.from_source(s.a)))
    target_block = block_upper(p, 1.5) / 2
    sp = prefix_scheme_slope(s)
    sb = block_baseline_slope(p.probs)
    ok = (abs(sp / target_prefix - 1) <= 0.10 and abs(sb / target_block - 1) <= 0.20
          and sp > sb)
    got = {"prefix_slope": sp, "prefix_target": target_prefix,
           "block_slope": sb, "block_target": target_block}
    return CriterionResult(12, "baseline ordering",
                           "prefix ~ exponent (10%) > block ~ E/2 (20%)", got, "10% / 20%",
                           bool(ok), limit=600.0)


CRITERIA: list[Callable[[Settings], CriterionResult]] = [
    c01_critical_rate, c02_queue_constants, c03_ignorance_ratio, c04_prefix_delay,
    c05_ordering, c06_parametric, c07_oracle, c08_symmetric, c09_tilt_identity,
    c10_simulation, c11_codecs, c12_baselines,
]


def run_one(check: Callable[[Settings], CriterionResult], settings: Settings) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = check(settings)
    except (ArithmeticError, ValueError) as exc:
        # A perturbed source can leave a check undefined; report it, don't crash.
        num = CRITERIA.index(check) + 1 if check in CRITERIA else 0
        res = CriterionResult(num, check.__name__, "a defined value", {"error": str(exc)},
                              "n/a", False, detail=type(exc).__name__)
    res.seconds = time.perf_counter() - t0
    if res.seconds > res.limit:
        res.passed = False
        res.detail = f"exceeded time budget of {res.limit:g}s"
    return res


def run_all(settings: Settings | None = None, only: set[int] | None = None,
            on_result: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    settings = settings or Settings()
    out = []
    for i, check in enumerate(CRITERIA, start=1):
        if only and i not in only:
            continue
        res = run_one(check, settings)
        if on_result:
            on_result(res)
        out.append(res)
    return out
