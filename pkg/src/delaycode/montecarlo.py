"""Monte Carlo estimates of per-symbol error probability against decoding delay.

Every trial draws from its own generator seeded by ``(seed, delta, trial)``,
so results do not depend on how trials are scheduled across threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats
from statsmodels.stats.proportion import proportion_confint

from .coding.baseline import codebook_for
from .coding.prefix import PrefixCode, ternary_prefix_code
from .coding.stream import as_rate, fifo_block_schedule
from .coding.universal import UniversalCode, multinomial
from .exponents import block_upper
from .oracles import compositions
from .queue_analysis import QueueWalkParams, stationary
from .source_model import (JointDistribution, SingleDistribution, conditional_entropy,
                           resolve_distribution)

SCHEMES = ("prefix", "universal", "block")
RARE_EVENTS = 10
RESULTS_HEADER = ("scheme", "rate_num", "rate_den", "delta", "errors", "symbols",
                  "p_hat", "ci_lo", "ci_hi", "flag")


class UnknownScheme(ValueError):
    pass


@dataclass
class SimConfig:
    scheme: str
    source: JointDistribution | SingleDistribution
    rate_num: int
    rate_den: int
    delays: Sequence[int]
    trials: int = 10
    symbols_per_trial: int = 100_000
    seed: int = 0
    block_len: int = 8
    burn_in_blocks: int = 1000
    threads: int | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise UnknownScheme(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        self.source = resolve_distribution(self.source)
        self.delays = [int(d) for d in self.delays]
        if self.trials < 1 or self.symbols_per_trial < 1:
            raise ValueError("trials and symbols_per_trial must be positive")
        if not self.delays or min(self.delays) < 0:
            raise ValueError("need at least one nonnegative delay")
        as_rate((self.rate_num, self.rate_den))

    @property
    def rate(self) -> tuple[int, int]:
        return int(self.rate_num), int(self.rate_den)

    def to_json(self) -> dict:
        out = asdict(self)
        src = self.source
        out["source"] = src.to_json() if isinstance(src, JointDistribution) \
            else {"probs": src.probs.tolist()}
        out.pop("threads")
        return out

    @classmethod
    def from_json(cls, obj) -> "SimConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        obj = dict(obj)
        if "dist" in obj:
            obj["source"] = obj.pop("dist")
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**obj)


@dataclass
class ErrorEstimate:
    delta: int
    errors: int
    symbols: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    # Standard error from the spread across trials; captures burstiness.
    trial_se: float = 0.0
    flag: str = ""

    @property
    def binomial_se(self) -> float:
        return math.sqrt(max(self.p_hat * (1 - self.p_hat), 0.0) / self.symbols)

    @property
    def sigma(self) -> float:
        return max(self.trial_se, self.binomial_se)


def _rng(seed: int, delta: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(delta), int(trial)]))


def _single(src) -> np.ndarray:
    if isinstance(src, SingleDistribution):
        return src.probs
    if src.y_size == 1:
        return src.probs[:, 0]
    raise ValueError("this scheme needs a source without side-information")


def _joint(src) -> JointDistribution:
    return src.as_joint() if isinstance(src, SingleDistribution) else src


def _late_symbols(finish: np.ndarray, block_len: int, delta: int) -> np.ndarray:
    """Per block, how many of its symbols are decoded after their deadline."""
    k = np.arange(len(finish), dtype=np.int64)
    late = np.zeros(len(finish), dtype=np.int64)
    for j in range(1, block_len + 1):
        late += (finish - (k * block_len + j)) > delta
    return late


def prefix_length_table(code: PrefixCode) -> np.ndarray:
    """Codeword lengths indexed by the block read as a base-``|X|`` number."""
    m, n = code.alphabet_size, code.block_len
    table = np.zeros(m ** n, dtype=np.int64)
    for block, word in code.codebook.items():
        idx = 0
        for s in block:
            idx = idx * m + s
        table[idx] = len(word)
    return table


def prefix_block_lengths(rng, probs, code: PrefixCode, n_blocks: int) -> np.ndarray:
    x = rng.choice(len(probs), size=(n_blocks, code.block_len), p=probs)
    idx = np.zeros(n_blocks, dtype=np.int64)
    for col in range(code.block_len):
        idx = idx * code.alphabet_size + x[:, col]
    return prefix_length_table(code)[idx]


def universal_block_lengths(rng, p: JointDistribution, code: UniversalCode,
                            n_blocks: int) -> np.ndarray:
    """Sample joint types directly; the codeword length depends on nothing else."""
    types = rng.multinomial(code.block_len, p.probs.ravel(), size=n_blocks)
    uniq, inv = np.unique(types, axis=0, return_inverse=True)
    lens = np.array([code.length_from_counts(t.reshape(p.x_size, p.y_size)) for t in uniq])
    return lens[np.ravel(inv)]


def _streaming_trial(cfg: SimConfig, delta: int, trial: int) -> tuple[int, int]:
    rng = _rng(cfg.seed, delta, trial)
    if cfg.scheme == "prefix":
        code = ternary_prefix_code()
        probs = _single(cfg.source)
        if len(probs) != code.alphabet_size:
            raise ValueError("the prefix scheme is defined for ternary sources")
        n = code.block_len
        n_blocks = cfg.symbols_per_trial // n + cfg.burn_in_blocks
        lengths = prefix_block_lengths(rng, probs, code, n_blocks)
    else:
        p = _joint(cfg.source)
        code = UniversalCode(p.x_size, p.y_size, cfg.block_len)
        n = code.block_len
        n_blocks = cfg.symbols_per_trial // n + cfg.burn_in_blocks
        lengths = universal_block_lengths(rng, p, code, n_blocks)
    _, finish = fifo_block_schedule(lengths, n, cfg.rate)
    late = _late_symbols(finish, n, delta)[cfg.burn_in_blocks:]
    return int(late.sum()), int(late.size * n)


def _block_trial(cfg: SimConfig, delta: int, trial: int) -> tuple[int, int]:
    rng = _rng(cfg.seed, delta, trial)
    probs = _single(cfg.source)
    book = codebook_for(probs, delta, cfg.rate)
    n = book.block_len
    n_blocks = max(cfg.symbols_per_trial // n, 1)
    rows = book.type_coverage()
    index = {c: i for i, (c, _, _) in enumerate(rows)}
    covered = np.array([float(Fraction(cover, m)) for _, m, cover in rows])
    guess = book.decode(0)[0]
    types = rng.multinomial(n, probs, size=n_blocks)
    which = np.array([index[tuple(t)] for t in types.tolist()])
    miss = rng.random(n_blocks) >= covered[which]
    wrong = n - types[:, guess]
    return int(wrong[miss].sum()), int(n_blocks * n)


def _run_trial(cfg: SimConfig, delta: int, trial: int) -> tuple[int, int]:
    if cfg.scheme == "block":
        return _block_trial(cfg, delta, trial)
    return _streaming_trial(cfg, delta, trial)


def make_estimate(delta: int, per_trial: Sequence[tuple[int, int]]) -> ErrorEstimate:
    errs = np.array([e for e, _ in per_trial], dtype=float)
    syms = np.array([s for _, s in per_trial], dtype=float)
    errors, symbols = int(errs.sum()), int(syms.sum())
    p_hat = errors / symbols
    lo, hi = proportion_confint(errors, symbols, alpha=0.05, method="wilson")
    se = float(np.std(errs / syms, ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else 0.0
    return ErrorEstimate(delta, errors, symbols, p_hat, float(min(lo, p_hat)),
                         float(max(hi, p_hat)), se, "rare" if errors < RARE_EVENTS else "")


def estimate_error_vs_delay(cfg: SimConfig) -> list[ErrorEstimate]:
    """Per-symbol error frequency at each delay in ``cfg.delays``.

    A symbol counts as an error when it is wrong or not yet decoded at its
    deadline. The first ``burn_in_blocks`` blocks of a streaming trial are
    simulated but not counted, so the queue starts near stationarity.
    """
    tasks = [(d, t) for d in cfg.delays for t in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(lambda dt: _run_trial(cfg, *dt), tasks))
    out = []
    for i, delta in enumerate(cfg.delays):
        out.append(make_estimate(delta, results[i * cfg.trials:(i + 1) * cfg.trials]))
    return out


def _fmt(x: float) -> str:
    return format(x, ".9g")


def results_csv(cfg: SimConfig, estimates: Sequence[ErrorEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for e in estimates:
        w.writerow([cfg.scheme, cfg.rate_num, cfg.rate_den, e.delta, e.errors, e.symbols,
                    _fmt(e.p_hat), _fmt(e.ci_lo), _fmt(e.ci_hi), e.flag])
    return buf.getvalue()


# -- regression ------------------------------------------------------------------


def regression_points(estimates: Sequence[ErrorEstimate],
                      include_rare: bool = False) -> list[tuple[int, float]]:
    """``(delta, log10 p_hat)`` pairs, skipping zero and (by default) rare estimates."""
    return [(e.delta, math.log10(e.p_hat)) for e in estimates
            if e.errors > 0 and (include_rare or e.flag != "rare")]


def fit_line(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log10 Pe`` against delay."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2 or len(np.unique(pts[:, 0])) < 2:
        raise ValueError("need at least two points with distinct delays")
    slope, intercept = np.polyfit(pts[:, 0], pts[:, 1], 1)
    return float(slope), float(intercept)


def regression_extrapolate(points: Sequence[tuple[float, float]], target_log10: float) -> float:
    """Delay at which the fitted line reaches ``target_log10``."""
    slope, intercept = fit_line(points)
    if abs(slope) < 1e-15:
        raise ValueError("fitted line is flat and never reaches the target")
    return (target_log10 - intercept) / slope


def isotonic_violation(estimates: Sequence[ErrorEstimate]) -> float:
    """Largest increase of ``p_hat`` with delay, in units of the larger sigma."""
    worst = 0.0
    for a, b in zip(estimates, estimates[1:]):
        if b.p_hat > a.p_hat:
            worst = max(worst, (b.p_hat - a.p_hat) / max(a.sigma, b.sigma, 1e-300))
    return worst


# -- queue histogram ---------------------------------------------------------------


def prefix_queue_samples(a: float, n_blocks: int, seed: int, thin: int = 500,
                         burn_in: int = 1000) -> np.ndarray:
    """Backlog of the ternary prefix scheme seen every ``thin`` blocks.

    Thinning makes the samples close to independent so that a chi-square
    test against the stationary law is meaningful.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB10C]))
    probs = np.array([a, (1 - a) / 2, (1 - a) / 2])
    lengths = prefix_block_lengths(rng, probs, ternary_prefix_code(), n_blocks + burn_in)
    backlog, _ = fifo_block_schedule(lengths, 2, (3, 2))
    return backlog[burn_in::thin]


def queue_chi_square(samples: np.ndarray, a: float, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square goodness of fit of backlog samples to ``Z r^k``.

    States are pooled from the top until every cell expects at least
    ``min_expected`` counts. Returns ``(statistic, p_value, cells)``.
    """
    an = stationary(QueueWalkParams.from_source(a))
    n = len(samples)
    k_max = 0
    while n * an.tail(k_max + 1) >= min_expected:
        k_max += 1
    # Cells 0..k_max-1 are single states; the last pools k >= k_max.
    expected = np.append(n * an.pmf(np.arange(k_max)), n * an.tail(k_max))
    observed = np.append(np.bincount(np.minimum(samples, k_max), minlength=k_max + 1)[:k_max],
                         np.sum(samples >= k_max))
    res = stats.chisquare(observed, expected)
    return float(res.statistic), float(res.pvalue), len(expected)


# -- large-deviation tail of universal codeword lengths ------------------------------


def block_length_distribution(p, block_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of the universal codeword length for one block, by type enumeration."""
    p = _joint(resolve_distribution(p))
    code = UniversalCode(p.x_size, p.y_size, block_len)
    flat = p.probs.ravel()
    mass: dict[int, float] = {}
    with np.errstate(divide="ignore"):
        logp = np.log(flat)
    for c in compositions(block_len, flat.size):
        if np.any((c > 0) & (flat == 0)):
            continue
        lp = math.log(multinomial(c.tolist())) + float(np.dot(c[c > 0], logp[c > 0]))
        length = code.length_from_counts(c.reshape(p.x_size, p.y_size))
        mass[length] = mass.get(length, 0.0) + math.exp(lp)
    lengths = np.array(sorted(mass))
    return lengths, np.array([mass[l] for l in lengths])


@dataclass
class TailReport:
    n: int
    threshold_bits: float
    trials: int
    hits: int
    frequency: float
    empirical_exponent: float
    exact_tail: float
    exact_exponent: float
    reference: float = field(default=math.nan)


def _exact_sum_tail(lengths, probs, n: int, threshold: float) -> float:
    pmf = np.zeros(int(lengths.max()) + 1)
    pmf[lengths] = probs
    total = np.array([1.0])
    for _ in range(n):
        total = np.convolve(total, pmf)
    k = int(math.floor(threshold)) + 1
    return float(total[k:].sum()) if k < len(total) else 0.0


def lemma1_tail_check(p, block_len: int, n_list: Sequence[int], rate: float,
                      trials: int = 100_000, seed: int = 0,
                      chunk: int = 1_000_000) -> list[TailReport]:
    """Frequency of ``sum_{i<=n} l_i > n N rate`` for i.i.d. universal codeword lengths.

    Reports the empirical exponent ``-(1/(nN)) log2(freq)`` next to the exact
    tail (by convolution) and the reference ``block_upper(p, rate) - eps_N``.
    """
    p = _joint(resolve_distribution(p))
    if block_len < 8:
        raise ValueError("block length must be at least 8")
    h = conditional_entropy(p)
    if not h < rate < math.log2(p.x_size):
        raise ValueError(f"rate must lie strictly between H(x|y) = {h:.6g} and log2|X|")
    lengths, probs = block_length_distribution(p, block_len)
    eps = UniversalCode(p.x_size, p.y_size, block_len).epsilon_bound()
    ref = block_upper(p, rate) - eps
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(block_len)]))
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    out = []
    for n in n_list:
        thr = n * block_len * rate
        hits, done = 0, 0
        per = max(chunk // n, 1)
        while done < trials:
            m = min(per, trials - done)
            draws = lengths[np.searchsorted(cdf, rng.random((m, n)), side="right").clip(max=len(lengths) - 1)]
            hits += int(np.sum(draws.sum(axis=1) > thr))
            done += m
        freq = hits / trials
        exact = _exact_sum_tail(lengths, probs, n, thr)
        scale = n * block_len
        out.append(TailReport(
            n=n, threshold_bits=thr, trials=trials, hits=hits, frequency=freq,
            empirical_exponent=-math.log2(freq) / scale if freq > 0 else math.inf,
            exact_tail=exact,
            exact_exponent=-math.log2(exact) / scale if exact > 0 else math.inf,
            reference=ref))
    return out
