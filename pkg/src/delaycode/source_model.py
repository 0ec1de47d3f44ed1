"""Finite-alphabet joint sources and the information measures built on them.

Everything is in bits. Side-information is the column index ``y``; a source
without side-information is a joint with a single column.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

LN2 = math.log(2.0)
SUM_TOL = 1e-12
RENORM_TOL = 1e-9


class DistributionError(ValueError):
    """Raised for probability tables that violate the source assumptions."""


def _as_table(probs, ndim: int) -> np.ndarray:
    arr = np.array(probs, dtype=np.float64)
    if arr.ndim != ndim:
        raise DistributionError(f"expected a {ndim}-d table, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DistributionError("probabilities must be finite")
    if np.any(arr < 0):
        raise DistributionError("probabilities must be nonnegative")
    total = arr.sum()
    if abs(total - 1.0) > RENORM_TOL:
        raise DistributionError(f"probabilities sum to {total!r}, not 1")
    if abs(total - 1.0) > SUM_TOL:
        arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A pmf ``p(x, y)`` stored as an ``|X| x |Y|`` array.

    With ``strict=True`` (the default) every marginal must be positive, which
    is what a source law needs. Candidate distributions ``q`` that appear
    inside optimizations may have empty rows/columns and are built with
    ``strict=False``.
    """

    probs: np.ndarray
    strict: bool = True

    def __post_init__(self):
        arr = _as_table(self.probs, 2)
        object.__setattr__(self, "probs", arr)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DistributionError("empty alphabet")
        if self.strict:
            if arr.shape[0] < 2:
                raise DistributionError("|X| must be at least 2")
            if np.any(arr.sum(axis=1) <= 0) or np.any(arr.sum(axis=0) <= 0):
                raise DistributionError("every marginal p_x(x), p_y(y) must be positive")

    @property
    def x_size(self) -> int:
        return self.probs.shape[0]

    @property
    def y_size(self) -> int:
        return self.probs.shape[1]

    @property
    def p_x(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def to_json(self) -> dict:
        return {"x_size": self.x_size, "y_size": self.y_size,
                "probs": self.probs.ravel().tolist()}

    @classmethod
    def from_json(cls, obj) -> "JointDistribution":
        """Parse ``{"x_size", "y_size", "probs"}`` (row-major over x) or a JSON string."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            nx, ny = int(obj["x_size"]), int(obj["y_size"])
            flat = list(obj["probs"])
        except (KeyError, TypeError) as exc:
            raise DistributionError(f"malformed distribution description: {exc}") from exc
        if len(flat) != nx * ny:
            raise DistributionError(f"expected {nx * ny} probabilities, got {len(flat)}")
        return cls(np.reshape(np.array(flat, dtype=float), (nx, ny)))


@dataclass(frozen=True, eq=False)
class SingleDistribution:
    """A pmf on a single finite alphabet (a source without side-information)."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_table(self.probs, 1))

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def as_joint(self) -> JointDistribution:
        """Embed as a joint with trivial side-information (``|Y| = 1``)."""
        return JointDistribution(self.probs[:, None])

    def symmetric_joint(self) -> JointDistribution:
        """Uniform ``y`` on Z_k and ``x = y + s mod k`` with ``s`` drawn from this law."""
        k = self.size
        table = np.empty((k, k))
        for x in range(k):
            for y in range(k):
                table[x, y] = self.probs[(x - y) % k] / k
        return JointDistribution(table)


@dataclass(frozen=True)
class TiltParameter:
    rho: float

    def __post_init__(self):
        if not self.rho >= -1.0:
            raise DistributionError(f"tilt parameter must be >= -1, got {self.rho}")


@dataclass
class EmpiricalType:
    """Joint histogram of a pair of equal-length sequences."""

    counts: np.ndarray
    length: int = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise DistributionError("counts must be nonnegative")
        self.length = int(self.counts.sum())

    @classmethod
    def of(cls, x: Sequence[int], y: Sequence[int] | None, x_size: int,
           y_size: int = 1) -> "EmpiricalType":
        if y is None:
            y = [0] * len(x)
        if len(x) != len(y):
            raise ValueError("x and y must have equal length")
        counts = np.zeros((x_size, y_size), dtype=np.int64)
        np.add.at(counts, (np.asarray(x, dtype=int), np.asarray(y, dtype=int)), 1)
        return cls(counts)

    def distribution(self) -> JointDistribution:
        return JointDistribution(self.counts / self.length, strict=False)

    def conditional_entropy(self) -> float:
        """Empirical ``H(x|y)`` of the sequences, in bits."""
        return conditional_entropy(self.distribution())

    def is_typical(self, p: JointDistribution, eps: float) -> bool:
        """Every empirical frequency within ``eps`` of ``p``."""
        return bool(np.all(np.abs(self.counts / self.length - p.probs) <= eps))


def _probs(p) -> np.ndarray:
    if isinstance(p, (JointDistribution, SingleDistribution)):
        arr = p.probs
    else:
        arr = np.asarray(p, dtype=float)
    return arr if arr.ndim == 2 else arr[:, None]


def _xlog2x(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    pos = a > 0
    out[pos] = a[pos] * np.log2(a[pos])
    return out


def entropy(probs: Iterable[float]) -> float:
    """Shannon entropy of a pmf in bits."""
    return float(-_xlog2x(np.asarray(probs, dtype=float).ravel()).sum())


def conditional_entropy(p) -> float:
    """``H(x|y) = H(x, y) - H(y)`` in bits."""
    arr = _probs(p)
    h = -_xlog2x(arr).sum() + _xlog2x(arr.sum(axis=0)).sum()
    return float(max(h, 0.0))


def kl_divergence(q, p) -> float:
    """``D(q || p)`` in bits, with ``0 log 0 = 0``.

    Raises
    ------
    DistributionError
        If ``q`` puts mass where ``p`` has none.
    """
    qa, pa = _probs(q), _probs(p)
    if qa.shape != pa.shape:
        raise DistributionError(f"shape mismatch {qa.shape} vs {pa.shape}")
    support = qa > 0
    if np.any(pa[support] <= 0):
        raise DistributionError("q is not absolutely continuous with respect to p")
    d = np.sum(qa[support] * (np.log2(qa[support]) - np.log2(pa[support])))
    return float(max(d, 0.0))


def max_conditional_support(p) -> int:
    """``M(p)``: the largest number of ``x`` values with positive mass in one column."""
    return int((_probs(p) > 0).sum(axis=0).max())


def is_conditionally_uniform(p, tol: float = 1e-12) -> bool:
    """True when every nonzero ``p(x|y)`` equals ``1/M`` for one common ``M``.

    This is exactly the case where ``E0`` is linear in ``rho``.
    """
    arr = _probs(p)
    cond = arr / arr.sum(axis=0, keepdims=True)
    nz = cond[cond > 0]
    return bool(np.ptp(nz) <= tol)


def _log_column_sums(arr: np.ndarray, rho: float) -> np.ndarray:
    """Natural log of ``sum_x p(x, y)^(1/(1+rho))`` for each column."""
    with np.errstate(divide="ignore"):
        logp = np.log(arr)
    return logsumexp(logp / (1.0 + rho), axis=0)


def _check_rho(rho: float, arr: np.ndarray) -> None:
    if rho < -1.0:
        raise DistributionError(f"tilt parameter must be >= -1, got {rho}")
    if rho == -1.0 and np.any((arr > 0).sum(axis=0) > 1):
        raise DistributionError("E0 diverges at rho = -1 when a column has more than one "
                                "symbol in its support")


def gallager_e0(p, rho: float) -> float:
    """Gallager's function ``log2 sum_y (sum_x p(x,y)^(1/(1+rho)))^(1+rho)``."""
    rho = float(getattr(rho, "rho", rho))
    arr = _probs(p)
    _check_rho(rho, arr)
    if rho == -1.0:
        return float(np.log2(arr.max(axis=0).sum()))
    val = logsumexp((1.0 + rho) * _log_column_sums(arr, rho)) / LN2
    return float(val)


def tilted_distribution(p, rho: float) -> JointDistribution:
    """The x-y tilted distribution of ``p`` at parameter ``rho > -1``.

    Each column keeps the shape ``p(x, y)^(1/(1+rho))`` and the columns are
    reweighted in proportion to ``(sum_x p(x, y)^(1/(1+rho)))^(1+rho)``.
    """
    rho = float(getattr(rho, "rho", rho))
    arr = _probs(p)
    if not rho > -1.0:
        raise DistributionError("tilted distribution needs rho > -1")
    log_s = _log_column_sums(arr, rho)
    log_col = (1.0 + rho) * log_s
    col_w = np.exp(log_col - logsumexp(log_col))
    with np.errstate(divide="ignore"):
        inner = np.exp(np.log(arr) / (1.0 + rho) - log_s[None, :])
    table = inner * col_w[None, :]
    return JointDistribution(table / table.sum(), strict=False)


def tilted_conditional_entropy(p, rho: float) -> float:
    """``H(x|y)`` under the tilted distribution; equals ``dE0/drho``."""
    return conditional_entropy(tilted_distribution(p, rho))


# Named sources used throughout the experiments.

def ternary_source(a: float = 0.65) -> SingleDistribution:
    """``{A, B, C}`` with masses ``(a, (1-a)/2, (1-a)/2)``."""
    return SingleDistribution([a, (1.0 - a) / 2.0, (1.0 - a) / 2.0])


def bsc_joint(eps: float) -> JointDistribution:
    """Uniform binary ``y`` and ``x = y xor s`` with ``P(s = 1) = eps``."""
    return SingleDistribution([1.0 - eps, eps]).symmetric_joint()


def uniform_source(k: int) -> SingleDistribution:
    return SingleDistribution(np.full(k, 1.0 / k))


_NAMED = re.compile(r"^\s*(ternary|bsc|uniform)\s*\(\s*([^)]*)\)\s*$")


def distribution_from_json(obj) -> JointDistribution | SingleDistribution:
    """``{"probs": [...]}`` gives a single source; with ``x_size``/``y_size`` a joint."""
    if isinstance(obj, list):
        return SingleDistribution(obj)
    if not isinstance(obj, dict):
        raise DistributionError("distribution JSON must be an object or a list")
    if "x_size" in obj or "y_size" in obj:
        return JointDistribution.from_json(obj)
    if "probs" not in obj:
        raise DistributionError("distribution JSON needs a 'probs' field")
    return SingleDistribution(obj["probs"])


def resolve_distribution(text) -> JointDistribution | SingleDistribution:
    """Named source, inline JSON, or path to a JSON file.

    Names: ``ternary065``, ``ternary(a)``, ``bsc(eps)``, ``uniform(k)``.
    """
    if isinstance(text, (JointDistribution, SingleDistribution)):
        return text
    if isinstance(text, (dict, list)):
        return distribution_from_json(text)
    text = str(text).strip()
    if text == "ternary065":
        return ternary_source(0.65)
    m = _NAMED.match(text)
    if m:
        name, arg = m.groups()
        try:
            value = float(arg)
        except ValueError as exc:
            raise DistributionError(f"bad parameter in {text!r}") from exc
        if name == "ternary":
            if not 0.0 < value < 1.0:
                raise DistributionError("ternary parameter must lie in (0, 1)")
            return ternary_source(value)
        if name == "bsc":
            if not 0.0 < value < 1.0:
                raise DistributionError("crossover probability must lie in (0, 1)")
            return bsc_joint(value)
        if value != int(value) or value < 2:
            raise DistributionError("uniform alphabet size must be an integer >= 2")
        return uniform_source(int(value))
    if text.startswith(("{", "[")):
        payload = text
    else:
        path = Path(text)
        if not path.is_file():
            raise DistributionError(f"unknown distribution {text!r}")
        payload = path.read_text()
    try:
        obj = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise DistributionError(f"malformed distribution JSON: {exc}") from exc
    return distribution_from_json(obj)
