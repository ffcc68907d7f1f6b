"""Empirical distribution utilities: ECDF, Kolmogorov-Smirnov, DKW bands."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EmpiricalSample:
    """A sample of first-passage times plus bookkeeping.

    values holds the finite outcomes in ascending order; replicates that hit
    a budget before finishing are only counted in ``timeouts``.
    """

    values: list[float] = field(default_factory=list)
    timeouts: int = 0
    base_seed: int = 0
    scale_applied: float = 1.0

    def __post_init__(self):
        self.values = sorted(float(v) for v in self.values)
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("values must be finite; count budget hits in timeouts")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def total(self) -> int:
        return self.n + self.timeouts

    @property
    def timeout_fraction(self) -> float:
        return self.timeouts / self.total if self.total else 0.0

    def scaled(self, factor: float) -> "EmpiricalSample":
        """Return a copy with every value multiplied by ``factor``."""
        return EmpiricalSample(
            values=[v * factor for v in self.values],
            timeouts=self.timeouts,
            base_seed=self.base_seed,
            scale_applied=self.scale_applied * factor,
        )


def ecdf(values):
    """Return the right-continuous empirical CDF of ``values`` as a callable.

    The callable accepts scalars or arrays: F(x) = #{v <= x} / n.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    if n == 0:
        raise ValueError("ecdf needs at least one value")

    def cdf(x):
        return np.searchsorted(v, x, side="right") / n

    return cdf


def _eval_cdf(cdf, x):
    try:
        out = np.asarray(cdf(x), dtype=float)
    except (TypeError, ValueError):  # scalar-only callable
        return np.array([float(cdf(v)) for v in x], dtype=float)
    if out.shape != x.shape:
        out = np.array([float(cdf(v)) for v in x], dtype=float)
    return out


def ks_statistic(values, cdf) -> float:
    """One-sample KS distance sup_x |F_n(x) - F(x)| against a model CDF.

    Uses the standard order-statistic form, which accounts for the jumps of
    the ECDF on both sides:

        D = max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)
    """
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one value")
    F = _eval_cdf(cdf, x)
    i = np.arange(1, n + 1, dtype=float)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1.0) / n)
    return float(max(d_plus, d_minus, 0.0))


def two_sample_ks(a, b) -> float:
    """Two-sample KS distance sup_x |F_a(x) - F_b(x)|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("two_sample_ks needs non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def dkw_band(n: int, delta: float) -> float:
    """Half-width of the DKW confidence band.

    With probability at least 1 - delta, sup_x |F_n(x) - F(x)| is below
    sqrt(ln(2/delta) / (2n)).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def two_sample_ks_threshold(n: int, m: int, delta: float) -> float:
    """Rejection threshold for the two-sample KS distance at level ``delta``."""
    if n < 1 or m < 1:
        raise ValueError("both sample sizes must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return math.sqrt(math.log(2.0 / delta) / 2.0) * math.sqrt((n + m) / (n * m))
