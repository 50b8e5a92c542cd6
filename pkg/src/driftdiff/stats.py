"""Empirical-distribution machinery: ECDF, KS distances, DKW confidence bands.

DKW (distribution-free) bands are used everywhere instead of asymptotic
Kolmogorov quantiles: they are valid at every sample size and conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "EmpiricalDistribution",
    "ecdf",
    "ks_statistic",
    "ks_two_sample",
    "dkw_band",
]


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted sample set with its count.

    Attributes:
        samples: sample values, ascending.
        n: number of samples, at least 1.
    """

    samples: np.ndarray
    n: int

    @classmethod
    def from_values(cls, values: Sequence[float] | np.ndarray) -> "EmpiricalDistribution":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("need a nonempty one-dimensional sample set")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr = np.sort(arr)
        return cls(samples=arr, n=int(arr.size))


def ecdf(dist: EmpiricalDistribution, x: float) -> float:
    """Fraction of samples <= x (right-continuous)."""
    if dist.n < 1:
        raise ValueError("empty sample set")
    return float(np.searchsorted(dist.samples, x, side="right")) / dist.n


def ks_statistic(dist: EmpiricalDistribution, cdf: Callable[[float], float]) -> float:
    """Sup-norm distance between the ECDF and a reference CDF.

    Evaluated at the sample points with both one-sided corrections:
    sup_i max(i/n - F(x_i), F(x_i) - (i-1)/n).
    """
    if dist.n < 1:
        raise ValueError("empty sample set")
    x = dist.samples
    n = dist.n
    try:
        f = np.asarray(cdf(x), dtype=np.float64)
        if f.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        f = np.array([float(cdf(v)) for v in x], dtype=np.float64)
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1.0) / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Sup-norm distance between two ECDFs, symmetric in its arguments."""
    if a.n < 1 or b.n < 1:
        raise ValueError("empty sample set")
    pooled = np.concatenate([a.samples, b.samples])
    fa = np.searchsorted(a.samples, pooled, side="right") / a.n
    fb = np.searchsorted(b.samples, pooled, side="right") / b.n
    return float(np.max(np.abs(fa - fb)))


def dkw_band(n: int, alpha: float) -> float:
    """Half-width sqrt(ln(2/alpha) / (2n)) of the level-(1-alpha) DKW band."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))
