"""Streaming moments, least-squares expansion fits and a normal KS distance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr


class FitError(ValueError):
    pass


@dataclass
class SummaryStats:
    reps: int
    mean: float
    variance: float
    std_error: float
    extra: dict = field(default_factory=dict)
    # sum of squared deviations; kept so partial summaries can be merged
    m2: float = 0.0
    samples: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def merge(self, other: "SummaryStats") -> "SummaryStats":
        """Combine two partial summaries (Chan et al. pairwise update)."""
        if self.reps == 0:
            return other
        if other.reps == 0:
            return self
        n = self.reps + other.reps
        delta = other.mean - self.mean
        mean = self.mean + delta * other.reps / n
        m2 = self.m2 + other.m2 + delta * delta * self.reps * other.reps / n
        return _finish(n, mean, m2)

    def to_dict(self) -> dict:
        out = {"reps": self.reps, "mean": self.mean, "variance": self.variance,
               "std_error": self.std_error}
        out.update(self.extra)
        return out


def _finish(n: int, mean: float, m2: float, extra: dict | None = None) -> SummaryStats:
    var = m2 / (n - 1) if n > 1 else 0.0
    var = max(var, 0.0)
    return SummaryStats(n, mean, var, math.sqrt(var / n), dict(extra or {}), m2)


def summarize(values) -> SummaryStats:
    """Mean and unbiased variance of ``values``.

    The mean uses ``math.fsum`` and the squared deviations are summed the same
    way, so the result does not depend on the order of the data.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("summarize needs at least one value")
    n = x.size
    mean = math.fsum(x) / n
    d = x - mean
    # second compensation pass removes the residual error of the mean
    corr = math.fsum(d)
    m2 = math.fsum(d * d) - corr * corr / n
    return _finish(n, mean, m2)


def variance_std_error(values) -> float:
    """Standard error of the sample variance from the fourth central moment."""
    x = np.asarray(values, dtype=float)
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d**2)
    m4 = np.mean(d**4)
    return math.sqrt(max(m4 - (n - 3) / (n - 1) * m2 * m2, 0.0) / n)


BASIS = {
    "z": lambda z: z,
    "log z": np.log,
    "1": np.ones_like,
    "1/z": lambda z: 1.0 / z,
}


@dataclass
class FitModel:
    basis: tuple
    coefficients: np.ndarray
    window: tuple
    residual_max: float

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return sum(c * BASIS[b](z) for b, c in zip(self.basis, self.coefficients))

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.basis.index(name)])


def fit(z_values, data, basis=("z", "log z", "1"), window=None) -> FitModel:
    """Ordinary least squares of ``data`` on the named basis functions of z."""
    z = np.asarray(z_values, dtype=float)
    y = np.asarray(data, dtype=float)
    basis = tuple(basis)
    if not basis:
        raise FitError("empty basis")
    unknown = [b for b in basis if b not in BASIS]
    if unknown:
        raise FitError(f"unknown basis functions {unknown}")
    if window is None:
        window = (float(z.min()), float(z.max()))
    lo, hi = window
    m = (z >= lo) & (z <= hi)
    if m.sum() < 10:
        raise FitError(f"need at least 10 points in window {window}, got {int(m.sum())}")
    zw, yw = z[m], y[m]
    A = np.column_stack([BASIS[b](zw) for b in basis])
    # column scaling keeps the rank test meaningful for mixed magnitudes
    scale = np.linalg.norm(A, axis=0)
    coef, _, rank, _ = np.linalg.lstsq(A / scale, yw, rcond=None)
    if rank < len(basis):
        raise FitError(f"design matrix rank {rank} < {len(basis)} on window {window}")
    coef = coef / scale
    resid = yw - A @ coef
    return FitModel(basis, coef, (float(lo), float(hi)), float(np.max(np.abs(resid))))


def normal_cdf(x):
    return ndtr(x)


def ks_distance(samples, cdf=normal_cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 100:
        raise ValueError("ks_distance needs at least 100 samples")
    F = cdf(x)
    # right-continuous ECDF: compare at each jump from both sides, using the
    # last index of every tied block
    last = np.r_[x[1:] != x[:-1], True]
    first = np.r_[True, x[1:] != x[:-1]]
    upper = np.arange(1, n + 1)[last] / n
    lower = np.arange(0, n)[first] / n
    return float(max(np.max(np.abs(upper - F[last])), np.max(np.abs(F[first] - lower))))
