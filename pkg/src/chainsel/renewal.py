"""Cycle sizes of Z|z and the renewal process they approach.

A cycle with right endpoint z is a drift stretch D_z followed by a gap
J_{z - D_z}. For controls with theta(z) = 1/sqrt2 + O(1/z) the cycle size
converges in law to H = E/(2 sqrt2) + U/sqrt2 with E ~ Exp(1), U ~ U(0,1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _simkernels as K
from .errors import DomainError
from .pdmp import ControlFunction
from .rng import run_replicates, stream
from .stats import ks_distance, summarize

SQRT2 = math.sqrt(2.0)
MU = 1.0 / SQRT2
SIGMA2 = 1.0 / 6.0
# sigma * mu^(-3/2) = 2^(3/4)/sqrt6
CLT_SCALE = math.sqrt(SIGMA2) * MU ** -1.5

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


class CycleDistributions:
    """Drift and gap laws for a cycle whose right endpoint is ``z``.

    The integrated hazard of the drift length is tabulated once on segments
    of length ``segment`` (10-point Gauss-Legendre per segment); sampling
    inverts it by bisection inside the located segment.
    """

    def __init__(self, ctrl: ControlFunction, z: float, segment: float = 0.05):
        if not z > 0:
            raise DomainError("cycle endpoint z must be positive")
        self.ctrl = ctrl
        self.z = float(z)
        n = max(1, int(math.ceil(self.z / segment)))
        nodes = np.minimum(np.arange(n + 1) * segment, self.z)
        kink = self._cap_end()
        if kink is not None:
            nodes = np.union1d(nodes, [self.z - kink])
        self.nodes = nodes
        pieces = self._hazard_between(self.nodes[:-1], self.nodes[1:])
        self.table = np.r_[0.0, np.cumsum(pieces)]

    def _cap_end(self):
        """Point where theta(s) = s stops holding; lambda has a kink there."""
        top = min(1.5 * self.ctrl.theta_bar, self.z)
        ss = np.linspace(0.0, top, 2001)[1:]
        capped = self.ctrl.theta(ss) >= ss * (1 - 1e-12)
        if capped.all() or not capped.any():
            return None
        i = int(np.argmin(capped)) - 1
        if i < 0:
            return None
        lo, hi = ss[i], ss[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.ctrl.theta(np.array([mid]))[0] >= mid * (1 - 1e-12):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def _rate(self, s):
        s = np.asarray(s, dtype=float)
        return 4.0 * self.ctrl.lam(s.ravel()).reshape(s.shape)

    def _hazard_between(self, a, b):
        """int_{z-b}^{z-a} 4 lambda(s) ds for arrays a <= b."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid = self.z - 0.5 * (a + b)
        half = 0.5 * (b - a)
        s = mid[..., None] + half[..., None] * _GL_X
        return half * (self._rate(s) @ _GL_W)

    def hazard(self, y):
        """Integrated hazard int_{z-y}^z 4 lambda, i.e. -log P(D_z >= y)."""
        y = np.asarray(y, dtype=float)
        k = np.clip(np.searchsorted(self.nodes, y, side="right") - 1, 0, self.nodes.size - 2)
        out = self.table[k] + self._hazard_between(self.nodes[k], y)
        return float(out) if out.ndim == 0 else out

    def survival(self, y):
        return np.exp(-self.hazard(y))

    def gap_density(self, y, at: float | None = None):
        zz = self.z if at is None else at
        th = float(self.ctrl.theta(zz))
        lam = float(self.ctrl.lam(zz))
        y = np.asarray(y, dtype=float)
        return np.where((y >= 0) & (y <= th), (1 - y / zz) / lam, 0.0)

    def sample_drift(self, size: int, rng: np.random.Generator, tol: float = 1e-13):
        target = rng.standard_exponential(size)
        d = np.full(size, self.z)
        inside = target < self.table[-1]
        tg = target[inside]
        k = np.searchsorted(self.table, tg, side="right") - 1
        k = np.clip(k, 0, self.nodes.size - 2)
        lo = self.nodes[k].copy()
        hi = self.nodes[k + 1].copy()
        base = self.table[k]
        while np.max(hi - lo, initial=0.0) > tol:
            mid = 0.5 * (lo + hi)
            above = base + self._hazard_between(self.nodes[k], mid) > tg
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        d[inside] = 0.5 * (lo + hi)
        return d

    def sample_gap(self, right, rng: np.random.Generator):
        """J at right endpoints ``right`` by quadratic inversion; 0 where right <= 0."""
        right = np.asarray(right, dtype=float)
        f = rng.random(right.shape)
        j = np.zeros_like(right)
        m = right > 0
        zr = right[m]
        th = self.ctrl.theta(zr)
        lam = th - th * th / (2 * zr)
        q = np.minimum(2 * f[m] * lam / zr, 1.0)
        j[m] = np.minimum(zr * q / (1 + np.sqrt(1 - q)), th)
        return j

    def sample(self, size: int, rng: np.random.Generator):
        d = self.sample_drift(size, rng)
        return d, self.sample_gap(self.z - d, rng)


def sample_cycle(cd: CycleDistributions, seed: int, index: int = 0):
    d, j = cd.sample(1, stream(seed, index))
    return float(d[0]), float(j[0])


def sample_cycles(cd: CycleDistributions, size: int, seed: int):
    return cd.sample(size, stream(seed, 0))


def sample_H(seed: int, size: int | None = None, index: int = 0):
    rng = stream(seed, index)
    n = 1 if size is None else size
    h = rng.standard_exponential(n) / (2 * SQRT2) + rng.random(n) / SQRT2
    return float(h[0]) if size is None else h


def renewal_count(z: float, seed: int, scale: float = 1.0, index: int = 0) -> int:
    """max{n : H_1 + ... + H_n <= z} for steps scale*H."""
    if z < 0:
        raise DomainError("z must be non-negative")
    return int(K.renewal_kernel(stream(seed, index), float(z), float(scale)))


def renewal_counts(z: float, reps: int, seed: int, scale: float = 1.0,
                   threads: int | None = None) -> np.ndarray:
    if z < 0:
        raise DomainError("z must be non-negative")
    return run_replicates(lambda rng: K.renewal_kernel(rng, float(z), float(scale)),
                         reps, seed, threads, dtype=np.int64)


def clt_statistic(counts, z: float) -> np.ndarray:
    """(N - z/mu) / (sigma mu^(-3/2) sqrt z) with mu = 1/sqrt2, sigma^2 = 1/6."""
    if z < 100:
        raise DomainError("the CLT statistic needs z >= 100")
    counts = np.asarray(counts, dtype=float)
    return (counts - z / MU) / (CLT_SCALE * math.sqrt(z))


def clt_report(counts, z: float) -> dict:
    stat = clt_statistic(counts, z)
    s = summarize(stat)
    return {"z": float(z), "reps": int(stat.size), "ks_distance": ks_distance(stat),
            "mean": s.mean, "variance": s.variance}


def truncation_level(z: float, omega: float = 5.0) -> float:
    return omega * math.sqrt(z)


def envelope_constant(ctrl: ControlFunction, z_lower: float, z_top: float | None = None) -> float:
    """Smallest c with (1 -+ c/z_lower)/sqrt2 bracketing lambda and
    1/(sqrt2 (1 +- c/z_lower)) bracketing theta on z > z_lower."""
    if z_top is None:
        z_top = max(1e4, 100 * z_lower)
    z_top = min(z_top, ctrl.z_limit)
    zs = np.unique(np.r_[np.geomspace(z_lower, z_top, 20000),
                         np.linspace(z_lower, min(z_lower + 20, z_top), 4001)])
    th = ctrl.theta(zs)
    lam = th - th * th / (2 * zs)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.maximum(np.abs(SQRT2 * lam - 1), np.abs(1 - 1 / (SQRT2 * th)))
    c = float(z_lower * np.max(dev))
    if not math.isfinite(c) or c >= z_lower:
        raise DomainError(f"envelope constant {c} is not usable; theta does not approach 1/sqrt2")
    return c


@dataclass
class DominanceReport:
    z: float
    z_lower: float
    c: float
    reps: int
    quantiles: np.ndarray
    F_cycle: np.ndarray
    F_lower: np.ndarray
    F_upper: np.ndarray
    margin_lower: np.ndarray = field(repr=False)
    margin_upper: np.ndarray = field(repr=False)
    passed: bool = False

    def to_dict(self) -> dict:
        return {"z": self.z, "z_lower": self.z_lower, "c": self.c, "reps": self.reps,
                "passed": self.passed, "n_points": int(self.quantiles.size),
                "quantiles": self.quantiles.tolist(),
                "margin_lower": self.margin_lower.tolist(),
                "margin_upper": self.margin_upper.tolist()}


def dominance_check(ctrl: ControlFunction, z_lower: float, z: float, reps: int = 100_000,
                    seed: int = 0) -> DominanceReport:
    """Compare the truncated cycle law with its two scaled-H bounds.

    The cycle size C = D_z + J_{z-D_z} must satisfy
    (H/(1 + c/zl)) ^ (z - zl)  <=st  C ^ (z - zl)  <=st  H/(1 - c/zl);
    the CDFs are compared at the 99 percentiles of the truncated cycle
    sample, each within 3 standard errors.
    """
    if z < z_lower:
        raise DomainError("need z >= z_lower")
    c = envelope_constant(ctrl, z_lower)
    cap = z - z_lower
    d, j = CycleDistributions(ctrl, z).sample(reps, stream(seed, 0))
    cyc = np.minimum(d + j, cap)
    H = sample_H(seed ^ (1 << 61), reps)
    lower = np.minimum(H / (1 + c / z_lower), cap)
    upper = H / (1 - c / z_lower)
    q = np.quantile(cyc, np.arange(1, 100) / 100)

    def ecdf(sample, x):
        s = np.sort(sample)
        return np.searchsorted(s, x, side="right") / s.size

    Fc, Fl, Fu = ecdf(cyc, q), ecdf(lower, q), ecdf(upper, q)

    def se(a, b):
        return np.sqrt(a * (1 - a) / reps + b * (1 - b) / reps)

    # lower <=st cycle means F_lower >= F_cycle; cycle <=st upper means F_cycle >= F_upper
    ml = Fl - Fc + 3 * se(Fl, Fc)
    mu = Fc - Fu + 3 * se(Fc, Fu)
    ok = bool(np.all(ml >= 0) and np.all(mu >= 0))
    return DominanceReport(float(z), float(z_lower), c, reps, q, Fc, Fl, Fu, ml, mu, ok)
