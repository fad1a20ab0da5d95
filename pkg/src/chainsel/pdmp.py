"""The decreasing piecewise-deterministic process Z|z0 and its moment equations.

From state z the process drifts down at unit speed, jumps at rate 4 lambda(z)
with lambda = theta - theta^2/(2z), and a jump has density
(1 - y/z)/lambda(z) on [0, theta(z)]. Each jump is one selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import chi2_contingency

from . import _simkernels as K
from ._kernels import solve_prescribed_kernel
from .errors import ConfigError, DomainError, SequencingError
from .rng import run_replicates, stream
from .stats import SummaryStats, summarize
from .strategies import AcceptanceWindow, phi0, theta_from_phi
from .value import ValueGrid

SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2
_EMPTY = np.zeros(1)


@dataclass
class ControlFunction:
    """A control theta with 0 < theta(z) <= z and bound ``theta_bar``.

    ``lambda_bar`` bounds lambda and sets the thinning rate. Controls built by
    the constructors below run in compiled code; one built from an arbitrary
    callable falls back to Python.
    """

    name: str
    theta_bar: float
    lambda_bar: float
    code: int = -1
    param: float = 0.0
    table: np.ndarray = field(default_factory=lambda: _EMPTY, repr=False)
    h: float = 1.0
    func: Optional[Callable[[float], float]] = field(default=None, repr=False)
    z_limit: float = math.inf

    def theta(self, z):
        z = np.asarray(z, dtype=float)
        if self.func is not None:
            return np.vectorize(lambda v: float(self.func(v)) if v > 0 else 0.0)(z)
        out = K.control_theta_vec(self.code, self.param, self.table, self.h,
                                  np.ascontiguousarray(z.ravel())).reshape(z.shape)
        if np.any(np.isnan(out)):
            raise DomainError(f"{self.name} control is tabulated only up to z={self.z_limit}")
        return out

    def lam(self, z):
        z = np.asarray(z, dtype=float)
        th = self.theta(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(z > 0, th - th * th / (2 * np.where(z > 0, z, 1.0)), 0.0)

    def encode(self):
        if self.func is not None:
            return None
        return self.code, self.param, self.table, self.h


def theta0() -> ControlFunction:
    """theta0(z) = min(z, 1/sqrt2)."""
    return ControlFunction("theta0", INV_SQRT2, INV_SQRT2, K.C_THETA0)


def gamma_control(gamma: float) -> ControlFunction:
    """theta(z) = min(z, 1/sqrt2 + gamma/z), the representative of its asymptotic class."""
    gamma = float(gamma)
    if gamma > 0:
        # crossing of z and 1/sqrt2 + gamma/z
        bar = 0.5 * (INV_SQRT2 + math.sqrt(0.5 + 4 * gamma))
    else:
        bar = INV_SQRT2
    return ControlFunction(f"gamma:{gamma:g}", bar, bar, K.C_GAMMA, gamma)


def optimal_control(grid: ValueGrid) -> ControlFunction:
    z = grid.z[1:]
    th = grid.theta_star[1:]
    lam = th - th * th / (2 * z)
    return ControlFunction("optimal", float(th.max()) * (1 + 1e-9), float(lam.max()) * (1 + 1e-3),
                           K.C_TABLE, 0.0, grid.theta_star, grid.h, z_limit=grid.z_max)


def phi0_control() -> ControlFunction:
    """The square-root planar window sqrt(2/t) ^ 1 mapped to the size scale."""
    # theta = z up to z = sqrt2, then decreasing; lambda = z phi/2 <= 1/sqrt2
    return ControlFunction("phi0", SQRT2, INV_SQRT2, K.C_PHI0)


def control_from_phi(phi: Callable[[float], float], theta_bar: float,
                     lambda_bar: float | None = None) -> ControlFunction:
    if phi is phi0:
        return phi0_control()
    return from_function(lambda z: theta_from_phi(phi, z), theta_bar, lambda_bar, "phi")


def from_function(theta: Callable[[float], float], theta_bar: float,
                  lambda_bar: float | None = None, name: str = "custom") -> ControlFunction:
    lb = theta_bar if lambda_bar is None else lambda_bar
    if not (math.isfinite(lb) and lb > 0):
        raise ConfigError(f"thinning bound must be finite and positive, got {lb}")
    return ControlFunction(name, float(theta_bar), float(lb), func=theta)


def parse_control(text: str, grid: ValueGrid | None = None) -> ControlFunction:
    """Build a control from ``theta0 | optimal | phi0 | gamma:<g>``."""
    text = text.strip()
    if text == "theta0":
        return theta0()
    if text == "phi0":
        return phi0_control()
    if text == "optimal":
        if grid is None:
            raise ConfigError("optimal control needs a value grid")
        return optimal_control(grid)
    if text.startswith("gamma:"):
        try:
            return gamma_control(float(text.split(":", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad gamma value in {text!r}") from None
    raise ConfigError(f"unknown control {text!r}; expected theta0|optimal|gamma:<g>")


@dataclass
class PDMPPath:
    z0: float
    jump_points: np.ndarray
    gap_sizes: np.ndarray
    n_jumps: int

    def drift_length(self) -> float:
        """Total length of the drift intervals, summed interval by interval."""
        edges = np.r_[self.z0, (self.jump_points - self.gap_sizes)]
        tops = np.r_[self.jump_points, 0.0]
        return float(np.sum(edges - tops))


def _check_flag(flag, ctrl):
    if flag == -1:
        raise ConfigError(f"lambda exceeded the thinning bound {ctrl.lambda_bar} for {ctrl.name}")
    if flag == -2:
        raise DomainError(f"{ctrl.name} control is tabulated only up to z={ctrl.z_limit}")


def _python_path(ctrl: ControlFunction, z0: float, rng):
    z = z0
    jumps, gaps = [], []
    rate = 4.0 * ctrl.lambda_bar
    while True:
        zc = z - rng.standard_exponential() / rate
        if zc <= 0:
            return jumps, gaps
        th = float(ctrl.func(zc))
        lam = th - th * th / (2 * zc)
        if lam > ctrl.lambda_bar * (1 + 1e-12):
            _check_flag(-1, ctrl)
        if rng.random() * ctrl.lambda_bar >= lam:
            z = zc
            continue
        q = min(2.0 * rng.random() * lam / zc, 1.0)
        y = min(zc * q / (1.0 + math.sqrt(1.0 - q)), th)
        jumps.append(zc)
        gaps.append(y)
        z = zc - y
        if z <= 0:
            return jumps, gaps


def _path_capacity(z0: float) -> int:
    return int(3 * z0 + 64)


def simulate_Z(ctrl: ControlFunction, z0: float, seed: int, index: int = 0) -> PDMPPath:
    """One exact path of Z|z0 by thinning candidate epochs at rate 4 lambda_bar."""
    if z0 < 0:
        raise DomainError("z0 must be non-negative")
    if not math.isfinite(ctrl.lambda_bar):
        raise ConfigError("thinning bound is not finite")
    enc = ctrl.encode()
    if enc is None:
        jumps, gaps = _python_path(ctrl, float(z0), stream(seed, index))
        jp, gs = np.array(jumps), np.array(gaps)
    else:
        cap = _path_capacity(z0)
        while True:
            jp, gs = np.empty(cap), np.empty(cap)
            n, flag = K.pdmp_kernel(stream(seed, index), *enc, ctrl.lambda_bar, float(z0), jp, gs)
            _check_flag(flag, ctrl)
            if n <= cap:
                break
            cap = 2 * n
        jp, gs = jp[:n], gs[:n]
    return PDMPPath(float(z0), jp, gs, int(jp.size))


def jump_counts(ctrl: ControlFunction, z0: float, reps: int, seed: int,
                threads: int | None = None) -> np.ndarray:
    enc = ctrl.encode()
    if enc is None:
        return run_replicates(lambda rng: len(_python_path(ctrl, float(z0), rng)[0]),
                              reps, seed, threads, dtype=np.int64)
    dummy = np.empty(0)

    def one(rng):
        n, flag = K.pdmp_kernel(rng, *enc, ctrl.lambda_bar, float(z0), dummy, dummy)
        _check_flag(flag, ctrl)
        return n

    return run_replicates(one, reps, seed, threads, dtype=np.int64)


def monte_carlo_jumps(ctrl: ControlFunction, z0: float, reps: int, seed: int,
                      threads: int | None = None, keep: bool = False) -> SummaryStats:
    if reps < 100:
        raise ConfigError(f"reps must be at least 100, got {reps}")
    counts = jump_counts(ctrl, z0, reps, seed, threads)
    out = summarize(counts)
    out.extra.update(control=ctrl.name, z=float(z0))
    if keep:
        out.samples = counts
    return out


# ----------------------------------------------------------------------------
# deterministic moment equations


@dataclass
class GridFunction:
    """A function tabulated on z = i*h, evaluated by linear interpolation."""

    h: float
    values: np.ndarray
    derivative: np.ndarray

    @property
    def z(self):
        return np.arange(self.values.size) * self.h

    @property
    def z_max(self):
        return (self.values.size - 1) * self.h

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < 0) or np.any(z > self.z_max * (1 + 1e-12)):
            raise DomainError(f"z outside [0, {self.z_max}]")
        return np.interp(z, self.z, self.values)


def _nodes(z_max: float, h: float):
    if not 0 < h <= 1e-2:
        raise DomainError(f"step h must lie in (0, 1e-2], got {h}")
    N = int(round(z_max / h))
    if N < 1 or abs(N * h - z_max) > 1e-9 * z_max:
        raise DomainError(f"z_max/h = {z_max / h} is not an integer")
    return N, np.arange(N + 1) * h


def _theta_nodes(ctrl: ControlFunction, z):
    th = ctrl.theta(z)
    th[0] = 0.0
    if np.any(th[1:] > z[1:] * (1 + 1e-12)) or np.any(th[1:] <= 0):
        bad = z[1:][(th[1:] > z[1:] * (1 + 1e-12)) | (th[1:] <= 0)][0]
        raise DomainError(f"control violates 0 < theta(z) <= z at z={bad}")
    return np.minimum(th, z)


def solve_reward(ctrl: ControlFunction, r=1.0, z_max: float = 300.0, h: float = 1e-3) -> GridFunction:
    """Expected total reward w with w' = 4 int_0^theta (w(z-y) + r(z) - w(z))(1 - y/z) dy.

    With r = 1 this is the mean number of jumps u_theta.
    """
    N, z = _nodes(z_max, h)
    theta = _theta_nodes(ctrl, z)
    if callable(r):
        rv = np.zeros(N + 1)
        rv[1:] = np.asarray(np.vectorize(r)(z[1:]), dtype=float)
    else:
        rv = np.full(N + 1, float(r))
    if not np.all(np.isfinite(rv[1:])):
        raise DomainError("reward is not finite on (0, z_max]")
    w, wp = solve_prescribed_kernel(N, h, theta, rv, np.zeros(N + 1))
    return GridFunction(h, w, wp)


@dataclass
class SecondMoment:
    h: float
    second: np.ndarray
    var: np.ndarray

    @property
    def z(self):
        return np.arange(self.var.size) * self.h

    def variance(self, z):
        return np.interp(z, self.z, self.var)


def solve_second_moment(ctrl: ControlFunction, z_max: float = 300.0, h: float = 1e-3,
                        first: GridFunction | None = None) -> SecondMoment:
    """E N^2 from w' = 4 int_0^theta [w(z-y) + 1 + 2 u(z-y) - w(z)](1 - y/z) dy.

    ``first`` must be u_theta from :func:`solve_reward` on the same grid.
    """
    if first is None:
        raise SequencingError("solve u_theta with solve_reward before the second moment")
    N, z = _nodes(z_max, h)
    if first.h != h or first.values.size < N + 1:
        raise SequencingError("u_theta was solved on a different grid")
    u = first.values[: N + 1]
    theta = _theta_nodes(ctrl, z)
    w2, _ = solve_prescribed_kernel(N, h, theta, np.ones(N + 1), 2.0 * u)
    return SecondMoment(h, w2, w2 - u * u)


# ----------------------------------------------------------------------------
# coverage of [0, z0] by drift intervals


@dataclass
class CoverageEstimate:
    z0: float
    grid: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    exp_fit: tuple = (math.nan, math.nan)
    # coverage from 2*z0, the stand-in for the limit p(z)
    p_limit: Optional[np.ndarray] = None
    p_limit_stderr: Optional[np.ndarray] = None


def _coverage_counts(ctrl, z0, step, reps, seed, threads):
    enc = ctrl.encode()
    if enc is None:
        raise ConfigError("coverage needs a compiled control")
    n_grid = int(math.floor(z0 / step + 1e-9)) + 1
    covered = np.zeros(n_grid, dtype=np.int64)
    cap = _path_capacity(z0)

    def chunk(lo, hi):
        local = np.zeros(n_grid, dtype=np.int64)
        jp, gs = np.empty(cap), np.empty(cap)
        for i in range(lo, hi):
            flag = K.coverage_kernel(stream(seed, i), *enc, ctrl.lambda_bar, float(z0),
                                     float(step), local, jp, gs)
            _check_flag(flag, ctrl)
            if flag == -3:
                raise RuntimeError("path capacity exceeded")
        return local

    from .rng import default_threads
    threads = threads or default_threads()
    if threads <= 1:
        covered += chunk(0, reps)
    else:
        from concurrent.futures import ThreadPoolExecutor
        b = np.linspace(0, reps, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as ex:
            for part in ex.map(chunk, b[:-1], b[1:]):
                covered += part
    grid = np.arange(n_grid) * step
    p = 1.0 - covered / reps
    return grid, p, np.sqrt(p * (1 - p) / reps)


def estimate_coverage(ctrl: ControlFunction, z0: float, grid_step: float = 1.0,
                      reps: int = 10_000, seed: int = 0, threads: int | None = None,
                      compare: bool = True) -> CoverageEstimate:
    """Fraction of paths for which each grid point lies in a drift interval.

    With ``compare`` the run is repeated from 2*z0 (independent streams) and
    |p(z0, z) - p(2 z0, z)| ~ a exp(-alpha (z0 - z)) is fitted where the
    difference stands out of the noise.
    """
    if z0 < 50:
        raise ConfigError("coverage needs z0 >= 50")
    if reps < 1000:
        raise ConfigError("coverage needs reps >= 1000")
    grid, p, se = _coverage_counts(ctrl, z0, grid_step, reps, seed, threads)
    est = CoverageEstimate(float(z0), grid, p, se)
    if compare:
        _, p2, se2 = _coverage_counts(ctrl, 2 * z0, grid_step, reps, seed ^ 0x5EED, threads)
        diff = np.abs(p - p2[: p.size])
        pooled = np.sqrt(se**2 + se2[: p.size] ** 2)
        m = (diff > 3 * pooled) & (grid < z0) & (grid > 0)
        if m.sum() >= 3:
            slope, icpt = np.polyfit(z0 - grid[m], np.log(diff[m]), 1)
            est.exp_fit = (float(math.exp(icpt)), float(-slope))
        est.p_limit = p2[: p.size]
        est.p_limit_stderr = se2[: p.size]
    return est


# ----------------------------------------------------------------------------


def compare_planar_pdmp(phi, t: float, reps: int, seed: int, threads: int | None = None,
                        theta_bar: float | None = None):
    """Selection counts of the planar rule phi and of Z|sqrt(t) under the mapped control.

    Returns (planar, pdmp) summaries; both keep their raw samples and the
    planar summary carries the chi-square p-value of the two histograms.
    """
    from .planar import monte_carlo_length

    if t < 100:
        raise ConfigError("comparison needs t >= 100")
    if phi in ("phi0", phi0):
        window = AcceptanceWindow("phi0", t)
        ctrl = phi0_control()
    else:
        window = AcceptanceWindow("selfsimilar", t, phi=phi)
        ctrl = control_from_phi(phi, theta_bar if theta_bar is not None else math.sqrt(t))
    planar = monte_carlo_length(window, t, reps, seed, threads, keep=True)
    # tag the PDMP streams so the two samples are independent
    pd = monte_carlo_jumps(ctrl, math.sqrt(t), reps, seed ^ (1 << 62), threads, keep=True)
    p_value = same_law_pvalue(planar.samples, pd.samples)
    planar.extra["chi2_pvalue"] = pd.extra["chi2_pvalue"] = p_value
    return planar, pd


def same_law_pvalue(a, b, min_expected: float = 5.0) -> float:
    """Two-sample chi-square test on integer histograms with sparse tails pooled."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    ca = np.bincount(a - lo, minlength=hi - lo + 1)
    cb = np.bincount(b - lo, minlength=hi - lo + 1)
    frac = a.size / (a.size + b.size)
    # merge neighbouring bins until every expected count is large enough
    rows_a, rows_b = [], []
    acc_a = acc_b = 0
    for x, y in zip(ca, cb):
        acc_a += x
        acc_b += y
        tot = acc_a + acc_b
        if tot * min(frac, 1 - frac) >= min_expected:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b:
        if rows_a:
            rows_a[-1] += acc_a
            rows_b[-1] += acc_b
        else:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
    if len(rows_a) < 2:
        return 1.0
    return float(chi2_contingency(np.array([rows_a, rows_b]), correction=False)[1])
