"""Value function of the online increasing-subsequence problem.

Works on the size scale ``z = sqrt(t)`` where the optimality equation reads

    u'(z) = 4 * int_0^theta*(z) (u(z - y) + 1 - u(z)) (1 - y/z) dy,  u(0) = 0,

with theta*(z) the root of u(z - y) + 1 - u(z) = 0 (or z while u(z) <= 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import stats
from ._kernels import solve_value_kernel
from .errors import DomainError, PlateauError, SolverFault

SQRT2 = math.sqrt(2.0)
DEFAULT_H = 1e-3
DEFAULT_ZMAX = 300.0


def _ein_integrand(s: float) -> float:
    if s < 1e-8:
        # 1 - s/2 + s^2/6 - ...
        return 1.0 - 0.5 * s
    return -math.expm1(-s) / s


def ein(t: float) -> float:
    """Entire exponential integral, the mean number of records up to ``t``."""
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise DomainError(f"ein needs a finite t >= 0, got {t}")
    if t == 0.0:
        return 0.0
    if t < 0.5:
        # alternating series sum_k (-1)^(k+1) t^k / (k k!)
        total, term, k = 0.0, 1.0, 1
        while True:
            term *= t / k
            piece = term / k
            total += piece if k % 2 else -piece
            if piece < 1e-17:
                return total
            k += 1
    val, _ = quad(_ein_integrand, 0.0, t, epsabs=1e-12, epsrel=1e-13, limit=200)
    return val


@dataclass
class ValueGrid:
    z_max: float
    h: float
    u: np.ndarray
    u_prime: np.ndarray
    theta_star: np.ndarray
    c_star_estimate: float = math.nan

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.u.size) * self.h

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < 0) or np.any(z > self.z_max * (1 + 1e-12)):
            raise DomainError(f"z outside the grid [0, {self.z_max}]")
        return z

    def u_at(self, z):
        return np.interp(self._check(z), self.z, self.u)

    def theta_at(self, z):
        return np.interp(self._check(z), self.z, self.theta_star)

    def greedy_switch(self) -> float:
        """Smallest z with u(z) = 1 (linear interpolation between nodes)."""
        i = int(np.argmax(self.u > 1.0))
        if i == 0:
            raise DomainError("grid never reaches u = 1")
        u0, u1 = self.u[i - 1], self.u[i]
        return (i - 1 + (1.0 - u0) / (u1 - u0)) * self.h


def solve_value(z_max: float = DEFAULT_ZMAX, h: float = DEFAULT_H) -> ValueGrid:
    """Integrate the optimality equation on a uniform grid.

    Heun predictor-corrector (evaluate, predict, evaluate, correct, evaluate)
    with the history read straight off the grid. The threshold is the exact
    root on the piecewise-linear interpolant of u, found by bisection over
    the monotone node values.
    """
    if not (0 < h <= 1e-2):
        raise DomainError(f"step h must lie in (0, 1e-2], got {h}")
    if not z_max >= 10:
        raise DomainError(f"z_max must be at least 10, got {z_max}")
    ratio = z_max / h
    N = int(round(ratio))
    if abs(N - ratio) > 1e-9 * ratio:
        raise DomainError(f"z_max/h = {ratio} is not an integer")
    u, up, th, bad = solve_value_kernel(N, h)
    if bad >= 0:
        raise SolverFault(bad * h)
    grid = ValueGrid(float(z_max), float(h), u, up, th)
    grid.c_star_estimate = estimate_c_star(grid)
    return grid


def estimate_c_star(grid: ValueGrid) -> float:
    """Constant of u - sqrt2 z + log(z)/6 ~ c + d/z on the upper two thirds."""
    if grid.z_max < 30:
        return math.nan
    z = grid.z
    g = grid.u - SQRT2 * z + np.log(np.where(z > 0, z, 1.0)) / 6
    return stats.fit(z, g, ("1", "1/z"), (max(20.0, grid.z_max / 3), grid.z_max)).coef("1")


def apply_I(g, z: float) -> float:
    """The operator I g(z) = 4 int_0^z (g(z-y) + 1 - g(z))_+ (1 - y/z) dy.

    ``g`` is assumed increasing, so the positive part ends at the single root
    of g(z - y) + 1 - g(z), which is located with Brent's method.
    """
    z = float(z)
    if not z > 0:
        raise DomainError("apply_I needs z > 0")
    gz = float(g(z))
    g0 = float(g(0.0))
    if not (math.isfinite(gz) and math.isfinite(g0)):
        raise DomainError("g is not finite on [0, z]")

    def bracket(y):
        return g(z - y) + 1.0 - gz

    upper = z
    if bracket(z) < 0:
        upper = brentq(bracket, 0.0, z, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    def integrand(y):
        v = bracket(y)
        if not math.isfinite(v):
            raise DomainError(f"g is not finite at {z - y}")
        return max(v, 0.0) * (1.0 - y / z)

    val, _ = quad(integrand, 0.0, upper, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 4.0 * val


def comparison_function(order: int, alpha: float):
    """Comparison functions u1, u2, u3 and their derivatives.

    order 1: alpha z
    order 2: sqrt2 z + alpha log(z+1)
    order 3: sqrt2 z - log(z+1)/6 + alpha/(z+1)
    """
    if order == 1:
        return (lambda z: alpha * z), (lambda z: alpha)
    if order == 2:
        return (lambda z: SQRT2 * z + alpha * math.log1p(z),
                lambda z: SQRT2 + alpha / (z + 1))
    if order == 3:
        return (lambda z: SQRT2 * z - math.log1p(z) / 6 + alpha / (z + 1),
                lambda z: SQRT2 - 1 / (6 * (z + 1)) - alpha / (z + 1) ** 2)
    raise ValueError(f"no comparison function of order {order}")


ALPHA2 = -1.0 / 6.0
ALPHA3 = 1.0 / 6.0 + SQRT2 / 144.0


@dataclass
class ExpansionFit:
    a: float
    b: float
    c: float
    d: float
    fit_window: tuple
    residual_max: float

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return self.a * z + self.b * np.log(z) + self.c + self.d / z


def expansion_residuals(grid: ValueGrid, fit_window=(100.0, 300.0),
                        drift_tol: float = 1e-3) -> ExpansionFit:
    """Fit u ~ sqrt2 z - log(z)/6 + c + d/z with the two leading terms fixed.

    c and d are fitted jointly to the plateau u - sqrt2 z + log(z)/6; a
    remainder that does not flatten out to within ``drift_tol`` raises
    PlateauError.
    """
    return fit_remainder(grid.z, grid.u, fit_window, drift_tol, z_max=grid.z_max)


def fit_remainder(z, w, fit_window, drift_tol=1e-3, z_max=None) -> ExpansionFit:
    lo, hi = map(float, fit_window)
    top = float(np.max(z)) if z_max is None else z_max
    if lo < 20 or hi > top * (1 + 1e-12) or hi - lo < 50:
        raise DomainError(f"fit window {fit_window} must lie in [20, {top}] with length >= 50")
    z = np.asarray(z, dtype=float)
    m = (z >= lo) & (z <= hi)
    zw = z[m]
    plateau = np.asarray(w, dtype=float)[m] - SQRT2 * zw + np.log(zw) / 6
    model = stats.fit(zw, plateau, ("1", "1/z"), (lo, hi))
    if model.residual_max > drift_tol:
        raise PlateauError(model.residual_max, drift_tol)
    return ExpansionFit(SQRT2, -1.0 / 6.0, model.coef("1"), model.coef("1/z"),
                        (lo, hi), model.residual_max)
