"""Acceptance windows for the planar problem and their size-scale controls.

A self-similar window has the form (1 - y) * phi((t - s)(1 - y)). On the
size scale z = sqrt(t) the same rule is a control theta(z), the largest jump
of the decreasing process, and the two are tied by matching jump rates:

    phi(z^2) = 2 theta/z - (theta/z)^2,   theta(z) = z (1 - sqrt(1 - phi(z^2))).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _simkernels as K
from .errors import ConfigError, DomainError
from .value import ValueGrid

SQRT2 = math.sqrt(2.0)
_EMPTY = np.zeros(1)


def phi0(t: float) -> float:
    """The square-root window sqrt(2/t) capped at 1."""
    return 1.0 if t <= 2.0 else math.sqrt(2.0 / t)


def theta_from_phi(phi: Callable[[float], float], z: float) -> float:
    z = float(z)
    if z <= 0:
        raise DomainError("theta_from_phi needs z > 0")
    p = float(phi(z * z))
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"phi({z * z}) = {p} lies outside [0, 1]")
    # z * (1 - sqrt(1 - p)) without cancellation
    return z * p / (1.0 + math.sqrt(1.0 - p))


def phi_from_theta(theta: Callable[[float], float], t: float) -> float:
    t = float(t)
    if t <= 0:
        raise DomainError("phi_from_theta needs t > 0")
    z = math.sqrt(t)
    th = float(theta(z))
    if not 0.0 < th <= z * (1 + 1e-15):
        raise DomainError(f"theta({z}) = {th} lies outside (0, {z}]")
    r = min(th / z, 1.0)
    return r * (2.0 - r)


def phi_star(grid: ValueGrid, t: float) -> float:
    """Optimal acceptance fraction read off the tabulated threshold."""
    t = float(t)
    if t < 0 or math.sqrt(t) > grid.z_max * (1 + 1e-12):
        raise DomainError(f"t = {t} lies beyond the grid (z_max = {grid.z_max})")
    if t == 0:
        return 1.0
    z = math.sqrt(t)
    if grid.u_at(z) <= 1.0:
        return 1.0
    r = min(float(grid.theta_at(z)) / z, 1.0)
    return r * (2.0 - r)


def gamma_theta(gamma: float, z: float) -> float:
    """min(z, 1/sqrt2 + gamma/z), kept positive."""
    return float(K.gamma_theta(float(gamma), float(z)))


@dataclass
class AcceptanceWindow:
    """A selection rule over horizon ``t``.

    ``kind`` is one of greedy, stationary, phi0, selfsimilar, optimal, gamma.
    """

    kind: str
    t: float
    delta: float = math.nan
    gamma: float = math.nan
    phi: Optional[Callable[[float], float]] = field(default=None, repr=False)
    grid: Optional[ValueGrid] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("greedy", "stationary", "phi0", "selfsimilar", "optimal", "gamma"):
            raise ConfigError(f"unknown strategy kind {self.kind!r}")
        if self.t < 0:
            raise DomainError("horizon must be non-negative")
        if self.kind == "stationary" and not 0 < self.delta <= 1:
            raise DomainError(f"stationary delta must lie in (0, 1], got {self.delta}")
        if self.kind == "selfsimilar" and self.phi is None:
            raise ConfigError("self-similar window needs phi")
        if self.kind == "optimal" and self.grid is None:
            raise ConfigError("optimal window needs a value grid")
        if self.kind == "gamma" and not math.isfinite(self.gamma):
            raise ConfigError("gamma window needs a finite gamma")

    def fraction(self, tp: float) -> float:
        """phi at remaining area ``tp`` for the self-similar kinds."""
        if self.kind == "phi0":
            return phi0(tp)
        if self.kind == "selfsimilar":
            return float(self.phi(tp))
        if self.kind == "optimal":
            return phi_star(self.grid, tp)
        if self.kind == "gamma":
            if tp <= 0:
                return 1.0
            return phi_from_theta(lambda z: gamma_theta(self.gamma, z), tp)
        raise DomainError(f"{self.kind} window is not self-similar")

    def encode(self):
        """(code, param, table, h) for the compiled kernels, None if Python-only."""
        if self.kind == "greedy":
            return K.GREEDY, 0.0, _EMPTY, 1.0
        if self.kind == "stationary":
            return K.STATIONARY, float(self.delta), _EMPTY, 1.0
        if self.kind == "phi0":
            return K.PHI0, 0.0, _EMPTY, 1.0
        if self.kind == "optimal":
            return K.OPTIMAL, 0.0, self.grid.theta_star, self.grid.h
        if self.kind == "gamma":
            return K.GAMMA, float(self.gamma), _EMPTY, 1.0
        return None

    def label(self) -> str:
        if self.kind == "gamma":
            return f"gamma:{self.gamma:g}"
        return self.kind


def stationary(t: float) -> AcceptanceWindow:
    return AcceptanceWindow("stationary", t, delta=min(math.sqrt(2.0 / t), 1.0) if t > 0 else 1.0)


def window_width(w: AcceptanceWindow, t: float, s: float, y: float) -> float:
    """psi(t, s, y): width of the acceptance interval above the running maximum."""
    if not 0 <= s <= t:
        raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
    if not 0 <= y < 1:
        raise DomainError(f"need 0 <= y < 1, got y={y}")
    rem = 1.0 - y
    if w.kind == "greedy":
        return rem
    if w.kind == "stationary":
        return min(rem, w.delta)
    return rem * w.fraction((t - s) * rem)


def parse_strategy(text: str, t: float, grid: ValueGrid | None = None) -> AcceptanceWindow:
    """Build a window from ``greedy | stationary | phi0 | optimal | gamma:<g>``."""
    text = text.strip()
    if text == "greedy":
        return AcceptanceWindow("greedy", t)
    if text == "stationary":
        return stationary(t)
    if text == "phi0":
        return AcceptanceWindow("phi0", t)
    if text == "optimal":
        if grid is None:
            raise ConfigError("optimal strategy needs a value grid")
        return AcceptanceWindow("optimal", t, grid=grid)
    if text.startswith("gamma:"):
        try:
            g = float(text.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad gamma value in {text!r}") from None
        return AcceptanceWindow("gamma", t, gamma=g)
    raise ConfigError(f"unknown strategy {text!r}; expected greedy|stationary|phi0|optimal|gamma:<g>")
