"""Monte Carlo for the planar selection problem.

Only acceptance events are simulated: rejected atoms never move the running
maximum, so given the state (s, y) the next selection arrives at rate
psi(t, s, y) and lands uniformly in the window. A run costs O(length), not
O(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _simkernels as K
from .errors import ConfigError, DomainError
from .rng import run_replicates, stream
from .stats import SummaryStats, summarize
from .strategies import AcceptanceWindow, stationary


@dataclass
class SelectionRun:
    t: float
    chain: list
    length: int
    final_y: float

    def is_chain(self) -> bool:
        """True when times and marks are both strictly increasing."""
        if len(self.chain) < 2:
            return True
        s, x = np.asarray(self.chain).T
        return bool(np.all(np.diff(s) > 0) and np.all(np.diff(x) > 0))


def _capacity(t: float) -> int:
    return int(3 * math.sqrt(2 * t) + 10 * math.log1p(t) + 64)


def _python_run(w: AcceptanceWindow, t: float, rng: np.random.Generator):
    """Same block-thinning scheme as the compiled kernel, for arbitrary phi."""
    s, y = 0.0, 0.0
    chain = []
    while True:
        rem = 1.0 - y
        tp = (t - s) * rem
        if tp <= 0 or rem <= 0:
            return chain
        if tp <= 1.0:
            s_end, bound = t, rem
        else:
            s_end = t - 0.5 * tp / rem
            bound = rem * max(w.fraction(0.5 * tp), w.fraction(tp))
        s_new = s + rng.standard_exponential() / bound
        if s_new >= s_end:
            s = s_end
            continue
        s = s_new
        rate = rem * w.fraction((t - s) * rem)
        if rate > bound * (1 + 1e-12):
            raise DomainError("acceptance fraction is not monotone in the remaining area")
        if rng.random() * bound >= rate:
            continue
        x = y + rng.random() * rate
        if x > y:
            chain.append((s, x))
            y = x


def _run_kernel(enc, t, rng, cap):
    code, param, table, h = enc
    out_s = np.empty(cap)
    out_x = np.empty(cap)
    n, flag = K.planar_kernel(rng, code, param, table, h, float(t), out_s, out_x)
    if flag == -1:
        raise DomainError("acceptance fraction is not monotone in the remaining area")
    if flag == -2:
        raise DomainError(f"horizon t={t} runs beyond the value grid")
    return n, out_s, out_x


def simulate_selection(w: AcceptanceWindow, t: float, seed: int, index: int = 0) -> SelectionRun:
    if t < 0:
        raise DomainError("t must be non-negative")
    enc = w.encode()
    if enc is None:
        chain = _python_run(w, t, stream(seed, index))
    else:
        cap = _capacity(t)
        while True:
            n, out_s, out_x = _run_kernel(enc, t, stream(seed, index), cap)
            if n <= cap:
                break
            cap = 2 * n
        chain = list(zip(out_s[:n].tolist(), out_x[:n].tolist()))
    return SelectionRun(float(t), chain, len(chain), chain[-1][1] if chain else 0.0)


def selection_lengths(w: AcceptanceWindow, t: float, reps: int, seed: int,
                      threads: int | None = None) -> np.ndarray:
    enc = w.encode()
    if enc is None:
        return run_replicates(lambda rng: len(_python_run(w, t, rng)), reps, seed,
                              threads, dtype=np.int64)
    dummy = np.empty(0)

    def one(rng):
        code, param, table, h = enc
        n, flag = K.planar_kernel(rng, code, param, table, h, float(t), dummy, dummy)
        if flag:
            raise DomainError(f"planar kernel failed with flag {flag} at t={t}")
        return n

    return run_replicates(one, reps, seed, threads, dtype=np.int64)


def monte_carlo_length(w: AcceptanceWindow, t: float, reps: int, seed: int,
                       threads: int | None = None, keep: bool = False) -> SummaryStats:
    if reps < 100:
        raise ConfigError(f"reps must be at least 100, got {reps}")
    lengths = selection_lengths(w, t, reps, seed, threads)
    out = summarize(lengths)
    out.extra["strategy"] = w.label()
    out.extra["t"] = float(t)
    if keep:
        out.samples = lengths
    return out


def simulate_fixed_n(n: int, seed: int, index: int = 0) -> int:
    """Selections among n uniform marks accepting x at step m iff
    0 < (x - y)/(1 - y) < sqrt(2/((n - m + 1)(1 - y))) ^ 1."""
    if n < 1:
        raise DomainError("n must be at least 1")
    return int(K.fixed_n_kernel(stream(seed, index), int(n)))


def fixed_n_lengths(n: int, reps: int, seed: int, threads: int | None = None) -> np.ndarray:
    if n < 1:
        raise DomainError("n must be at least 1")
    return run_replicates(lambda rng: K.fixed_n_kernel(rng, int(n)), reps, seed, threads,
                          dtype=np.int64)


def stationary_limit_stat(t: float, reps: int, seed: int,
                          threads: int | None = None, keep: bool = False) -> SummaryStats:
    """Moments of sqrt3 (L0(t) - sqrt(2t)) / (2t)^(1/4) under the stationary window."""
    if t < 1e4:
        raise DomainError("stationary limit statistic needs t >= 1e4")
    if reps < 100:
        raise ConfigError(f"reps must be at least 100, got {reps}")
    lengths = selection_lengths(stationary(t), t, reps, seed, threads)
    stat = math.sqrt(3.0) * (lengths - math.sqrt(2 * t)) / (2 * t) ** 0.25
    out = summarize(stat)
    out.extra.update(strategy="stationary", t=float(t))
    if keep:
        out.samples = stat
    return out
