"""Counter-based random streams and the replicate runner.

Replicate ``i`` of an experiment seeded with ``seed`` always draws from the
Philox stream keyed by ``(seed, i)``, so its result does not depend on how
replicates are scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & _MASK, int(index) & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def default_threads() -> int:
    return int(os.environ.get("CHAINSEL_THREADS", "1"))


def run_replicates(fn, reps: int, seed: int, threads: int | None = None,
                   dtype=float) -> np.ndarray:
    """Evaluate ``fn(rng)`` for ``reps`` independent streams.

    ``fn`` should release the GIL (compiled kernels do) for threads to help.
    Output order follows replicate index regardless of ``threads``.
    """
    out = np.empty(reps, dtype=dtype)
    threads = threads or default_threads()

    def work(lo, hi):
        for i in range(lo, hi):
            out[i] = fn(stream(seed, i))

    if threads <= 1 or reps < 2 * threads:
        work(0, reps)
        return out
    bounds = np.linspace(0, reps, threads + 1).astype(int)
    with ThreadPoolExecutor(threads) as ex:
        list(ex.map(work, bounds[:-1], bounds[1:]))
    return out
