"""Compiled integrators for the convolution-type delay equations.

All solvers share one grid convention: node ``n`` sits at ``z = n*h`` and the
history ``w(z - k*h)`` is simply ``w[n - k]``, so the integrand is sampled on
nodes without interpolation except in the last (partial) cell.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _threshold(u, n, un, h):
    """Root of u(z - y) + 1 - u(z) = 0 on the piecewise-linear interpolant.

    ``u[:n]`` is the stored history and ``un`` the (trial) value at node n.
    Returns (theta, K) where K is the number of complete y-cells before theta.
    """
    z = n * h
    target = un - 1.0
    if target <= 0.0:
        return z, n
    # u[lo] <= target < u[hi], monotone search over node values
    lo = 0
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if u[mid] <= target:
            lo = mid
        else:
            hi = mid
    uhi = un if hi == n else u[hi]
    x = (lo + (target - u[lo]) / (uhi - u[lo])) * h
    theta = z - x
    K = n - hi
    return theta, K


@njit(cache=True, nogil=True)
def _value_rhs(u, n, un, h):
    if n == 0:
        return 0.0, 0.0
    z = n * h
    theta, K = _threshold(u, n, un, h)
    inv_n = 1.0 / n
    # f_0 = 1 since u(z - 0) = u(z)
    acc = 0.5
    fk = 1.0
    for k in range(1, K + 1):
        fk = (u[n - k] + 1.0 - un) * (1.0 - k * inv_n)
        acc += fk
    if K > 0:
        acc -= 0.5 * fk
        integral = acc * h
    else:
        integral = 0.0
        fk = 1.0
    # integrand is exactly zero at theta on the interpolant
    integral += 0.5 * fk * (theta - K * h)
    return 4.0 * integral, theta


@njit(cache=True, nogil=True)
def solve_value_kernel(N, h):
    u = np.zeros(N + 1)
    up = np.zeros(N + 1)
    th = np.zeros(N + 1)
    for n in range(N):
        f0 = up[n]
        pred = u[n] + h * f0
        f1, _ = _value_rhs(u, n + 1, pred, h)
        corr = u[n] + 0.5 * h * (f0 + f1)
        if not corr > u[n]:
            return u, up, th, n + 1
        f2, t2 = _value_rhs(u, n + 1, corr, h)
        u[n + 1] = corr
        up[n + 1] = f2
        th[n + 1] = t2
    return u, up, th, -1


@njit(cache=True, nogil=True)
def _prescribed_rhs(w, n, wn, h, theta, outer, inner, inner_n):
    """4 * int_0^theta (w(z-y) + outer + inner(z-y) - w(z)) (1 - y/z) dy."""
    if n == 0:
        return 0.0
    z = n * h
    K = int(theta / h)
    if K > n:
        K = n
    if K * h > theta:
        K -= 1
    inv_n = 1.0 / n
    f0 = outer + inner_n
    acc = 0.5 * f0
    fk = f0
    for k in range(1, K + 1):
        fk = (w[n - k] + outer + inner[n - k] - wn) * (1.0 - k * inv_n)
        acc += fk
    integral = (acc - 0.5 * fk) * h if K > 0 else 0.0
    rest = theta - K * h
    if rest > 0.0 and K < n:
        x = z - theta
        j = n - K - 1
        a = x / h - j
        wj1 = wn if j + 1 == n else w[j + 1]
        wx = (1.0 - a) * w[j] + a * wj1
        ix = (1.0 - a) * inner[j] + a * inner[j + 1]
        ftheta = (wx + outer + ix - wn) * (1.0 - theta / z)
        integral += 0.5 * (fk + ftheta) * rest
    return 4.0 * integral


@njit(cache=True, nogil=True)
def solve_prescribed_kernel(N, h, theta, outer, inner):
    """Heun predictor-corrector for w' = I_theta[w] with w(0) = 0.

    ``theta``, ``outer`` and ``inner`` are sampled on the nodes. ``inner`` is
    evaluated at z - y (history-dependent source), ``outer`` at z.
    """
    w = np.zeros(N + 1)
    wp = np.zeros(N + 1)
    for n in range(N):
        f0 = wp[n]
        pred = w[n] + h * f0
        m = n + 1
        # w[m] is not yet stored; the k = 0 term uses wn directly
        f1 = _prescribed_rhs(w, m, pred, h, theta[m], outer[m], inner, inner[m])
        corr = w[n] + 0.5 * h * (f0 + f1)
        w[m] = corr
        wp[m] = _prescribed_rhs(w, m, corr, h, theta[m], outer[m], inner, inner[m])
    return w, wp
