"""Compiled Monte Carlo kernels.

Strategies and controls reach the kernels as ``(code, param, table, h)``:
``table`` holds theta* on the nodes ``i*h`` when the optimal rule is used.
A returned flag of -1 means a thinning bound was violated, -2 that the
process left the tabulated range.
"""

import math

import numpy as np
from numba import njit

INV_SQRT2 = 1.0 / math.sqrt(2.0)

# planar strategy codes
GREEDY, STATIONARY, PHI0, OPTIMAL, GAMMA = 0, 1, 2, 3, 4
# PDMP control codes
C_THETA0, C_GAMMA, C_TABLE, C_PHI0 = 0, 1, 2, 3


@njit(cache=True, nogil=True)
def gamma_theta(gamma, z):
    v = INV_SQRT2 + gamma / z
    if v < 1e-12:
        v = 1e-12
    return z if z < v else v


@njit(cache=True, nogil=True)
def table_theta(table, h, z):
    """Linear interpolation of tabulated theta; NaN outside the table."""
    x = z / h
    i = int(x)
    n = table.size - 1
    if i >= n:
        if x <= n * (1.0 + 1e-12):
            return table[n]
        return np.nan
    a = x - i
    return (1.0 - a) * table[i] + a * table[i + 1]


@njit(cache=True, nogil=True)
def ratio_to_phi(r):
    # 2 theta/z - (theta/z)^2
    return r * (2.0 - r)


@njit(cache=True, nogil=True)
def planar_phi(code, param, table, h, tp):
    """Self-similar acceptance fraction at remaining area ``tp``."""
    if tp <= 0.0:
        return 1.0
    if code == PHI0:
        v = math.sqrt(2.0 / tp)
        return v if v < 1.0 else 1.0
    z = math.sqrt(tp)
    if code == GAMMA:
        th = gamma_theta(param, z)
    else:
        th = table_theta(table, h, z)
    return ratio_to_phi(th / z)


@njit(cache=True, nogil=True)
def planar_kernel(rng, code, param, table, h, t, out_s, out_x):
    """Acceptance events of the running maximum over horizon t.

    Returns (length, flag). Accepted atoms are written to ``out_s``/``out_x``
    while capacity lasts.
    """
    s = 0.0
    y = 0.0
    count = 0
    cap = out_s.size
    while True:
        rem = 1.0 - y
        tp = (t - s) * rem
        if tp <= 0.0 or rem <= 0.0:
            return count, 0
        if code == GREEDY or code == STATIONARY:
            rate = rem
            if code == STATIONARY and param < rem:
                rate = param
            s_new = s + rng.standard_exponential() / rate
            if s_new >= t:
                return count, 0
            s = s_new
            x = y + rng.random() * rate
        else:
            # rate grows as the remaining area shrinks, so its value at the
            # end of the block bounds it on the whole block
            if tp <= 1.0:
                s_end = t
                bound = rem
            else:
                s_end = t - 0.5 * tp / rem
                phi_end = planar_phi(code, param, table, h, 0.5 * tp)
                if phi_end != phi_end:
                    return count, -2
                bound = rem * phi_end
            s_new = s + rng.standard_exponential() / bound
            if s_new >= s_end:
                s = s_end
                continue
            s = s_new
            phi = planar_phi(code, param, table, h, (t - s) * rem)
            if phi != phi:
                return count, -2
            rate = rem * phi
            if rate > bound * (1.0 + 1e-12):
                return count, -1
            if rng.random() * bound >= rate:
                continue
            x = y + rng.random() * rate
        if x <= y:
            continue
        if count < cap:
            out_s[count] = s
            out_x[count] = x
        count += 1
        y = x


@njit(cache=True, nogil=True)
def fixed_n_kernel(rng, n):
    """Selections from n uniform marks under the square-root window rule.

    Rejected observations are skipped geometrically against a block-wise
    bound on the acceptance probability, which grows with the step index.
    """
    y = 0.0
    m = 1
    count = 0
    while m <= n:
        rem = 1.0 - y
        r = n - m + 1
        r_end = (r + 1) // 2 if r > 2 else 1
        m_end = n - r_end + 1
        w_end = math.sqrt(2.0 / (r_end * rem))
        pbar = rem * (w_end if w_end < 1.0 else 1.0)
        if pbar >= 1.0:
            skip = 0
        else:
            skip = int(math.floor(math.log(1.0 - rng.random()) / math.log1p(-pbar)))
        mc = m + skip
        if mc > m_end:
            m = m_end + 1
            continue
        w = math.sqrt(2.0 / ((n - mc + 1) * rem))
        p = rem * (w if w < 1.0 else 1.0)
        if rng.random() * pbar < p:
            x = y + rng.random() * p
            if x > y:
                y = x
                count += 1
        m = mc + 1
    return count


@njit(cache=True, nogil=True)
def control_theta(code, param, table, h, z):
    if z <= 0.0:
        return 0.0
    if code == C_THETA0:
        return z if z < INV_SQRT2 else INV_SQRT2
    if code == C_GAMMA:
        return gamma_theta(param, z)
    if code == C_TABLE:
        return table_theta(table, h, z)
    # square-root window mapped to the size scale
    phi = math.sqrt(2.0) / z
    if phi >= 1.0:
        return z
    return z * phi / (1.0 + math.sqrt(1.0 - phi))


@njit(cache=True, nogil=True)
def pdmp_kernel(rng, code, param, table, h, lam_bar, z0, out_jump, out_gap):
    """Jump points and gap sizes of Z|z0 by thinning at rate 4*lam_bar."""
    z = z0
    count = 0
    cap = out_jump.size
    rate = 4.0 * lam_bar
    while True:
        zc = z - rng.standard_exponential() / rate
        if zc <= 0.0:
            return count, 0
        th = control_theta(code, param, table, h, zc)
        if th != th:
            return count, -2
        lam = th - th * th / (2.0 * zc)
        if lam > lam_bar * (1.0 + 1e-12):
            return count, -1
        if rng.random() * lam_bar >= lam:
            z = zc
            continue
        q = 2.0 * rng.random() * lam / zc
        if q > 1.0:
            q = 1.0
        y = zc * q / (1.0 + math.sqrt(1.0 - q))
        if y > th:
            y = th
        if count < cap:
            out_jump[count] = zc
            out_gap[count] = y
        count += 1
        z = zc - y
        if z <= 0.0:
            return count, 0


@njit(cache=True, nogil=True)
def coverage_kernel(rng, code, param, table, h, lam_bar, z0, step, covered, jp, gs):
    """Add 1 to ``covered[i]`` for every grid point i*step inside a gap."""
    n, flag = pdmp_kernel(rng, code, param, table, h, lam_bar, z0, jp, gs)
    if flag != 0:
        return flag
    if n > jp.size:
        return -3
    top = covered.size - 1
    for k in range(n):
        hi = jp[k]
        lo = hi - gs[k]
        # grid points in (lo, hi]
        i0 = int(math.floor(lo / step)) + 1
        i1 = int(math.floor(hi / step))
        if i0 < 0:
            i0 = 0
        if i1 > top:
            i1 = top
        for i in range(i0, i1 + 1):
            covered[i] += 1
    return 0


@njit(cache=True, nogil=True)
def renewal_kernel(rng, z, scale):
    """max{n : H_1 + ... + H_n <= z} with H = scale*(E/(2 sqrt2) + U/sqrt2)."""
    total = 0.0
    n = 0
    a = scale * INV_SQRT2 * 0.5
    b = scale * INV_SQRT2
    while True:
        total += a * rng.standard_exponential() + b * rng.random()
        if total > z:
            return n
        n += 1


@njit(cache=True)
def control_theta_vec(code, param, table, h, zs):
    out = np.empty(zs.size)
    for i in range(zs.size):
        out[i] = control_theta(code, param, table, h, zs[i])
    return out
