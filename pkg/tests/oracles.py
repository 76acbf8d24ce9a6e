"""Independent reference computations used by the tests.

Nothing here imports the package: constants are recomputed in mpmath from
their defining equations, and root counts come from plain sign scans.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def K_L_q(N, p):
    N, p = mp.mpf(N), mp.mpf(p)
    K = ((N - 2) * p - N) / (p - 1)
    return K, K - 2 / (p - 1), 2 * p / (p + 1)


def f_eq(N, p, M, y):
    """Equilibrium function in y for the planar system, evaluated in mpmath."""
    K, _, _ = K_L_q(N, p)
    p = mp.mpf(p)
    return ((p - 1) / 2) ** p * y ** (p - 1) + M * y ** ((p - 1) / (p + 1)) - K


def mu_star(N, p):
    """-M at which f has a double positive root: solve f = f' = 0 by Newton."""
    p_ = mp.mpf(p)
    K, _, _ = K_L_q(N, p)
    s = (p_ - 1) / (p_ + 1)
    a = ((p_ - 1) / 2) ** p_
    # f' = 0 gives M in terms of y; substitute into f and solve for y
    M_of = lambda y: -a * (p_ - 1) * y ** (p_ - 1 - s) / s
    g = lambda u: a * mp.exp(u) ** (p_ - 1) + M_of(mp.exp(u)) * mp.exp(u) ** s - K
    y = mp.exp(_bisect(g, mp.mpf(-5000), mp.mpf(5000)))
    return -M_of(y)


def _bisect(g, lo, hi, iters=400):
    glo = g(lo)
    if glo * g(hi) > 0:
        raise ValueError("no sign change")
    for _ in range(iters):
        mid = (lo + hi) / 2
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return (lo + hi) / 2


def _from_c(N, p, c):
    """(M, Y) with q M Y^s = c on the equilibrium curve, or None."""
    K, _, q = K_L_q(N, p)
    p_ = mp.mpf(p)
    rad = (K - c / q) / ((p_ - 1) / 2) ** p_
    if rad <= 0:
        return None
    Y = rad ** (1 / (p_ - 1))
    return c / (q * Y ** ((p_ - 1) / (p_ + 1))), Y


def m_bar(N, p):
    """M where the trace q M Y^s - L of the linearization vanishes."""
    _, L, _ = K_L_q(N, p)
    r = _from_c(N, p, L)
    return None if r is None else r[0]


def m_bar_closed(N, p):
    """Closed form of the same constant, as a second reference."""
    N, p = mp.mpf(N), mp.mpf(p)
    return (p + 1) * ((N - 2) * p - N - 2) / ((4 * p) ** (p / (p + 1)) * ((N - 2) * (p - 1) ** 2 + 4) ** (1 / (p + 1)))


def node_thresholds(N, p):
    """Both M where the discriminant trace^2 - 4 det vanishes on the equilibrium curve.

    With c = q M Y^s: trace = c - L, det = 2K - c, so (c - L)^2 = 4(2K - c).
    Returns {"+": (M, Y) or None, "-": ...} for the two roots in c.
    """
    K, L, _ = K_L_q(N, p)
    disc = (L - 2) ** 2 - L**2 + 8 * K
    out = {}
    for sgn in ("+", "-"):
        if disc < 0:
            out[sgn] = None
            continue
        c = (L - 2) + (1 if sgn == "+" else -1) * mp.sqrt(disc)
        out[sgn] = _from_c(N, p, c)
    return out


def sign_scan_count(N, p, M, n=10_000, lo=1e-150, hi=1e150):
    """Count positive roots of the equilibrium function on a log grid.

    Sign changes are counted directly. A tangential (double) root gives no
    sign change; it is detected by minimizing f on the cell around the grid
    minimum and accepting |f_min| <= 1e-10 (1 + |K|).
    """
    K = ((N - 2) * p - N) / (p - 1)
    s = (p - 1) / (p + 1)
    a = ((p - 1) / 2) ** p
    y = np.geomspace(lo, hi, n)
    with np.errstate(over="ignore"):
        f = a * y ** (p - 1) + M * y**s - K
    sg = np.sign(f)
    changes = int(np.count_nonzero(sg[1:] * sg[:-1] < 0)) + int(np.count_nonzero(sg == 0))
    if changes == 0 and M < 0:
        i = int(np.argmin(f))
        lo_i, hi_i = max(i - 1, 0), min(i + 1, n - 1)
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(lambda v: a * math.exp(v) ** (p - 1) + M * math.exp(v) ** s - K,
                              bounds=(math.log(y[lo_i]), math.log(y[hi_i])), method="bounded",
                              options={"xatol": 1e-12})
        if abs(res.fun) <= 1e-10 * (1 + abs(K)):
            changes = 1
    return changes


def fd_jacobian(rhs, x, y, h=1e-6):
    """Central-difference Jacobian of ``rhs(x, y) -> (u, v)``."""
    J = np.empty((2, 2))
    for j, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
        fp = rhs(x + dx, y + dy)
        fm = rhs(x - dx, y - dy)
        J[0, j] = (fp[0] - fm[0]) / (2 * h)
        J[1, j] = (fp[1] - fm[1]) / (2 * h)
    return J
