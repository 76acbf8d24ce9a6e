"""Scalar functionals along trajectories and the checks built on them.

Every closed-form derivative used here is compared with finite differences
of the functional itself, evaluated on the dense output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import RegimeMismatch
from .integrator import Trajectory
from .params import ProblemParams, critical_constants, derive_constants


@dataclass(frozen=True)
class DiagnosticSample:
    t: float
    F: float
    V: float
    Z: float
    G: float
    E: Optional[float]
    a_exponent: float


def sobolev_case(params: ProblemParams) -> bool:
    N, p = params.N, params.p
    return N >= 3 and params.M == 0.0 and abs(p - (N + 2) / (N - 2)) <= 1e-12 * p


def z_exponent(params: ProblemParams) -> float:
    """a = 2(p+1)(N-1)/(p+3)."""
    return 2 * (params.p + 1) * (params.N - 1) / (params.p + 3)


def F_of(params: ProblemParams, x, y):
    """Energy x_t^2/2 + |x|^(p+1)/(p+1) - K x^2/(p-1)."""
    p = params.p
    K = derive_constants(params).K
    xt = 2 * x / (p - 1) - y
    return xt**2 / 2 + np.abs(x) ** (p + 1) / (p + 1) - K * x**2 / (p - 1)


def F_rate(params: ProblemParams, x, y):
    p = params.p
    k = derive_constants(params)
    xt = 2 * x / (p - 1) - y
    return -(k.L * xt + params.M * np.abs(y) ** k.q) * xt


def V_of(params: ProblemParams, x, y):
    """Lyapunov functional of the planar system (written J in the literature)."""
    p, M = params.p, params.M
    k = derive_constants(params)
    xt = 2 * x / (p - 1) - y
    ax = np.abs(x)
    return (
        k.K * x**2 / (p - 1)
        - ax ** (p + 1) / (p + 1)
        - M * (2 / (p - 1)) ** k.q * (p + 1) * ax ** ((3 * p + 1) / (p + 1)) / (3 * p + 1)
        - xt**2 / 2
    )


def V_rate(params: ProblemParams, x, y):
    """Closed-form dV/dt on the quadrant."""
    p, M = params.p, params.M
    k = derive_constants(params)
    xt = 2 * x / (p - 1) - y
    return k.L * xt**2 - M * ((2 * np.abs(x) / (p - 1)) ** k.q - np.abs(y) ** k.q) * xt


def Z_of(params: ProblemParams, t, x, y):
    """Serrin-Zou type functional written in (t, x, y)."""
    p, M = params.p, params.M
    k = derive_constants(params)
    a = z_exponent(params)
    core = (p + 1) * y**2 / 2 + np.abs(x) ** p * x - a * x * y + M * x * np.abs(y) ** k.q
    return np.exp(2 * (p + 1) * k.L * t / (p + 3)) * core


def U_of(params: ProblemParams, t, x, y):
    """Right-hand side of the first-order relation satisfied by Z in r.

    Z_r - q M |u_r|^s Z = r^(b-1) C x y (-L + p(p+3)/(p+1)^2 M y^s) with
    b = 2(p+1)L/(p+3) and C = 2(N-1)(p^2-1)/(p+3)^2.
    """
    N, p, M = params.N, params.p, params.M
    k = derive_constants(params)
    b = 2 * (p + 1) * k.L / (p + 3)
    C = 2 * (N - 1) * (p * p - 1) / (p + 3) ** 2
    return np.exp((b - 1) * t) * C * x * y * (-k.L + p * (p + 3) / (p + 1) ** 2 * M * np.abs(y) ** k.s)


def G_of(params: ProblemParams, t, x, y):
    """G = (u_r^2 - q u^(p+1))/2 written in (t, x, y)."""
    p = params.p
    q = derive_constants(params).q
    return 0.5 * np.exp(-2 * (p + 1) * t / (p - 1)) * (y**2 - q * np.abs(x) ** (p + 1))


def E_of(params: ProblemParams, x, y):
    """Conserved energy of the Sobolev-critical system with M = 0."""
    N = params.N
    return y**2 / 2 + (N - 2) / (2 * N) * np.abs(x) ** (2 * N / (N - 2)) - (N - 2) / 2 * x * y


def eval_diagnostics(params: ProblemParams, traj: Trajectory) -> list[DiagnosticSample]:
    """Evaluate F, V, Z, G (and E in the Sobolev case) at every stored sample."""
    t, x, y = np.asarray(traj.t), np.asarray(traj.x), np.asarray(traj.y)
    with np.errstate(over="ignore", invalid="ignore"):
        F = F_of(params, x, y)
        V = V_of(params, x, y)
        Z = Z_of(params, t, x, y)
        G = G_of(params, t, x, y)
    E = E_of(params, x, y) if sobolev_case(params) else None
    a = z_exponent(params)
    return [
        DiagnosticSample(float(t[i]), float(F[i]), float(V[i]), float(Z[i]), float(G[i]),
                         None if E is None else float(E[i]), a)
        for i in range(len(t))
    ]


# ---------------------------------------------------------------- FD helpers


def _stencil(traj: Trajectory, k: int, dt: float) -> Optional[float]:
    t = traj.t
    steps = np.abs(np.diff(t))
    if len(steps) == 0:
        return None
    h_loc = min(steps[max(k - 1, 0)], steps[min(k, len(steps) - 1)])
    d = min(dt, max(h_loc / 2, 1e-5))
    lo, hi = sorted((float(t[0]), float(t[-1])))
    if t[k] - 2 * d < lo or t[k] + 2 * d > hi:
        return None
    return d


def _fd(func, traj: Trajectory, tk: float, d: float) -> float:
    vals = []
    for j in (-2, -1, 1, 2):
        tj = tk + j * d
        xj, yj = traj.at(tj)
        vals.append(func(tj, xj, yj))
    return (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * d)


def _in_Q(x, y) -> bool:
    return x > 0 and y > 0


# ---------------------------------------------------------------- V


@dataclass
class MonotonicityReport:
    direction: str  # non-increasing | non-decreasing
    ok: bool
    worst_violation: float
    derivative_error: float
    derivative_ok: bool
    n_checked: int
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.ok and self.derivative_ok)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def V_direction(params: ProblemParams) -> str:
    """Proven sign of dV/dt on the quadrant, or RegimeMismatch."""
    N, p, M = params.N, params.p, params.M
    crit = math.inf if N <= 2 else (N + 2) / (N - 2)
    if M > 0 and p <= crit * (1 + 1e-12):
        return "non-increasing"
    if M < 0 and p >= crit * (1 - 1e-12):
        return "non-decreasing"
    raise RegimeMismatch("V is monotone only for M>0 with p<=(N+2)/(N-2) or M<0 with p>=(N+2)/(N-2)")


def check_V_monotonicity(params: ProblemParams, traj: Trajectory, slack: float = 1e-9,
                         dt: float = 1e-3, rel_tol: float = 1e-5) -> MonotonicityReport:
    """Check the sign of dV/dt along the quadrant part of ``traj`` and the
    closed-form rate against finite differences of V.

    The rate error is measured relative to the largest |dV/dt| seen along
    the trajectory.
    """
    direction = V_direction(params)
    sgn = -1.0 if direction == "non-increasing" else 1.0
    t, x, y = np.asarray(traj.t), np.asarray(traj.x), np.asarray(traj.y)
    order = np.argsort(t)
    t, x, y = t[order], x[order], y[order]
    V = V_of(params, x, y)
    worst = 0.0
    n = 0
    for i in range(len(t) - 1):
        if not (_in_Q(x[i], y[i]) and _in_Q(x[i + 1], y[i + 1])):
            continue
        dv = (V[i + 1] - V[i]) * sgn
        allowed = -slack * (t[i + 1] - t[i]) - 1e-15 * max(1.0, abs(V[i]))
        worst = max(worst, -(dv) if dv < allowed else 0.0)
        n += 1
    ok = worst == 0.0
    rates = V_rate(params, np.asarray(traj.x), np.asarray(traj.y))
    scale = float(np.max(np.abs(rates))) or 1.0
    err = 0.0
    for k in range(len(traj.t)):
        if not _in_Q(traj.x[k], traj.y[k]):
            continue
        d = _stencil(traj, k, dt)
        if d is None:
            continue
        fd = _fd(lambda tt, xx, yy: V_of(params, xx, yy), traj, float(traj.t[k]), d)
        err = max(err, abs(fd - rates[k]) / scale)
    return MonotonicityReport(direction, ok, float(worst), float(err), bool(err <= rel_tol), n, {"rate_scale": scale})


def check_F_monotonicity(params: ProblemParams, traj: Trajectory, slack: float = 1e-9) -> dict:
    """Monotonicity of F on segments strictly below the line y = 2x/(p-1) when LM > 0."""
    k = derive_constants(params)
    if not k.L * params.M > 0:
        raise RegimeMismatch("F is monotone below the line only when LM > 0")
    sgn = -1.0 if k.L > 0 else 1.0  # F_t = -(L x_t + M y^q) x_t with x_t > 0
    direction = "non-increasing" if sgn < 0 else "non-decreasing"
    two = 2 / (params.p - 1)
    t, x, y = np.asarray(traj.t), np.asarray(traj.x), np.asarray(traj.y)
    F = F_of(params, x, y)
    below = (y < two * x) & (x > 0) & (y > 0)
    worst, n = 0.0, 0
    for i in range(len(t) - 1):
        if below[i] and below[i + 1]:
            dF = (F[i + 1] - F[i]) * sgn * (1 if t[i + 1] > t[i] else -1)
            if dF < -slack * abs(t[i + 1] - t[i]) - 1e-15 * max(1.0, abs(F[i])):
                worst = max(worst, -dF)
            n += 1
    return {"direction": direction, "ok": worst == 0.0, "worst_violation": worst, "n_checked": n}


# ---------------------------------------------------------------- Z


@dataclass
class ZReport:
    max_rel_error: float
    ok: bool
    U_sign: int  # +1, -1, or 0 when the sign changes
    n_checked: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_Z_relation(params: ProblemParams, traj: Trajectory, dt: float = 1e-3, rel_tol: float = 1e-4,
                     y_max: Optional[float] = None) -> ZReport:
    """Compare Z_r - q M |u_r|^s Z with the closed-form right side.

    Z_r is the finite-difference t-derivative of Z on the dense output,
    divided by r. Samples outside the open quadrant are skipped; ``y_max``
    restricts the sign report to samples with y <= y_max.
    """
    p, M = params.p, params.M
    k = derive_constants(params)
    ep = -(p + 1) / (p - 1)
    worst, n = 0.0, 0
    signs = set()
    for i in range(len(traj.t)):
        tk, xk, yk = float(traj.t[i]), float(traj.x[i]), float(traj.y[i])
        if not _in_Q(xk, yk):
            continue
        d = _stencil(traj, i, dt)
        if d is None:
            continue
        Zt = _fd(lambda tt, xx, yy: float(Z_of(params, tt, xx, yy)), traj, tk, d)
        r = math.exp(tk)
        ur = math.exp(ep * tk) * yk
        Zk = float(Z_of(params, tk, xk, yk))
        lhs_terms = (Zt / r, -k.q * M * ur**k.s * Zk)
        rhs = float(U_of(params, tk, xk, yk))
        # natural size of Z_r: the terms of Z itself divided by r
        a = z_exponent(params)
        z_scale = math.exp(2 * (p + 1) * k.L * tk / (p + 3)) * (
            (p + 1) * yk**2 / 2 + xk ** (p + 1) + a * xk * yk + abs(M) * xk * yk**k.q) / r
        scale = abs(lhs_terms[0]) + abs(lhs_terms[1]) + abs(rhs) + z_scale
        if scale == 0:
            continue
        worst = max(worst, abs(sum(lhs_terms) - rhs) / scale)
        n += 1
        if y_max is None or yk <= y_max:
            v = -k.L + p * (p + 3) / (p + 1) ** 2 * M * yk**k.s
            signs.add(0 if v == 0 else (1 if v > 0 else -1))
    sign = signs.pop() if len(signs) == 1 else 0
    return ZReport(worst, worst <= rel_tol, sign, n)


# ---------------------------------------------------------------- G


@dataclass
class GReport:
    all_negative: bool
    lower_bound_ok: bool
    liminf_value: float
    liminf_bound: float
    liminf_ok: bool
    n_checked: int

    def __bool__(self) -> bool:
        return self.all_negative and self.lower_bound_ok

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def liminf_bound(p: float) -> float:
    """(2(p+1)/(p(p-1)^2))^(1/(p-1))."""
    return (2 * (p + 1) / (p * (p - 1) ** 2)) ** (1 / (p - 1))


def check_G_negative(params: ProblemParams, traj: Trajectory, liminf_tol: float = 1e-3) -> GReport:
    """Sign of G along a regular trajectory for M <= -mu*(1), with the
    pointwise lower bound on u and the liminf bound at the largest radius.

    Raises RegimeMismatch when M > -mu*(1).
    """
    p, M = params.p, params.M
    mu1 = critical_constants(params).mu_star_1
    if M > -mu1:
        raise RegimeMismatch(f"G<0 is proven for M <= -mu*(1) = {-mu1:.6g}")
    q = derive_constants(params).q
    t, x, y = np.asarray(traj.t), np.asarray(traj.x), np.asarray(traj.y)
    inq = (x > 0) & (y > 0)
    # sign of G is the sign of y^2 - q x^(p+1)
    core = y[inq] ** 2 - q * x[inq] ** (p + 1)
    all_neg = bool(np.all(core < 0))
    r = np.exp(t[inq])
    u = r ** (-2 / (p - 1)) * x[inq]
    low = (1 + (p - 1) / 2 * math.sqrt(q) * r) ** (-2 / (p - 1))
    lb_ok = bool(np.all(u > low * (1 - 1e-9)))
    i_last = int(np.argmax(t))
    val = float(x[i_last])
    bound = liminf_bound(p)
    return GReport(all_neg, lb_ok, val, bound, val >= bound - liminf_tol, int(inq.sum()))


# ---------------------------------------------------------------- ceilings


@dataclass
class CeilingReport:
    name: str
    applicable: bool
    ok: bool
    bound: Optional[float]
    observed: Optional[float]
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ceilings(params: ProblemParams, traj: Trajectory, ground_state: bool = True) -> list[CeilingReport]:
    """A priori upper bounds on regular solutions, as sup over samples in Q.

    ``ground_state`` says whether the trajectory stayed in the quadrant;
    bounds stated for positive solutions on the whole half line are only
    checked in that case.
    """
    N, p, M = params.N, params.p, params.M
    k = derive_constants(params)
    x, y, t = np.asarray(traj.x), np.asarray(traj.y), np.asarray(traj.t)
    inq = (x > 0) & (y >= 0)
    xs, ys, ts = x[inq], y[inq], t[inq]
    out = []
    slack = 1e-8

    # superharmonic bound, M >= 0
    app = ground_state and M >= 0 and N >= 3 and p > N / (N - 2)
    if app:
        b1 = (2 * N / (p - 1)) ** (1 / (p - 1))
        b2 = math.inf if M == 0 else (p - 1) / 2 * (k.K / M) ** ((p + 1) / (p - 1))
        bx = min(b1, b2)
        by = min((N - 2) * b1, math.inf if M == 0 else (k.K / M) ** ((p + 1) / (p - 1)))
        out.append(CeilingReport("u-superharmonic", True, bool(xs.max() <= bx * (1 + slack)), bx, float(xs.max())))
        out.append(CeilingReport("ur-superharmonic", True, bool(ys.max() <= by * (1 + slack)), by, float(ys.max())))
    else:
        out.append(CeilingReport("u-superharmonic", False, True, None, None, "needs M>=0, N>=3, p>N/(N-2), ground state"))

    # generic bound: u <= 1 and r^(2/(p-1)) u bounded
    if ground_state and len(xs):
        u = np.exp(-2 * ts / (p - 1)) * xs
        out.append(CeilingReport("u-generic", True, bool(u.max() <= 1 + slack), 1.0, float(u.max()),
                                 f"c = sup x = {xs.max():.17g}"))
    else:
        out.append(CeilingReport("u-generic", False, True, None, None, "not a ground state"))

    # energy bound, M > 0 and p >= (N+2)/(N-2)
    app = ground_state and M > 0 and N >= 3 and p >= (N + 2) / (N - 2) * (1 - 1e-12)
    if app:
        b = ((p + 1) * k.K / (p - 1)) ** (1 / (p - 1))
        out.append(CeilingReport("u-energy", True, bool(xs.max() <= b * (1 + slack)), b, float(xs.max())))
    else:
        out.append(CeilingReport("u-energy", False, True, None, None, "needs M>0, p>=(N+2)/(N-2), ground state"))

    # log-transform bound for -mu*(2) < M < 0
    mu2 = critical_constants(params).mu_star_2
    app = N >= 2 and -mu2 < M < 0 and len(xs) > 0
    if app:
        a = 1 - (abs(M) / mu2) ** (p + 1)
        c0_fit = float(xs.max() * a ** (1 / (p - 1)))
        r = np.exp(ts)
        u = r ** (-2 / (p - 1)) * xs
        pointwise = (1 + a * (p - 1) * r**2 / (4 * N)) ** (-1 / (p - 1))
        ok = bool(np.all(u <= pointwise * (1 + slack)) and np.all(u <= 1 + slack))
        c0_derived = (4 * N / (p - 1)) ** (1 / (p - 1))
        out.append(CeilingReport("u-log", True, ok, c0_derived, c0_fit,
                                 f"a = {a:.17g}; fitted c0 = {c0_fit:.17g}"))
    else:
        out.append(CeilingReport("u-log", False, True, None, None, "needs N>=2 and -mu*(2) < M < 0"))
    return out
