"""Limit behavior of trajectories, periodic orbits and their Floquet integrals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .equilibria import Equilibrium, classify_equilibrium, find_equilibria
from .errors import NoCycleFound, RegimeMismatch, TransformInvalid
from .field import PhasePoint
from .integrator import Event, EventSpec, IntegrationConfig, Trajectory, integrate
from .params import ProblemParams, critical_constants, derive_constants

FIXED_POINT_TOL = 1e-8
NEUTRAL_BAND = 1e-6
MAX_ITER = 60
HOMOCLINIC_RADIUS = 1e-6


@dataclass
class CycleAnalysis:
    """Periodic orbit found through the return map on the line y = 2x/(p-1).

    The section is crossed where y - 2x/(p-1) increases, i.e. where x
    reaches a local maximum.
    """

    section_point: PhasePoint
    period: float
    samples: np.ndarray  # (n, 3) columns t, x, y over one period
    floquet_integral: float
    stability: str  # attracting | repelling | neutral-within-tol
    mean_y: float
    mean_y_pow: float
    amplitude: float
    residual: float
    multiplier: Optional[float] = None
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "section_point": [self.section_point.x, self.section_point.y],
            "period": self.period,
            "floquet_integral": self.floquet_integral,
            "stability": self.stability,
            "mean_y": self.mean_y,
            "mean_y_pow": self.mean_y_pow,
            "amplitude": self.amplitude,
            "residual": self.residual,
            "multiplier": self.multiplier,
        }


@dataclass
class LimitVerdict:
    """One of: to-equilibrium, limit-cycle, exits-Q, undetermined."""

    kind: str
    equilibrium: Optional[str] = None
    cycle: Optional[CycleAnalysis] = None
    side: Optional[str] = None
    point: Optional[PhasePoint] = None
    evidence: dict = field(default_factory=dict)

    def __str__(self) -> str:
        if self.kind == "to-equilibrium":
            return f"to-equilibrium({self.equilibrium})"
        if self.kind == "exits-Q":
            return f"exits-Q({self.side})"
        return self.kind

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "label": str(self)}
        if self.equilibrium is not None:
            out["equilibrium"] = self.equilibrium
        if self.side is not None:
            out["side"] = self.side
        if self.point is not None:
            out["point"] = [self.point.x, self.point.y]
        if self.cycle is not None:
            out["cycle"] = self.cycle.to_dict()
        out["evidence"] = {k: v for k, v in self.evidence.items() if isinstance(v, (int, float, str, bool))}
        return out


# ---------------------------------------------------------------- return map


def _section_events(params: ProblemParams) -> list[EventSpec]:
    two = 2 / (params.p - 1)
    return [
        EventSpec("cross-L", lambda x, y: y - two * x),
        EventSpec("exit-Q-x", lambda x, y: x, terminal=True),
        EventSpec("exit-Q-y", lambda x, y: y, terminal=True),
    ]


def cycle_config(cfg: Optional[IntegrationConfig] = None) -> IntegrationConfig:
    base = cfg or IntegrationConfig(rel_tol=1e-12, abs_tol=1e-14)
    return base


def return_map(params: ProblemParams, s: float, cfg: Optional[IntegrationConfig] = None,
               t_max: float = 500.0) -> Optional[Trajectory]:
    """Follow the orbit from (s, 2s/(p-1)) to its next section crossing.

    Returns ``None`` when the orbit leaves the quadrant, or never comes back
    within ``t_max``.
    """
    cfg = replace(cycle_config(cfg), t_span=(0.0, t_max))
    two = 2 / (params.p - 1)
    traj = integrate(params, (s, two * s), cfg, events=_section_events(params), balls=[],
                     stop=lambda e: e.kind == "cross-L" and e.direction == 1)
    if traj.termination.kind != "event":
        return None
    return traj


def _P(params, s, cfg) -> tuple[float, Optional[Trajectory]]:
    traj = return_map(params, s, cfg)
    if traj is None:
        return math.nan, None
    return traj.termination.detail["event"].point.x, traj


def _centers(params: ProblemParams) -> list[Equilibrium]:
    return find_equilibria(params)


def find_cycle(params: ProblemParams, hint, cfg: Optional[IntegrationConfig] = None,
               max_iter: int = MAX_ITER, tol: float = FIXED_POINT_TOL) -> CycleAnalysis:
    """Locate a fixed point of the return map near ``hint`` and analyze the orbit.

    The hint is projected on the section along its own orbit when it does
    not already lie on it. The fixed point is found by secant iteration on
    P(s) - s, switching to bisection once a sign change is bracketed.
    Fixed points that coincide with an equilibrium are rejected.
    """
    p = params.p
    two = 2 / (p - 1)
    hx, hy = float(hint[0]), float(hint[1])
    if abs(hy - two * hx) > 1e-12 * (1 + abs(hx)):
        cfg_h = replace(cycle_config(cfg), t_span=(0.0, 500.0))
        tr = integrate(params, (hx, hy), cfg_h, events=_section_events(params), balls=[],
                       stop=lambda e: e.kind == "cross-L" and e.direction == 1)
        if tr.termination.kind != "event":
            raise NoCycleFound("hint does not reach the section")
        hx = tr.termination.detail["event"].point.x
    eqs = _centers(params)

    s0 = hx
    P0, tr0 = _P(params, s0, cfg)
    if tr0 is None:
        raise NoCycleFound("orbit from the hint does not return to the section")
    F0 = P0 - s0
    best = (abs(F0), s0, tr0)
    s1 = P0
    bracket = None
    multiplier = None
    for _ in range(max_iter):
        if best[0] <= tol:
            break
        P1, tr1 = _P(params, s1, cfg)
        if tr1 is None:
            raise NoCycleFound(f"return map undefined at s={s1:.6g}")
        F1 = P1 - s1
        if abs(F1) < best[0]:
            best = (abs(F1), s1, tr1)
        if abs(F1) <= tol:
            break
        if F0 * F1 < 0:
            bracket = (s0, F0, s1, F1) if s0 < s1 else (s1, F1, s0, F0)
        if F1 != F0:
            multiplier = 1 + (F1 - F0) / (s1 - s0) if s1 != s0 else None
            s_new = s1 - F1 * (s1 - s0) / (F1 - F0)
        else:
            s_new = P1
        if bracket is not None:
            a, Fa, b, Fb = bracket
            if not (a < s_new < b):
                s_new = (a + b) / 2
        if not (math.isfinite(s_new) and s_new > 0):
            raise NoCycleFound("secant step left the section")
        s0, F0 = s1, F1
        s1 = s_new
        if bracket is not None:
            a, Fa, b, Fb = bracket
            # keep the bracket up to date with the newest evaluation
            if Fa * F0 < 0 and a < s0 < b:
                bracket = (a, Fa, s0, F0) if s0 > a else bracket
            elif Fb * F0 < 0 and a < s0 < b:
                bracket = (s0, F0, b, Fb)
    res, s_star, traj = best
    if res > tol:
        raise NoCycleFound(f"return map residual {res:.3e} after {max_iter} iterations")
    for e in eqs:
        if abs(s_star - e.x) <= 1e-6 * (1 + e.x):
            raise NoCycleFound(f"fixed point coincides with equilibrium {e.label}")
    if float(np.min(np.hypot(traj.x, traj.y))) < HOMOCLINIC_RADIUS:
        raise NoCycleFound("closed orbit passes through the origin: homoclinic candidate")
    return analyze_cycle(params, traj, res, multiplier)


def scan_section(params: ProblemParams, s_values: Sequence[float], cfg: Optional[IntegrationConfig] = None,
                 tol: float = FIXED_POINT_TOL) -> list[CycleAnalysis]:
    """All cycles whose section point is bracketed by consecutive ``s_values``.

    P(s) - s is sampled on the given points; each sign change is refined by
    Brent's method on the return map itself.
    """
    from scipy.optimize import brentq

    vals = []
    for s in sorted(float(v) for v in s_values):
        Ps, tr = _P(params, s, cfg)
        vals.append((s, Ps - s if tr is not None else math.nan))
    found = []
    eqs = _centers(params)
    for (a, Fa), (b, Fb) in zip(vals, vals[1:]):
        if not (math.isfinite(Fa) and math.isfinite(Fb)) or Fa * Fb > 0:
            continue
        s_star = brentq(lambda v: _P(params, v, cfg)[0] - v, a, b, xtol=1e-13, rtol=1e-14, maxiter=200)
        Ps, tr = _P(params, s_star, cfg)
        res = abs(Ps - s_star)
        if res > tol or any(abs(s_star - e.x) <= 1e-6 * (1 + e.x) for e in eqs):
            continue
        h = 1e-6 * (1 + s_star)
        d = (_P(params, s_star + h, cfg)[0] - _P(params, s_star - h, cfg)[0]) / (2 * h)
        found.append(analyze_cycle(params, tr, res, d))
    return found


def analyze_cycle(params: ProblemParams, traj: Trajectory, residual: float,
                  multiplier: Optional[float] = None) -> CycleAnalysis:
    """Period, Floquet integral and means for a one-period trajectory."""
    k = derive_constants(params)
    q, s, M, L = k.q, k.s, params.M, k.L
    T = float(traj.t[-1] - traj.t[0])
    I = traj.step_quadrature(lambda t, x, y: q * M * np.abs(y) ** s - L)
    mean_y = traj.step_quadrature(lambda t, x, y: y) / T
    mean_pow = traj.step_quadrature(lambda t, x, y: np.abs(y) ** s) / T
    ts, xs, ys = traj.dense_samples(4)
    if I < -NEUTRAL_BAND:
        stab = "attracting"
    elif I > NEUTRAL_BAND:
        stab = "repelling"
    else:
        stab = "neutral-within-tol"
    return CycleAnalysis(
        section_point=PhasePoint(float(traj.x[0]), float(traj.y[0])),
        period=T,
        samples=np.column_stack([ts, xs, ys]),
        floquet_integral=I,
        stability=stab,
        mean_y=mean_y,
        mean_y_pow=mean_pow,
        amplitude=float((xs.max() - xs.min()) / 2),
        residual=residual,
        multiplier=multiplier,
        trajectory=traj,
    )


# ---------------------------------------------------------------- Kolmogorov view


def _enclosed_equilibrium(params: ProblemParams, cyc: CycleAnalysis) -> Equilibrium:
    xs, ys = cyc.samples[:, 1], cyc.samples[:, 2]
    inside = [e for e in find_equilibria(params) if xs.min() < e.x < xs.max() and ys.min() < e.y < ys.max()]
    if not inside:
        raise RegimeMismatch("no equilibrium enclosed by the cycle")
    return inside[0]


@dataclass
class KolmogorovReport:
    floquet_xy: float
    floquet_sz: float
    sigma_bar_integral: float
    z_bar_integral: float
    period: float
    signs_agree: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def kolmogorov_floquet(params: ProblemParams, cyc: CycleAnalysis) -> KolmogorovReport:
    """Floquet integral recomputed in (sigma, z), plus the period averages
    of sigma - sigma_M and z - z_M around the enclosed equilibrium."""
    traj = cyc.trajectory
    if traj is None:
        raise ValueError("cycle carries no trajectory")
    ys = cyc.samples[:, 2]
    xs = cyc.samples[:, 1]
    if ys.min() <= 0 or xs.min() <= 0:
        raise TransformInvalid("orbit touches the boundary of the quadrant")
    p, M = params.p, params.M
    eq = _enclosed_equilibrium(params, cyc)
    sig_M = eq.y / eq.x
    z_M = eq.x**p / eq.y

    def div(t, x, y):
        sig = y / x
        z = x**p / y
        J = (sig**p * z) ** (1 / (p + 1))
        return (2 - p) * sig + 2 - z + M * (p - 1) / (p + 1) * J

    I_sz = traj.step_quadrature(div)
    sig_int = traj.step_quadrature(lambda t, x, y: y / x - sig_M)
    z_int = traj.step_quadrature(lambda t, x, y: x**p / y - z_M)
    I_xy = cyc.floquet_integral

    def sgn(v):
        return 0 if abs(v) <= NEUTRAL_BAND else (1 if v > 0 else -1)

    return KolmogorovReport(I_xy, I_sz, sig_int, z_int, cyc.period, sgn(I_xy) == sgn(I_sz))


def floquet_identity_check(params: ProblemParams, cyc: CycleAnalysis) -> dict:
    """Compare I/T with its decomposition through the enclosed equilibrium.

    The decomposition is ``q M Y^s - L - (q/T) * int (z - z_M) dt`` where
    ``(Y, z_M)`` belong to the enclosed equilibrium; the concavity check
    compares the mean of y^s with the s-th power of the mean of y.
    """
    k = derive_constants(params)
    rep = kolmogorov_floquet(params, cyc)
    eq = _enclosed_equilibrium(params, cyc)
    T = cyc.period
    lhs = cyc.floquet_integral / T
    rhs = k.q * params.M * eq.y**k.s - k.L - k.q / T * rep.z_bar_integral
    z_pred = -params.M * T * (cyc.mean_y_pow - eq.y**k.s)
    concave = cyc.mean_y_pow <= cyc.mean_y**k.s * (1 + 1e-12)
    return {
        "floquet_over_period": lhs,
        "decomposition": rhs,
        "identity_error": abs(lhs - rhs),
        "z_bar_integral": rep.z_bar_integral,
        "z_bar_predicted": z_pred,
        "sigma_bar_integral": rep.sigma_bar_integral,
        "mean_y": cyc.mean_y,
        "mean_y_pow": cyc.mean_y_pow,
        "Y_M": eq.y,
        "concavity_applies": cyc.mean_y < eq.y,
        "concavity_holds": bool(concave),
        "signs_agree": rep.signs_agree,
        "floquet_sz": rep.floquet_sz,
    }


# ---------------------------------------------------------------- sigma monotonicity


def sigma_monotonicity_check(params: ProblemParams, traj: Union[Trajectory, Sequence], slack: float = 1e-9) -> bool:
    """Whether sigma = y/x is nondecreasing once it has reached 2/(p-1).

    Only meaningful at M = -mu*; other parameters are rejected. ``traj`` may
    be a trajectory or a pair of sample arrays ``(x, y)``.
    """
    cc = critical_constants(params)
    mu = cc.mu_star
    if mu is None or abs(params.M + mu) > 1e-9 * max(1.0, mu):
        raise RegimeMismatch("sigma monotonicity is stated only at M = -mu*")
    if isinstance(traj, Trajectory):
        x, y = np.asarray(traj.x), np.asarray(traj.y)
    else:
        x, y = (np.asarray(v, dtype=float) for v in traj)
    two = 2 / (params.p - 1)
    ok = x > 0
    sig = y[ok] / x[ok]
    idx = np.nonzero(sig >= two)[0]
    if len(idx) < 2:
        return True
    tail = sig[idx[0]:]
    tail = tail[np.isfinite(tail)]
    return bool(np.all(np.diff(tail) >= -slack * np.maximum(1.0, np.abs(tail[:-1]))))


# ---------------------------------------------------------------- verdicts


def _spiral_sink(params: ProblemParams, sec: Sequence[Event]):
    """Linearly attracting equilibrium approached by the last section crossings.

    Too slow a focus never reaches the termination ball within the time
    budget; strictly shrinking gaps to a sink with negative trace settle it.
    """
    xs = [e.point.x for e in sec[-4:]]
    for eq in find_equilibria(params):
        if classify_equilibrium(params, eq).trace >= 0:
            continue
        gaps = [abs(v - eq.x) for v in xs]
        if all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= 1e-2 * (1 + eq.x):
            return eq, gaps
    return None


def classify_limit(params: ProblemParams, traj: Trajectory, direction: str = "forward",
                   cfg: Optional[IntegrationConfig] = None) -> LimitVerdict:
    """Tetrachotomy verdict for the end of ``traj`` in its integration direction.

    ``direction`` must agree with the trajectory's own time direction; the
    verdict concerns the omega-limit for forward runs and the alpha-limit
    for backward runs.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    if (direction == "forward") != traj.forward:
        raise ValueError("direction does not match the trajectory")
    term = traj.termination
    ev_log = {"n_events": len(traj.events), "t_end": float(traj.t[-1]), "termination": term.kind}
    if term.kind == "exits-Q":
        e: Event = term.detail["event"]
        side = "x=0" if e.kind == "exit-Q-x" else "y=0"
        return LimitVerdict("exits-Q", side=side, point=e.point, evidence={**ev_log, "t_exit": e.t})
    if term.kind == "equilibrium":
        return LimitVerdict("to-equilibrium", equilibrium=term.detail["label"], point=traj.end,
                            evidence={**ev_log, "distance": term.detail["distance"]})
    if term.kind == "blowup":
        return LimitVerdict("undetermined", point=traj.end, evidence={**ev_log, "reason": "blowup"})
    # a cycle candidate needs several returns to the section
    sec = traj.crossings("cross-L", 1)
    if len(sec) >= 4 and direction == "forward":
        sink = _spiral_sink(params, sec)
        if sink is not None:
            eq, gaps = sink
            return LimitVerdict("to-equilibrium", equilibrium=eq.label, point=traj.end,
                                evidence={**ev_log, "spiral_gap": gaps[-1], "spiral_contraction": gaps[-1] / gaps[0]})
        try:
            cyc = find_cycle(params, sec[-1].point, cfg)
        except NoCycleFound as exc:
            return LimitVerdict("undetermined", point=traj.end, evidence={**ev_log, "reason": str(exc)})
        xs = [e.point.x for e in sec[-4:]]
        gaps = [abs(v - cyc.section_point.x) for v in xs]
        approaching = gaps[-1] <= max(gaps[0], 1e-6 * (1 + cyc.section_point.x))
        if approaching:
            return LimitVerdict("limit-cycle", cycle=cyc, point=traj.end,
                                evidence={**ev_log, "section_gap": gaps[-1]})
    if len(sec) >= 4 and direction == "backward":
        # alpha-limit cycle: a repelling cycle seen from inside or outside
        try:
            cyc = find_cycle(params, sec[-1].point, cfg)
        except NoCycleFound as exc:
            return LimitVerdict("undetermined", point=traj.end, evidence={**ev_log, "reason": str(exc)})
        return LimitVerdict("limit-cycle", cycle=cyc, point=traj.end, evidence=ev_log)
    return LimitVerdict("undetermined", point=traj.end, evidence={**ev_log, "reason": term.kind})


def classify_seed(params: ProblemParams, seed, cfg: Optional[IntegrationConfig] = None,
                  t_len: float = 80.0, widen: float = 4.0) -> tuple[LimitVerdict, Trajectory]:
    """Integrate a seed and classify its limit; an undetermined first answer
    triggers one rerun over a span ``widen`` times longer."""
    from .manifolds import integrate_seed

    direction = "forward" if seed.direction > 0 else "backward"
    traj = integrate_seed(params, seed, cfg, t_len)
    verdict = classify_limit(params, traj, direction, None)
    if verdict.kind == "undetermined" and widen > 1:
        traj = integrate_seed(params, seed, cfg, t_len * widen)
        verdict = classify_limit(params, traj, direction, None)
        verdict.evidence["widened"] = True
    return verdict, traj
