"""Shooting gaps g and h, their zeros, and the Hopf scan at the positive equilibrium."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .classifier import NoCycleFound, classify_seed, find_cycle, scan_section
from .equilibria import classify_equilibrium, find_equilibria, lyapunov_coefficient
from .errors import RegimeMismatch, UndeterminedTrajectory
from .integrator import IntegrationConfig, Trajectory
from .manifolds import SeedDescriptor, integrate_seed, seed_origin_stable, seed_regular, seed_saddle_branches
from .params import ProblemParams, RegimeCase, critical_constants, derive_constants, regime_of

M_TOL = 1e-8
MAX_BISECT = 40
T_LEN = 80.0
WIDEN = 4.0

CONVENTIONS = {
    "Mbar<M": "g = first section crossing of the regular trajectory minus first backward crossing of the origin-stable trajectory",
    "psuperM<0": "g = farthest section crossing of the regular trajectory minus farthest backward crossing of the origin-stable trajectory",
    "psubM<0": "g = first section crossing of the regular trajectory minus first backward crossing of the stable branch above the line at P1",
    "h": "h = first section crossing of the unstable branch below the line at P1 minus first backward crossing of the stable branch above it",
}


@dataclass
class GridPoint:
    M: float
    value: float
    x_a: float
    x_b: float
    verdicts: tuple = ()
    convention: str = ""
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"M": self.M, "value": self.value, "x_a": self.x_a, "x_b": self.x_b,
                "verdicts": list(self.verdicts), "convention": self.convention, "notes": list(self.notes)}


@dataclass
class ShootResult:
    """Grid of gap values, sign-change brackets and refined zeros."""

    target: str  # g | h
    N: int
    p: float
    convention: str
    grid: list[GridPoint]
    brackets: list[tuple[float, float]]
    refined: list[tuple[float, float]]
    failures: list[dict] = field(default_factory=list)

    @property
    def zeros(self) -> list[float]:
        return [m for m, _ in self.refined]

    @property
    def conjecture_gap(self) -> Optional[float]:
        """|max zero - min zero|; None when no zero was refined."""
        if not self.refined:
            return None
        z = self.zeros
        return max(z) - min(z)

    @property
    def below_resolution(self) -> Optional[bool]:
        gap = self.conjecture_gap
        return None if gap is None else gap <= 10 * M_TOL

    def zero_nearest(self, M_ref: float) -> float:
        return min(self.zeros, key=lambda m: abs(m - M_ref))

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "N": self.N,
            "p": self.p,
            "convention": self.convention,
            "convention_text": CONVENTIONS[self.convention],
            "grid": [g.to_dict() for g in self.grid],
            "signs": [int(np.sign(g.value)) for g in self.grid],
            "brackets": [list(b) for b in self.brackets],
            "refined": [list(r) for r in self.refined],
            "conjecture_gap": self.conjecture_gap,
            "below_resolution": self.below_resolution,
            "failures": self.failures,
        }


# ---------------------------------------------------------------- crossings


def _section_x(params: ProblemParams, seed: SeedDescriptor, cfg: IntegrationConfig, which: str,
               t_len: float = T_LEN) -> tuple[float, list[str]]:
    """x at the requested crossing (increasing in forward time) of the line.

    ``which`` is ``first`` (first crossing met in the seed's own direction)
    or ``farthest`` (largest x among all crossings met). A trajectory that
    converges to an equilibrium without crossing returns that equilibrium's x.
    """
    notes = []
    want = 1
    for attempt in range(2):
        span = t_len * (WIDEN if attempt else 1.0)
        stop = (lambda e: e.kind == "cross-L" and e.direction == want) if which == "first" else None
        traj = integrate_seed(params, seed, cfg, span, stop=stop)
        xs = [e.point.x for e in traj.crossings("cross-L", want)]
        if xs:
            return (xs[0] if which == "first" else max(xs)), notes
        term = traj.termination
        if term.kind == "equilibrium":
            eq = next(e for e in find_equilibria(params) if e.label == term.detail["label"]) \
                if term.detail["label"] != "O" else None
            if eq is not None:
                notes.append(f"{seed.kind}: monotone convergence to {eq.label}, x = X")
                return eq.x, notes
        near = [e for e in find_equilibria(params)
                if math.hypot(traj.end.x - e.x, traj.end.y - e.y) <= 1e-4 * (1 + e.norm)]
        if near and term.kind == "budget-exhausted" and attempt == 1:
            notes.append(f"{seed.kind}: slow convergence to {near[0].label}, x = X")
            return near[0].x, notes
        if term.kind == "blowup":
            notes.append(f"{seed.kind}: unbounded before any crossing, x = inf")
            return math.inf, notes
        if term.kind == "exits-Q":
            break
    raise UndeterminedTrajectory(f"{seed.kind} ({seed.branch or ''}) has no section crossing; "
                                 f"termination {traj.termination.kind}")


def _saddle(params: ProblemParams):
    eqs = find_equilibria(params)
    if len(eqs) != 2:
        raise RegimeMismatch("the saddle P1 exists only with two equilibria (K<0, M<-mu*)")
    return eqs[0]


def _branch(params: ProblemParams, name: str) -> SeedDescriptor:
    return next(s for s in seed_saddle_branches(params, _saddle(params)) if s.branch == name)


def g_convention(params: ProblemParams) -> str:
    """Convention implied by the regime of ``params``."""
    N, p, M = params.N, params.p, params.M
    k = derive_constants(params)
    tag = regime_of(params)
    if tag.case == RegimeCase.TWO:
        return "psubM<0"
    if k.K > 0 and M > 0 and N >= 3 and p > (N + 2) / (N - 2):
        return "Mbar<M"
    if k.K > 0 and M < 0 and N >= 3 and p > (N + 2) / (N - 2):
        return "psuperM<0"
    raise RegimeMismatch(f"no shooting convention for g at N={N}, p={p}, M={M}")


def g_value(params: ProblemParams, cfg: Optional[IntegrationConfig] = None,
            convention: Optional[str] = None) -> GridPoint:
    cfg = cfg or IntegrationConfig()
    conv = convention or g_convention(params)
    if conv == "Mbar<M":
        xa, na = _section_x(params, seed_regular(params), cfg, "first")
        xb, nb = _section_x(params, seed_origin_stable(params), cfg, "first")
    elif conv == "psuperM<0":
        xa, na = _section_x(params, seed_regular(params), cfg, "farthest")
        xb, nb = _section_x(params, seed_origin_stable(params), cfg, "farthest")
    elif conv == "psubM<0":
        xa, na = _section_x(params, seed_regular(params), cfg, "first")
        xb, nb = _section_x(params, _branch(params, "st-above-L"), cfg, "first")
    else:
        raise ValueError(f"unknown convention {conv}")
    return GridPoint(params.M, xa - xb, xa, xb, (), conv, tuple(na + nb))


def h_value(params: ProblemParams, cfg: Optional[IntegrationConfig] = None) -> GridPoint:
    cfg = cfg or IntegrationConfig()
    xa, na = _section_x(params, _branch(params, "unst-below-L"), cfg, "first")
    xb, nb = _section_x(params, _branch(params, "st-above-L"), cfg, "first")
    return GridPoint(params.M, xa - xb, xa, xb, (), "h", tuple(na + nb))


def _verdicts(params: ProblemParams, target: str, cfg: IntegrationConfig) -> tuple:
    if target == "g":
        seeds = [seed_regular(params)]
        if derive_constants(params).K > 0:
            seeds.append(seed_origin_stable(params))
        else:
            seeds.append(_branch(params, "st-above-L"))
    else:
        seeds = [_branch(params, "unst-below-L"), _branch(params, "st-above-L")]
    out = []
    for s in seeds:
        v, _ = classify_seed(params, s, cfg, T_LEN, WIDEN)
        out.append(f"{s.branch or s.kind}: {v}")
    return tuple(out)


def _eval_point(args) -> dict:
    N, p, M, target, conv, cfg, with_verdicts = args
    params = ProblemParams(N, p, M)
    try:
        gp = g_value(params, cfg, conv) if target == "g" else h_value(params, cfg)
        if with_verdicts:
            gp.verdicts = _verdicts(params, target, cfg)
        return {"ok": True, "point": gp}
    except (UndeterminedTrajectory, RegimeMismatch) as exc:
        return {"ok": False, "M": M, "error": f"{type(exc).__name__}: {exc}"}


def default_workers() -> int:
    return os.cpu_count() or 1


def _run_grid(jobs, workers: int) -> list[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [_eval_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_eval_point, jobs))


def _scan(N: int, p: float, M_grid: Sequence[float], target: str, conv: str,
          cfg: Optional[IntegrationConfig], workers: int, refine: bool, verdicts: bool) -> ShootResult:
    cfg = cfg or IntegrationConfig()
    grid_M = sorted(float(m) for m in M_grid)
    jobs = [(N, p, m, target, conv, cfg, verdicts) for m in grid_M]
    results = _run_grid(jobs, workers)
    grid = [r["point"] for r in results if r["ok"]]
    failures = [{"M": r["M"], "error": r["error"]} for r in results if not r["ok"]]
    brackets = []
    for a, b in zip(grid, grid[1:]):
        if a.value * b.value < 0:
            brackets.append((a.M, b.M))
    refined = []
    if refine:
        for lo, hi in brackets:
            refined.append(refine_zero(N, p, lo, hi, target, conv, cfg))
    return ShootResult(target, N, p, conv, grid, brackets, refined, failures)


def refine_zero(N: int, p: float, lo: float, hi: float, target: str, conv: str,
                cfg: Optional[IntegrationConfig] = None, xtol: float = M_TOL) -> tuple[float, float]:
    """Brent refinement of a bracketed zero; returns (M*, |gap at M*|)."""
    cfg = cfg or IntegrationConfig()

    def f(M):
        params = ProblemParams(N, p, M)
        gp = g_value(params, cfg, conv) if target == "g" else h_value(params, cfg)
        return gp.value

    m = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=MAX_BISECT)
    return float(m), abs(f(m))


def default_grid(lo: float, hi: float, n: int = 64) -> np.ndarray:
    """Geometric grid in the distance to ``lo`` (denser near ``lo``)."""
    if n < 2:
        raise ValueError("grid needs at least two points")
    span = hi - lo
    return lo + span * np.geomspace(1e-3, 1.0, n)


def shoot_g(N: int, p: float, M_grid: Sequence[float], cfg: Optional[IntegrationConfig] = None,
            workers: int = 1, refine: bool = True, verdicts: bool = False,
            convention: Optional[str] = None) -> ShootResult:
    """Evaluate g on ``M_grid``, bracket its sign changes and refine the zeros.

    The convention comes from the regime of the grid's first point unless
    given; every grid point must belong to the same regime.
    """
    grid = list(M_grid)
    conv = convention or g_convention(ProblemParams(N, p, grid[0]))
    for m in grid:
        if g_convention(ProblemParams(N, p, m)) != conv:
            raise RegimeMismatch(f"M={m} lies outside the {conv} regime")
    return _scan(N, p, grid, "g", conv, cfg, workers, refine, verdicts)


def shoot_h(N: int, p: float, M_grid: Sequence[float], cfg: Optional[IntegrationConfig] = None,
            workers: int = 1, refine: bool = True, verdicts: bool = False) -> ShootResult:
    """Evaluate h (two-equilibria regime only) on ``M_grid``."""
    grid = list(M_grid)
    for m in grid:
        if regime_of(ProblemParams(N, p, m)).case != RegimeCase.TWO:
            raise RegimeMismatch(f"h needs two equilibria; M={m} gives {regime_of(ProblemParams(N, p, m))}")
    return _scan(N, p, grid, "h", "h", cfg, workers, refine, verdicts)


def refinement_stability(N: int, p: float, lo: float, hi: float, target: str = "g",
                         convention: Optional[str] = None, cfg: Optional[IntegrationConfig] = None,
                         factor: float = 10.0) -> dict:
    """Refine one bracket at the given and at ``factor``-times tighter tolerances."""
    cfg = cfg or IntegrationConfig()
    conv = convention or (g_convention(ProblemParams(N, p, lo)) if target == "g" else "h")
    tight = replace(cfg, rel_tol=cfg.rel_tol / factor, abs_tol=cfg.abs_tol / factor)
    m1, r1 = refine_zero(N, p, lo, hi, target, conv, cfg)
    m2, r2 = refine_zero(N, p, lo, hi, target, conv, tight)
    return {"M": m1, "M_tight": m2, "shift": abs(m1 - m2), "residual": r1, "residual_tight": r2}


# ---------------------------------------------------------------- Hopf


def _trace_at(N: int, p: float, M: float) -> float:
    params = ProblemParams(N, p, M)
    eqs = find_equilibria(params)
    if not eqs:
        raise RegimeMismatch(f"no positive equilibrium at M={M}")
    eq = eqs[-1]
    return classify_equilibrium(params, eq).trace


def hopf_scan(N: int, p: float, M_grid: Optional[Sequence[float]] = None,
              offsets: Sequence[float] = (0.01, 0.04), cfg: Optional[IntegrationConfig] = None) -> dict:
    """Locate the zero of the trace at the upper equilibrium and probe the cycles it spawns.

    The cycle is looked for on the side where the equilibrium has the
    opposite stability to the weak focus at the crossing.
    """
    if N < 3:
        raise RegimeMismatch("needs N >= 3")
    cc = critical_constants(ProblemParams(N, p, 0.0))
    report: dict = {"N": N, "p": p, "m_bar": cc.m_bar}
    if abs(p - (N + 2) / (N - 2)) <= 1e-12 * p:
        report.update({"crossing": None, "note": "critical exponent: the trace vanishes only at M = 0"})
        return report
    m_bar = cc.require("m_bar")
    if M_grid is None:
        w = max(0.5, abs(m_bar))
        M_grid = np.linspace(m_bar - 0.5 * w, m_bar + 0.5 * w, 41)
    vals = []
    for m in M_grid:
        try:
            vals.append((float(m), _trace_at(N, p, float(m))))
        except RegimeMismatch:
            continue
    crossing = None
    for (a, ta), (b, tb) in zip(vals, vals[1:]):
        if ta == 0:
            crossing = a
            break
        if ta * tb < 0:
            crossing = brentq(lambda m: _trace_at(N, p, m), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            break
    report["crossing"] = crossing
    if crossing is None:
        report["note"] = "no sign change of the trace on the grid"
        return report
    report["agreement"] = abs(crossing - m_bar)
    params0 = ProblemParams(N, p, m_bar)
    eq0 = find_equilibria(params0)[-1]
    lam = lyapunov_coefficient(params0, eq0)
    report["lyapunov"] = lam
    # trace increases with M when M Y^s increases; probe the side of opposite stability
    slope = _trace_at(N, p, m_bar + 1e-4) - _trace_at(N, p, m_bar - 1e-4)
    side = (1.0 if slope > 0 else -1.0) * (1.0 if lam < 0 else -1.0)
    report["cycle_side"] = "M > m_bar" if side > 0 else "M < m_bar"
    cycles = []
    for off in offsets:
        M = m_bar + side * off
        params = ProblemParams(N, p, M)
        eq = find_equilibria(params)[-1]
        found = None
        for c in (0.5, 1.0, 2.0, 4.0):
            hint = eq.x * (1 + c * math.sqrt(off))
            try:
                found = find_cycle(params, (hint, 2 * hint / (p - 1)), cfg)
                break
            except NoCycleFound:
                continue
        if found is None:
            # the cycle may already be large; bracket it along the section
            cands = scan_section(params, eq.x * (1 + np.geomspace(1e-3, 2.0, 160)), cfg)
            found = cands[0] if cands else None
        cycles.append({"offset": off, "M": M, "amplitude": None if found is None else found.amplitude,
                       "stability": None if found is None else found.stability,
                       "floquet_integral": None if found is None else found.floquet_integral,
                       "period": None if found is None else found.period})
    report["cycles"] = cycles
    amps = [c["amplitude"] for c in cycles]
    if len(amps) >= 2 and all(a is not None for a in amps):
        ratio = amps[-1] / amps[0]
        expected = math.sqrt(offsets[-1] / offsets[0])
        report["amplitude_ratio"] = ratio
        report["sqrt_law_ratio"] = expected
        report["sqrt_law_ok"] = 0.7 * expected < ratio < 1.4 * expected
    return report
