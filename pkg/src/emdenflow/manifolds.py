"""Seeds for the distinguished trajectories and helpers to integrate them."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Optional

from .equilibria import Equilibrium, classify_equilibrium
from .errors import NotASaddle
from .field import PhasePoint
from .integrator import IntegrationConfig, Trajectory, integrate
from .params import ProblemParams, derive_constants

SEED_EPS_ENV = "EMDENFLOW_SEED_EPS"
BRANCHES = ("st-below-L", "st-above-L", "unst-below-L", "unst-above-L")


def seed_eps_base(default: float = 1e-7) -> float:
    """Base seed offset, overridable through the environment."""
    raw = os.environ.get(SEED_EPS_ENV)
    if raw is None or raw.strip() == "":
        return default
    value = float(raw)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{SEED_EPS_ENV} must be a positive number, got {raw!r}")
    return value


@dataclass(frozen=True)
class SeedDescriptor:
    """Starting data of a distinguished trajectory.

    ``direction`` is ``+1`` when the trajectory is followed forward in t and
    ``-1`` when it is followed backward.
    """

    kind: str  # regular | origin-stable | origin-slow | saddle-branch
    t0: float
    offset: float
    point: PhasePoint
    direction: int = 1
    eq_label: Optional[str] = None
    branch: Optional[str] = None
    seed_error: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t0": self.t0,
            "offset": self.offset,
            "point": [self.point.x, self.point.y],
            "direction": self.direction,
            "eq_label": self.eq_label,
            "branch": self.branch,
            "seed_error": self.seed_error,
        }


def default_delta(p: float) -> float:
    """Seed amplitude putting the seed radius r0 at or below 1e-3."""
    return min(1e-3, 1e-3 ** (2 / (p - 1)))


def seed_regular(params: ProblemParams, delta: Optional[float] = None) -> SeedDescriptor:
    """Seed of the regular trajectory (u(0) = 1) at x(t0) ~ delta.

    Uses the two-term small-r expansion of the regular radial solution:
    u = 1 - r^2/(2N) - c M r^(q+2), u_r = -r/N - c' M r^(q+1). The dropped
    terms are of relative order r0^4, recorded as ``seed_error``.

    Examples
    --------
    >>> s = seed_regular(ProblemParams(3, 2.0, 0.0), 1e-4)
    >>> round(s.point.x / 1e-4, 12), round(s.point.y / 1e-8 * 3, 10)
    (0.999999998333, 1.0)
    """
    N, p, M = params.N, params.p, params.M
    if delta is None:
        delta = default_delta(p)
    if not (0 < delta <= 1e-3):
        raise ValueError("delta must lie in (0, 1e-3]")
    q = derive_constants(params).q
    r0 = delta ** ((p - 1) / 2)
    t0 = math.log(r0)
    den = N * (p + 1) + 2 * p
    Nq = N ** (-q)
    x = delta * (1 - r0**2 / (2 * N) - M * (p + 1) ** 2 * r0 ** (q + 2) * Nq / ((4 * p + 2) * den))
    y = r0 ** (2 * p / (p - 1)) * (1 / N + M * (p + 1) * Nq * r0**q / den)
    err = delta * r0**4 * (1 + abs(M))
    return SeedDescriptor("regular", t0, delta, PhasePoint(x, y), 1, seed_error=err)


def seed_origin_stable(params: ProblemParams, eps: float = 1e-7) -> SeedDescriptor:
    """Seed on the stable direction (slope N-2) of the origin saddle; follow backward."""
    k = derive_constants(params)
    if not k.K > 0:
        raise NotASaddle(f"origin is not a saddle: K={k.K:.6g} <= 0")
    if not (1e-10 < eps < 1e-4):
        raise ValueError("eps must lie in (1e-10, 1e-4)")
    N = params.N
    return SeedDescriptor("origin-stable", 0.0, eps, PhasePoint(eps, (N - 2) * eps), -1,
                          eq_label="O", seed_error=eps * eps)


def seed_origin_slow(params: ProblemParams, eps: float = 1e-7) -> SeedDescriptor:
    """Seed along the slow direction of the origin source (K < 0), followed forward.

    N >= 3: eigenvector (1, N-2). N = 2: the two eigenvalues coincide; the
    seed sits on the diagonal, the direction the log-corrected solutions
    approach. N = 1: the slow eigenvalue is 2/(p-1), whose solutions leave
    the origin tangent to y = x^p.
    """
    k = derive_constants(params)
    if not k.K < 0:
        raise NotASaddle(f"origin is not a source: K={k.K:.6g} >= 0")
    if not (1e-10 < eps < 1e-4):
        raise ValueError("eps must lie in (1e-10, 1e-4)")
    N, p = params.N, params.p
    if N >= 3:
        pt = PhasePoint(eps, (N - 2) * eps)
    elif N == 2:
        pt = PhasePoint(eps, eps)
    else:
        pt = PhasePoint(eps, eps**p / (2 * p / (p - 1) + k.K))
    return SeedDescriptor("origin-slow", 0.0, eps, pt, 1, eq_label="O", seed_error=eps * eps)


def saddle_slopes(params: ProblemParams, eq: Equilibrium) -> tuple[float, float, float, float]:
    """Return (lambda_stable, lambda_unstable, slope_stable, slope_unstable)."""
    cls = classify_equilibrium(params, eq)
    if cls.kind != "saddle":
        raise NotASaddle(f"{eq.label} is {cls.kind}")
    lam_s, lam_u = sorted(v.real for v in cls.eigenvalues)
    two = 2 / (params.p - 1)
    return lam_s, lam_u, two - lam_s, two - lam_u


def seed_saddle_branches(params: ProblemParams, eq: Equilibrium, eps: Optional[float] = None) -> list[SeedDescriptor]:
    """Four seeds at ``eq +- eps v`` along the unit stable and unstable eigenvectors.

    Labels come from the side of the line y = 2x/(p-1) on which each seed
    lies. Stable branches are followed backward, unstable ones forward.
    """
    _, _, ms, mu = saddle_slopes(params, eq)
    if eps is None:
        eps = seed_eps_base() * (1 + eq.norm)
    two = 2 / (params.p - 1)
    out = []
    for kind, slope, direction in (("st", ms, -1), ("unst", mu, 1)):
        nrm = math.hypot(1.0, slope)
        vx, vy = 1 / nrm, slope / nrm
        for sgn in (1, -1):
            pt = PhasePoint(eq.x + sgn * eps * vx, eq.y + sgn * eps * vy)
            side = "below" if pt.y - two * pt.x < 0 else "above"
            out.append(SeedDescriptor("saddle-branch", 0.0, eps, pt, direction, eq_label=eq.label,
                                      branch=f"{kind}-{side}-L", seed_error=eps * eps))
    out.sort(key=lambda s: BRANCHES.index(s.branch))
    return out


def special_config(cfg: IntegrationConfig, seed: SeedDescriptor, t_len: float) -> IntegrationConfig:
    """Config for a seeded run: span of length ``t_len`` in the seed's direction
    and an absolute tolerance scaled to the seed's smallest coordinate."""
    small = min(abs(seed.point.x), abs(seed.point.y)) or abs(seed.point.x) or 1.0
    atol = min(max(1e-3 * small, 1e-30), cfg.abs_tol)
    return replace(cfg, abs_tol=atol, t_span=(seed.t0, seed.t0 + seed.direction * t_len))


def integrate_seed(params: ProblemParams, seed: SeedDescriptor, cfg: Optional[IntegrationConfig] = None,
                   t_len: float = 60.0, **kw) -> Trajectory:
    """Integrate from ``seed`` over ``t_len`` units of t in its own direction."""
    cfg = special_config(cfg or IntegrationConfig(), seed, t_len)
    return integrate(params, seed.point, cfg, seed=seed, **kw)
