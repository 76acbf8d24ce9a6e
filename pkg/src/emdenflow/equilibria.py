"""Equilibria of the planar system and their local classification."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

from scipy.optimize import brentq

from .errors import NotACenterCandidate, NotAnEquilibrium
from .params import (
    ProblemParams,
    RegimeCase,
    derive_constants,
    double_root_y,
    equilibrium_coeff,
    f_M,
    mu_star_formula,
    regime_of,
)

ROOT_TOL = 1e-10
DOUBLE_TOL = 1e-9
TRACE_TOL = 1e-9


@dataclass(frozen=True)
class Equilibrium:
    """Fixed point ``(x, y)`` of the planar system.

    ``index`` is one of ``origin``, ``single``, ``first``, ``second``,
    ``double``; ``multiplicity`` is ``simple`` or ``double``.
    """

    x: float
    y: float
    index: str
    multiplicity: str = "simple"

    @property
    def label(self) -> str:
        return {"origin": "O", "single": "P", "first": "P1", "second": "P2", "double": "P*"}[self.index]

    @property
    def norm(self) -> float:
        return math.hypot(self.x, self.y)


ORIGIN = Equilibrium(0.0, 0.0, "origin")


@dataclass
class Classification:
    """Linearization data at an equilibrium."""

    eigenvalues: tuple[complex, complex]
    trace: float
    det: float
    discriminant: float
    kind: str
    lyapunov_coeff: Optional[float] = None
    alpha_sq: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def stability(self) -> str:
        """Coarse verdict: ``sink``, ``source``, ``saddle`` or ``neutral``."""
        if self.kind == "saddle":
            return "saddle"
        if self.kind in ("sink", "node-attracting", "spiral-attracting", "weak-sink"):
            return "sink"
        if self.kind in ("source", "node-repelling", "spiral-repelling", "weak-source"):
            return "source"
        if self.kind == "degenerate-node":
            return "sink" if self.trace < 0 else "source"
        return "neutral"


def _bracket_upper(params: ProblemParams, lo: float, hi: float) -> float:
    while f_M(params, hi) <= 0:
        lo, hi = hi, 2 * hi
        if hi > 1e300:
            raise RuntimeError("could not bracket the upper root")
    return hi


def _solve(params: ProblemParams, lo: float, hi: float) -> float:
    return brentq(lambda y: f_M(params, y), lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


def _make(params: ProblemParams, y: float, index: str, mult: str = "simple") -> Equilibrium:
    return Equilibrium((params.p - 1) * y / 2, y, index, mult)


def find_equilibria(params: ProblemParams) -> list[Equilibrium]:
    """Return the positive equilibria, sorted by increasing ``x``.

    The count follows :func:`emdenflow.params.regime_of`; roots are bracketed
    with the explicit upper bounds for ``Y`` and refined with Brent's method.
    The origin is not included.

    Examples
    --------
    >>> [round(e.x, 10) for e in find_equilibria(ProblemParams(3, 7.0, 0.0))]
    [0.7782717162]
    """
    tag = regime_of(params)
    case = tag.case
    k = derive_constants(params)
    p, M = params.p, params.M
    a = equilibrium_coeff(p)
    if case in (RegimeCase.NONE_POSITIVE, RegimeCase.NONE_NEGATIVE):
        return []
    if case == RegimeCase.ONE_POSITIVE:
        if "M=0" in tag.boundaries:
            return [_make(params, (k.K / a) ** (1 / (p - 1)), "single")]
        hi = (k.K / a) ** (1 / (p - 1))
        if f_M(params, hi) <= 0:
            hi = _bracket_upper(params, hi / 2, hi)
        return [_make(params, _solve(params, 1e-300, hi), "single")]
    y0 = double_root_y(params)
    if case == RegimeCase.ONE_NEGATIVE:
        hi = _bracket_upper(params, y0, 2 * y0)
        return [_make(params, _solve(params, y0, hi), "single")]
    fmin = f_M(params, y0)
    # roundoff can push fmin above zero at the boundary of the TWO case
    if case == RegimeCase.DOUBLE or fmin >= 0:
        return [_make(params, y0, "double", "double")]
    # two roots straddle the minimizer; f(0+) = -K > 0
    lo_end = y0
    while f_M(params, lo_end) < 0 and lo_end > 1e-300:
        lo_end /= 2
    y1 = _solve(params, lo_end, y0)
    hi = _bracket_upper(params, y0, 2 * y0)
    y2 = _solve(params, y0, hi)
    return [_make(params, y1, "first"), _make(params, y2, "second")]


def equilibrium_residual(params: ProblemParams, eq: Equilibrium) -> float:
    if eq.index == "origin":
        return 0.0
    return abs(f_M(params, eq.y))


def bounds_report(params: ProblemParams, eqs: Optional[list[Equilibrium]] = None) -> list[dict]:
    """Evaluate the explicit two-sided bounds on the equilibrium abscissae.

    Returns one record ``{"name", "lower", "value", "upper", "ok"}`` per
    applicable inequality. Large-``|M|`` bounds are reported only when
    ``|M| >= 10 mu*``.
    """
    if eqs is None:
        eqs = find_equilibria(params)
    N, p, M = params.N, params.p, params.M
    k = derive_constants(params)
    K = k.K
    out: list[dict] = []
    e = (p + 1) / (p - 1)

    def rec(name, lo, val, hi, strict=False):
        slack = 1e-12 * (1 + abs(val))
        if strict:
            lo_ok, hi_ok = lo < val + slack, val < hi + slack
        else:
            lo_ok, hi_ok = lo <= val + slack, val <= hi + slack
        out.append({"name": name, "lower": lo, "value": val, "upper": hi, "lower_ok": bool(lo_ok),
                    "upper_ok": bool(hi_ok), "ok": bool(lo_ok and hi_ok)})

    if M > 0 and K > 0 and eqs:
        X = eqs[0].x
        base = (p - 1) / 2 * (K / M) ** e
        corr = max(0.0, 1 - (1 / M) * ((p - 1) / 2) ** p * (K / M) ** p)
        rec("positive-M", base * corr**e, X, base)
    if M < 0 and K >= 0 and eqs:
        X = eqs[0].x
        t1 = (2 * K / (p - 1)) ** (1 / (p - 1))
        t2 = (2 / (p - 1)) ** (2 / (p - 1)) * abs(M) ** ((p + 1) / (p * (p - 1)))
        rec("negative-M-one-root", max(t1, t2), X, 2 ** (2 / (p - 1)) * (t1 + t2))
    if M < 0 and K < 0 and len(eqs) == 2:
        mu = mu_star_formula(N, p)
        if abs(M) >= 10 * mu:
            X1, X2 = eqs[0].x, eqs[1].x
            base1 = (p - 1) / 2 * (K / M) ** e
            fac1 = (1 - (2 / K) * ((p - 1) * K / (2 * M)) ** (p + 1)) ** e
            rec("two-roots-first", base1, X1, base1 * fac1, strict=True)
            if p <= 2:
                # the correction undershoots the first-order shift of the root,
                # (p+1)/(p-1) against p+1, so the upper side can fail here
                out[-1]["note"] = "upper side not valid for p <= 2"
            base2 = (2 / (p - 1)) ** (2 / (p - 1)) * (-M) ** ((p + 1) / (p * (p - 1)))
            fac2 = (1 - K / (M * abs(M) ** (1 / p))) ** e
            rec("two-roots-second", base2 * fac2, X2, base2, strict=True)
    return out


# ---------------------------------------------------------------- linearization


def _kind_from(trace: float, det: float, disc: float, tol: float = TRACE_TOL) -> str:
    scale = 1.0 + abs(trace) + abs(det)
    if abs(det) <= tol * scale:
        return "bt-degenerate" if abs(trace) <= tol * scale else "saddle-node"
    if det < 0:
        return "saddle"
    if abs(trace) <= tol * scale:
        return "center-candidate"
    if abs(disc) <= tol * scale * scale:
        return "degenerate-node"
    if disc < 0:
        return "spiral-attracting" if trace < 0 else "spiral-repelling"
    return "node-attracting" if trace < 0 else "node-repelling"


def _eigs(trace: float, det: float) -> tuple[complex, complex]:
    root = cmath.sqrt(trace * trace - 4 * det)
    l1, l2 = (trace - root) / 2, (trace + root) / 2
    return (complex(l1), complex(l2))


def classify_origin(params: ProblemParams) -> Classification:
    """Linearization at the origin: eigenvalues ``-K`` and ``2/(p-1)``.

    The eigenvector of ``-K`` has slope ``N-2``; that of ``2/(p-1)`` is
    horizontal.
    """
    k = derive_constants(params)
    lam_stable, lam_fast = -k.K, 2 / (params.p - 1)
    trace, det = lam_stable + lam_fast, lam_stable * lam_fast
    disc = (lam_fast - lam_stable) ** 2
    if params.N == 2:
        kind = "degenerate-node"
    elif abs(k.K) <= 1e-12:
        kind = "saddle-node"
    elif k.K > 0:
        kind = "saddle"
    else:
        kind = "source"
    return Classification(
        eigenvalues=(complex(lam_stable), complex(lam_fast)),
        trace=trace,
        det=det,
        discriminant=disc,
        kind=kind,
        extra={"slope_slow": params.N - 2.0, "slope_fast": 0.0, "gap": lam_fast - lam_stable},
    )


def linear_coeffs(params: ProblemParams, eq: Equilibrium) -> tuple[float, float]:
    """Trace and determinant from the closed-form characteristic trinomial."""
    k = derive_constants(params)
    g = k.q * params.M * eq.y**k.s
    return g - k.L, 2 * k.K - g


def classify_equilibrium(params: ProblemParams, eq: Equilibrium) -> Classification:
    """Classify a positive equilibrium through its characteristic trinomial."""
    if eq.index == "origin":
        return classify_origin(params)
    k = derive_constants(params)
    if equilibrium_residual(params, eq) > ROOT_TOL * (1 + abs(k.K)) * 10 or eq.y <= 0:
        raise NotAnEquilibrium(f"f_M residual {equilibrium_residual(params, eq):.3e} at {eq}")
    trace, det = linear_coeffs(params, eq)
    disc = trace * trace - 4 * det
    kind = _kind_from(trace, det, disc)
    cls = Classification(_eigs(trace, det), trace, det, disc, kind)
    if kind == "center-candidate" and params.N >= 3 and abs(k.L) > 1e-12:
        lam = lyapunov_coefficient(params, eq, _trace=trace)
        cls.lyapunov_coeff = lam
        cls.alpha_sq = 4 / (params.p - 1) ** 2 + params.N - 2
        cls.kind = "weak-sink" if lam < 0 else "weak-source"
    return cls


def lyapunov_coefficient(params: ProblemParams, eq: Equilibrium, _trace: Optional[float] = None) -> float:
    """First Lyapunov coefficient at a center candidate (``N >= 3``).

    Negative values mean a weak sink, positive values a weak source.
    """
    N, p = params.N, params.p
    if N < 3:
        raise NotACenterCandidate("the Hopf normal form needs N >= 3")
    trace = _trace if _trace is not None else linear_coeffs(params, eq)[0]
    if abs(trace) > 1e-8:
        raise NotACenterCandidate(f"trace {trace:.3e} is not zero")
    k = derive_constants(params)
    if abs(k.L) <= 1e-14:
        raise NotACenterCandidate("L = 0: the linear center is not isolated")
    Y = eq.y
    alpha_sq = 4 / (p - 1) ** 2 + N - 2
    gamma = math.sqrt(N - 2)
    return -alpha_sq * (p - 1) * (N + 1) * k.L / ((p + 1) ** 2 * Y**2) / gamma


def hopf_quadratic_coeffs(params: ProblemParams, eq: Equilibrium) -> dict:
    """Taylor coefficients of the nonlinear part at the center candidate."""
    p, M = params.p, params.M
    X, Y = eq.x, eq.y
    return {
        "c1": p * (p - 1) / 2 * X ** (p - 2),
        "c2": p * (p - 1) / (p + 1) ** 2 * M * Y ** (-2 / (p + 1)),
        "c3": p * (p - 1) * (p - 2) / 6 * X ** (p - 3),
        "c4": -2 * p * (p - 1) / (3 * (p + 1) ** 3) * M * Y ** (-(p + 3) / (p + 1)),
    }


# ---------------------------------------------------------------- N = 2 degeneracy


@dataclass(frozen=True)
class BTNormalForm:
    beta1: float
    beta2: float
    coeff_A: float
    coeff_B: float
    sign_BA: int
    alpha1: float
    intermediates: dict = field(default_factory=dict, compare=False)


def bt_normal_form(p: float, alpha1: float) -> BTNormalForm:
    """Leading-order unfolding coefficients at the double zero eigenvalue (N = 2).

    Only first-order terms in ``alpha1`` are kept and ``alpha2 = 0``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if abs(alpha1) > 0.1:
        raise ValueError("alpha1 must be small (|alpha1| <= 0.1)")
    y0 = p ** (-1 / (p - 1)) * (2 / (p - 1)) ** ((p + 1) / (p - 1))
    s = (p - 1) / (p + 1)
    mu_bar = (p + 1) * p ** (-p / (p + 1))
    g = {
        "g00": alpha1 * y0 ** (2 * p / (p + 1)),
        "g10": 4 * p * alpha1 / (p * p - 1) * y0**s,
        "g01": -2 * p * alpha1 / (p + 1) * y0**s,
        "g11": -4 * p / (p + 1) ** 2 * (mu_bar + alpha1) * y0 ** (-2 / (p + 1)),
        "g20": -4 * p / (p + 1) ** 2 * (mu_bar - 2 * alpha1 / (p - 1)) * y0 ** (-2 / (p + 1)),
        "g02": -2 * p * (p - 1) / (p + 1) ** 2 * (mu_bar + alpha1) * y0 ** (-2 / (p + 1)),
    }
    A = -2 * p / (p + 1) * (1 / p) ** (p / (p + 1)) * y0 ** (-2 / (p + 1))
    B = -4 / (p + 1) * (1 / p) ** (p / (p + 1)) * y0 ** (-2 / (p + 1))
    beta1 = -64 / (p * p - 1) * alpha1 * y0**s
    beta2 = (8 * p * p + 2 * p - 1) / (p * p - 1) * alpha1 * y0**s
    inter = dict(g, y0=y0, mu1=g["g00"], mu_bar=mu_bar)
    return BTNormalForm(beta1, beta2, A, B, 1 if B / A > 0 else -1, alpha1, inter)

