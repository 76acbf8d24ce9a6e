"""Problem parameters, derived constants and the regime table.

The planar system studied throughout the package is

    x' = 2x/(p-1) - y,
    y' = -K y + |x|^(p-1) x + M |y|^q,

obtained from radial solutions of -Δu = u^p + M|∇u|^q through
x = r^(2/(p-1)) u, y = -r^((p+1)/(p-1)) u_r and t = ln r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import RegimeUndefined

BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``N``, exponent ``p`` and gradient coefficient ``M``."""

    N: int
    p: float
    M: float = 0.0

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise ValueError(f"p must be a finite real > 1, got {self.p!r}")
        if not math.isfinite(self.M):
            raise ValueError(f"M must be finite, got {self.M!r}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "M", float(self.M))

    def with_M(self, M: float) -> "ProblemParams":
        return ProblemParams(self.N, self.p, M)


@dataclass(frozen=True)
class DerivedConstants:
    K: float
    L: float
    q: float
    s: float  # (p-1)/(p+1), the exponent of y in the linearization


def derive_constants(params: ProblemParams) -> DerivedConstants:
    """Return ``K``, ``L``, ``q`` and ``s`` for the given parameters.

    Examples
    --------
    >>> c = derive_constants(ProblemParams(3, 7.0))
    >>> round(c.K, 12), round(c.L, 12), c.q
    (0.666666666667, 0.333333333333, 1.75)
    """
    N, p = params.N, params.p
    K = ((N - 2) * p - N) / (p - 1)
    L = ((N - 2) * p - (N + 2)) / (p - 1)
    q = 2 * p / (p + 1)
    s = (p - 1) / (p + 1)
    return DerivedConstants(K=K, L=L, q=q, s=s)


def equilibrium_coeff(p: float) -> float:
    """Leading coefficient ((p-1)/2)^p of the equilibrium equation."""
    return ((p - 1) / 2) ** p


def f_M(params: ProblemParams, y: float) -> float:
    """Equilibrium function ((p-1)/2)^p y^(p-1) + M y^s - K, for y > 0."""
    c = derive_constants(params)
    p = params.p
    return equilibrium_coeff(p) * y ** (p - 1) + params.M * y ** c.s - c.K


def mu_star_formula(N: float, p: float) -> float:
    """(p+1) ((N-(N-2)p)/(2p))^(p/(p+1)); real only when N-(N-2)p >= 0."""
    base = (N - (N - 2) * p) / (2 * p)
    if base < 0:
        raise RegimeUndefined(f"mu*(N) undefined for N={N}, p={p}")
    return (p + 1) * base ** (p / (p + 1))


def double_root_y(params: ProblemParams) -> float:
    """Minimizer of ``f_M`` on (0, inf); only meaningful for M < 0."""
    p, M = params.p, params.M
    if M >= 0:
        raise ValueError("f_M has an interior minimum only for M < 0")
    return ((2 / (p - 1)) * (-M / (p + 1)) ** (1 / p)) ** ((p + 1) / (p - 1))


def _node_constant(params: ProblemParams, c: float) -> Optional[tuple[float, float]]:
    """Solve M Y^s = c together with f_M(Y) = 0; returns (M, Y) or None."""
    k = derive_constants(params)
    rad = (k.K - c) / equilibrium_coeff(params.p)
    if not rad > 0:
        return None
    # Y^s = rad^(1/(p+1)) never overflows, even when Y itself does
    try:
        Y = rad ** (1 / (params.p - 1))
    except OverflowError:
        Y = math.inf
    return c / rad ** (1 / (params.p + 1)), Y


@dataclass(frozen=True)
class CriticalConstants:
    """Critical values of ``M``; entries are ``None`` where undefined.

    ``m_node_hi`` and ``m_node_lo`` are the node thresholds usually written
    M0 and M1.
    """

    mu_star: Optional[float]
    mu_star_1: float
    mu_star_2: float
    m_bar: Optional[float]
    m_node_hi: Optional[float]
    m_node_lo: Optional[float]
    notes: dict = field(default_factory=dict, compare=False)

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise RegimeUndefined(f"{name} is not defined here: {self.notes.get(name, '')}")
        return value

    @property
    def m0(self) -> Optional[float]:
        return self.m_node_hi

    @property
    def m1(self) -> Optional[float]:
        return self.m_node_lo


def _is_close(a: float, b: float) -> bool:
    return abs(a - b) <= BOUNDARY_RTOL * max(1.0, abs(a), abs(b))


def critical_constants(params: ProblemParams) -> CriticalConstants:
    """Evaluate every critical constant that exists for ``(N, p)``.

    Undefined entries are ``None``; :meth:`CriticalConstants.require`
    converts them into :class:`RegimeUndefined`.
    """
    N, p = params.N, params.p
    k = derive_constants(params)
    notes: dict[str, str] = {}
    mu1 = mu_star_formula(1, p)
    mu2 = mu_star_formula(2, p)

    sub_K = N <= 2 or p < N / (N - 2) or _is_close(p, N / (N - 2))
    mu_star = mu_star_formula(N, p) if sub_K else None
    if mu_star is not None and N >= 3 and _is_close(p, N / (N - 2)):
        mu_star = 0.0
    if mu_star is None:
        notes["mu_star"] = "needs N <= 2 or p <= N/(N-2)"

    m_bar = None
    if N >= 2:
        if N >= 3 and _is_close(p, (N + 2) / (N - 2)):
            m_bar = 0.0
        else:
            sol = _node_constant(params, (p + 1) * k.L / (2 * p))
            m_bar = None if sol is None else sol[0]
    else:
        notes["m_bar"] = "needs N >= 2"

    # node thresholds: p > (N+2)/(N-2) (M > 0), 1point regime or 2points regime
    root = math.sqrt(N - 1)
    c0 = (p + 1) * (k.L - 2 + 2 * root) / (2 * p)
    c1 = (p + 1) * (k.L - 2 - 2 * root) / (2 * p)
    supercrit = N >= 3 and p > (N + 2) / (N - 2) and not _is_close(p, (N + 2) / (N - 2))
    one_point = (
        N >= 3
        and (p > N / (N - 2) or _is_close(p, N / (N - 2)))
        and p < (N + 2) / (N - 2)
        and not _is_close(p, (N + 2) / (N - 2))
    )
    two_points = k.K < 0 and not _is_close(k.K, 0.0)

    def branch_ok(sol: Optional[tuple[float, float]]) -> bool:
        # in the two-equilibria regime the threshold concerns the upper root
        if sol is None:
            return False
        M, Y = sol
        if M >= 0:
            return False
        # compare logarithms: both sides overflow as p -> 1
        pp = params.p
        log_y0 = (pp + 1) / (pp - 1) * (math.log(2 / (pp - 1)) + math.log(-M / (pp + 1)) / pp)
        return math.log(Y) > log_y0

    m0 = None
    if supercrit:
        sol = _node_constant(params, c0)
        m0 = sol[0] if sol else None
    elif one_point and c0 < 0:
        sol = _node_constant(params, c0)
        m0 = sol[0] if sol else None
    elif two_points and N >= 3:
        sol = _node_constant(params, c0)
        m0 = sol[0] if branch_ok(sol) else None
    if m0 is None:
        notes["m_node_hi"] = "no node threshold above the Hopf value in this regime"

    m1 = None
    if supercrit and N >= 11 and k.L - 2 - 2 * root > 0:
        sol = _node_constant(params, c1)
        m1 = sol[0] if sol else None
    elif one_point:
        sol = _node_constant(params, c1)
        m1 = sol[0] if sol else None
    elif two_points and N >= 2:
        sol = _node_constant(params, c1)
        m1 = sol[0] if branch_ok(sol) else None
    if m1 is None:
        notes["m_node_lo"] = "no node threshold below the Hopf value in this regime"

    return CriticalConstants(
        mu_star=mu_star,
        mu_star_1=mu1,
        mu_star_2=mu2,
        m_bar=m_bar,
        m_node_hi=m0,
        m_node_lo=m1,
        notes=notes,
    )


class RegimeCase(str, Enum):
    NONE_POSITIVE = "M>=0 & K<=0: no equilibrium"
    ONE_POSITIVE = "M>=0 & K>0: one equilibrium"
    ONE_NEGATIVE = "M<0 & K>=0: one equilibrium"
    NONE_NEGATIVE = "M<0 & K<0 & M>-mu*: no equilibrium"
    DOUBLE = "M<0 & K<0 & M=-mu*: double equilibrium"
    TWO = "M<0 & K<0 & M<-mu*: two equilibria"


EXPECTED_COUNT = {
    RegimeCase.NONE_POSITIVE: 0,
    RegimeCase.ONE_POSITIVE: 1,
    RegimeCase.ONE_NEGATIVE: 1,
    RegimeCase.NONE_NEGATIVE: 0,
    RegimeCase.DOUBLE: 1,
    RegimeCase.TWO: 2,
}


@dataclass(frozen=True)
class RegimeTag:
    """Case of the root table plus the boundary flags that were hit.

    Boundary flags: ``"K=0"`` (p = N/(N-2)), ``"L=0"`` (p = (N+2)/(N-2)),
    ``"M=0"`` and ``"M=-mu*"``.
    """

    case: RegimeCase
    boundaries: frozenset = frozenset()

    @property
    def expected_equilibria(self) -> int:
        return EXPECTED_COUNT[self.case]

    def __str__(self) -> str:
        extra = f" [{', '.join(sorted(self.boundaries))}]" if self.boundaries else ""
        return self.case.value + extra


def regime_of(params: ProblemParams) -> RegimeTag:
    """Classify ``params`` into one of the six rows of the root table."""
    N, p, M = params.N, params.p, params.M
    k = derive_constants(params)
    flags = set()
    K_zero = N >= 3 and _is_close(p, N / (N - 2))
    if K_zero:
        flags.add("K=0")
    if N >= 3 and _is_close(p, (N + 2) / (N - 2)):
        flags.add("L=0")
    M_zero = abs(M) <= BOUNDARY_RTOL
    if M_zero:
        flags.add("M=0")
        M = 0.0
    K_pos = k.K > 0 and not K_zero
    if M >= 0:
        case = RegimeCase.ONE_POSITIVE if K_pos else RegimeCase.NONE_POSITIVE
    elif K_pos or K_zero:
        case = RegimeCase.ONE_NEGATIVE
    else:
        mu = mu_star_formula(N, p)
        if _is_close(-M, mu):
            case = RegimeCase.DOUBLE
            flags.add("M=-mu*")
        elif -M < mu:
            case = RegimeCase.NONE_NEGATIVE
        else:
            case = RegimeCase.TWO
    return RegimeTag(case, frozenset(flags))
