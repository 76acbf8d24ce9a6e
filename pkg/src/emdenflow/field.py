"""Vector fields, nullclines and the region decomposition of the quadrant."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadK
from .params import ProblemParams, derive_constants


@dataclass(frozen=True)
class PhasePoint:
    """Point of the (x, y) plane: x = r^(2/(p-1)) u, y = -r^((p+1)/(p-1)) u_r."""

    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y

    def __getitem__(self, i: int) -> float:
        return (self.x, self.y)[i]


@dataclass(frozen=True)
class KolmogorovPoint:
    """Point of the (sigma, z) plane: sigma = y/x, z = x^p / y."""

    sigma: float
    z: float


def spow(v: float, e: float) -> float:
    """Sign-symmetric power |v|^e."""
    return abs(v) ** e


def make_rhs(params: ProblemParams):
    """Return a fast closure ``f(x, y) -> (x_t, y_t)`` for the planar system."""
    k = derive_constants(params)
    p, M, K, q = params.p, params.M, k.K, k.q
    two = 2.0 / (p - 1)
    pm1 = p - 1

    def rhs(x: float, y: float) -> tuple[float, float]:
        ax = abs(x)
        return two * x - y, -K * y + ax**pm1 * x + M * abs(y) ** q

    return rhs


def eval_H(params: ProblemParams, pt) -> tuple[float, float]:
    """Components of the planar field at ``pt``.

    Examples
    --------
    >>> eval_H(ProblemParams(3, 7.0, 0.0), PhasePoint(1.0, 0.0))
    (0.3333333333333333, 1.0)
    """
    x, y = pt
    return make_rhs(params)(float(x), float(y))


def jacobian(params: ProblemParams, x: float, y: float) -> np.ndarray:
    """Analytic Jacobian of the planar field (``y != 0`` for ``M != 0``)."""
    k = derive_constants(params)
    p, M = params.p, params.M
    dy = -k.K
    if M != 0.0 and y != 0.0:
        dy += k.q * M * abs(y) ** (k.q - 1) * math.copysign(1.0, y)
    return np.array([[2 / (p - 1), -1.0], [p * abs(x) ** (p - 1), dy]])


def to_kolmogorov(params: ProblemParams, pt) -> KolmogorovPoint:
    x, y = pt
    return KolmogorovPoint(y / x, abs(x) ** (params.p - 1) * x / y)


def from_kolmogorov(params: ProblemParams, kpt: KolmogorovPoint) -> PhasePoint:
    """Inverse map on the open quadrant: x^(p-1) = sigma z, y = sigma x."""
    x = (kpt.sigma * kpt.z) ** (1 / (params.p - 1))
    return PhasePoint(x, kpt.sigma * x)


def eval_V(params: ProblemParams, kpt: KolmogorovPoint) -> tuple[float, float]:
    """Kolmogorov field in (sigma, z); both axes are invariant.

    Examples
    --------
    >>> eval_V(ProblemParams(3, 2.0, 0.0), KolmogorovPoint(1.0, 1.0))
    (1.0, 0.0)
    """
    N, p, M = params.N, params.p, params.M
    s, z = kpt.sigma, kpt.z
    J = abs(abs(s) ** (p - 1) * s * z) ** (1 / (p + 1))
    return s * (s + 2 - N + z + M * J), z * (N - p * s - z - M * J)


def kolmogorov_divergence(params: ProblemParams, sigma: float, z: float) -> float:
    """Divergence of the Kolmogorov field on the open quadrant."""
    p, M = params.p, params.M
    J = (sigma**p * z) ** (1 / (p + 1))
    return (2 - p) * sigma + 2 - z + M * (p - 1) / (p + 1) * J


def eval_V_desingularized(params: ProblemParams, spt: tuple[float, float], k: int) -> tuple[float, float]:
    """Field after sigma = s^(2k+1), z = w^(2k+1) with an integer ``k > p+1``."""
    if int(k) != k or k <= params.p + 1:
        raise BadK(f"k must be an integer > p+1 = {params.p + 1}, got {k}")
    N, p, M = params.N, params.p, params.M
    st, zt = spt
    m = 2 * k + 1
    sm, zm = st**m, zt**m
    J = abs((abs(st) ** (p - 1) * st) ** m * zm) ** (1 / (p + 1))
    return st * (sm + 2 - N + zm + M * J) / m, zt * (N - p * sm - zm - M * J) / m


# ---------------------------------------------------------------- nullclines


def psi(params: ProblemParams, y: np.ndarray) -> np.ndarray:
    """x = psi(y) on the curve where y_t = 0 (NaN where the radicand is negative)."""
    k = derive_constants(params)
    y = np.asarray(y, dtype=float)
    rad = k.K * y - params.M * np.abs(y) ** k.q
    out = np.full_like(y, np.nan)
    ok = rad >= 0
    out[ok] = rad[ok] ** (1 / params.p)
    return out


@dataclass
class Nullclines:
    L_line: np.ndarray  # (n, 2) samples of y = 2x/(p-1)
    C_curve: np.ndarray  # (m, 2) samples of x = psi(y), NaN rows removed
    C_bounded: bool
    psi_argmax: Optional[float] = None


def nullclines(params: ProblemParams, y_max: float, n: int = 400) -> Nullclines:
    """Sample the line where x_t = 0 and the curve where y_t = 0 up to ``y_max``."""
    if not y_max > 0:
        raise ValueError("y_max must be positive")
    p = params.p
    ys = np.linspace(0.0, y_max, n)
    line = np.column_stack([(p - 1) * ys / 2, ys])
    # denser sampling near 0 where psi has infinite slope
    yc = np.unique(np.concatenate([ys, y_max * np.geomspace(1e-9, 1.0, n)]))
    xc = psi(params, yc)
    ok = ~np.isnan(xc)
    curve = np.column_stack([xc[ok], yc[ok]])
    k = derive_constants(params)
    M = params.M
    bounded = bool(M > 0 and k.K > 0)
    argmax = None
    if M > 0 and k.K > 0:
        argmax = (k.K / (k.q * M)) ** ((p + 1) / (p - 1))
    return Nullclines(line, curve, bounded, argmax)


# ---------------------------------------------------------------- regions

REGION_TAGS = ("A", "B", "C", "D", "E", "on-L", "on-C", "outside-Q")


def region_of(params: ProblemParams, pt, eqs=None) -> str:
    """Region tag of a point of the closed quadrant.

    A: x_t < 0, y_t < 0; B: x_t > 0, y_t < 0; C: x_t > 0, y_t > 0;
    D and E: x_t < 0, y_t > 0; when K < 0 and M <= -mu* the set splits into
    E (left of the first equilibrium) and D (right of the last one).
    """
    x, y = float(pt[0]), float(pt[1])
    if x < 0 or y < 0:
        return "outside-Q"
    h1, h2 = eval_H(params, (x, y))
    band = 1e-12 * (1 + abs(x) + abs(y))
    if abs(h1) <= band:
        return "on-L"
    if abs(h2) <= band:
        return "on-C"
    if h1 < 0 and h2 < 0:
        return "A"
    if h1 > 0 and h2 < 0:
        return "B"
    if h1 > 0 and h2 > 0:
        return "C"
    if eqs is None:
        from .equilibria import find_equilibria

        eqs = find_equilibria(params)
    if (len(eqs) == 2 or (eqs and eqs[0].index == "double")) and x < eqs[0].x:
        return "E"
    return "D"


def region_grid(params: ProblemParams, x_max: Optional[float] = None, y_max: Optional[float] = None,
                n: int = 200, log: bool = True) -> set[str]:
    """Set of region tags met on an ``n`` x ``n`` interior grid.

    With ``log=True`` the grid is geometric over nine decades, so thin
    regions near the origin and far regions are both sampled.
    """
    from .equilibria import find_equilibria

    eqs = find_equilibria(params)
    scale = max([1.0] + [e.y for e in eqs])
    if log:
        xs = np.geomspace(1e-6 * scale, (x_max or 1e3 * scale), n)
        ys = np.geomspace(1e-6 * scale, (y_max or 1e3 * scale), n)
    else:
        xs = np.linspace(x_max / n, x_max, n)
        ys = np.linspace(y_max / n, y_max, n)
    tags = set()
    for x in xs:
        for y in ys:
            tags.add(region_of(params, (x, y), eqs))
    tags.discard("on-L")
    tags.discard("on-C")
    return tags
