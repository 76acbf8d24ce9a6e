"""Deterministic SVG phase portraits with embedded JSON metadata."""
from __future__ import annotations

import json
import math
from xml.sax.saxutils import escape
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .equilibria import classify_equilibrium, find_equilibria
from .field import make_rhs, nullclines, region_grid, region_of
from .params import ProblemParams, regime_of

WIDTH, HEIGHT, PAD = 640, 480, 40
METADATA_ID = "emdenflow-metadata"


@dataclass
class PortraitOptions:
    quiver_n: int = 20
    x_max: Optional[float] = None
    y_max: Optional[float] = None
    trajectories: Sequence[np.ndarray] = ()  # each (n, 2) array of (x, y)


def viewport(params: ProblemParams, opts: Optional[PortraitOptions] = None) -> tuple[float, float]:
    """x_max = 2 max X over equilibria (2 without equilibria); y_max follows the line."""
    opts = opts or PortraitOptions()
    eqs = find_equilibria(params)
    x_max = opts.x_max or (2 * max(e.x for e in eqs) if eqs else 2.0)
    y_max = opts.y_max or (2 * max(e.y for e in eqs) if eqs else 2 / (params.p - 1) * x_max)
    return float(x_max), float(y_max)


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _label_points(params: ProblemParams, x_max: float, y_max: float, eqs) -> dict:
    """One representative interior point per region tag, found on a grid of the viewport."""
    found: dict = {}
    n = 60
    for j in range(1, n):
        for i in range(1, n):
            x, y = x_max * i / n, y_max * j / n
            tag = region_of(params, (x, y), eqs)
            if tag in ("on-L", "on-C", "outside-Q"):
                continue
            found.setdefault(tag, []).append((x, y))
    # centroid-nearest member keeps the label inside its region
    out = {}
    for tag, pts in sorted(found.items()):
        arr = np.array(pts)
        c = arr.mean(axis=0)
        k = int(np.argmin(((arr - c) ** 2).sum(axis=1)))
        out[tag] = (float(arr[k, 0]), float(arr[k, 1]))
    return out


def portrait_svg(params: ProblemParams, opts: Optional[PortraitOptions] = None) -> str:
    """Render the phase portrait of ``params`` as an SVG document.

    The output depends only on ``params`` and ``opts``; coordinates are
    printed with fixed precision so repeated runs are byte-identical.
    """
    opts = opts or PortraitOptions()
    eqs = find_equilibria(params)
    x_max, y_max = viewport(params, opts)
    sx = (WIDTH - 2 * PAD) / x_max
    sy = (HEIGHT - 2 * PAD) / y_max

    def X(v):
        return PAD + v * sx

    def Y(v):
        return HEIGHT - PAD - v * sy

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        '<defs><marker id="arrow" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
        '<path d="M0,0 L6,3 L0,6 z" fill="#888"/></marker></defs>',
        f'<g id="axes" stroke="black" stroke-width="1">'
        f'<line x1="{_fmt(X(0))}" y1="{_fmt(Y(0))}" x2="{_fmt(X(x_max))}" y2="{_fmt(Y(0))}"/>'
        f'<line x1="{_fmt(X(0))}" y1="{_fmt(Y(0))}" x2="{_fmt(X(0))}" y2="{_fmt(Y(y_max))}"/></g>',
    ]

    # quiver of normalized arrows
    rhs = make_rhs(params)
    n = opts.quiver_n
    arrows = []
    length = 0.4 * min((WIDTH - 2 * PAD), (HEIGHT - 2 * PAD)) / n
    for j in range(n):
        for i in range(n):
            x = x_max * (i + 0.5) / n
            y = y_max * (j + 0.5) / n
            u, v = rhs(x, y)
            du, dv = u * sx, -v * sy
            norm = math.hypot(du, dv)
            if norm == 0:
                continue
            du, dv = du / norm * length, dv / norm * length
            arrows.append(f'<line x1="{_fmt(X(x))}" y1="{_fmt(Y(y))}" x2="{_fmt(X(x) + du)}" '
                          f'y2="{_fmt(Y(y) + dv)}" marker-end="url(#arrow)"/>')
    parts.append('<g id="quiver" stroke="#888" stroke-width="0.8">' + "".join(arrows) + "</g>")

    # nullclines
    nc = nullclines(params, y_max, 400)
    two = 2 / (params.p - 1)
    x_end = min(x_max, y_max / two)
    parts.append(f'<line id="nullcline-L" x1="{_fmt(X(0))}" y1="{_fmt(Y(0))}" x2="{_fmt(X(x_end))}" '
                 f'y2="{_fmt(Y(two * x_end))}" stroke="blue" stroke-width="1.5"/>')
    pts = [(x, y) for x, y in nc.C_curve if 0 <= x <= x_max and 0 <= y <= y_max]
    if pts:
        d = " ".join(f"{_fmt(X(x))},{_fmt(Y(y))}" for x, y in pts)
        parts.append(f'<polyline id="nullcline-C" points="{d}" fill="none" stroke="red" stroke-width="1.5"/>')

    # overlays
    for k, tr in enumerate(opts.trajectories):
        arr = np.asarray(tr)
        keep = (arr[:, 0] >= 0) & (arr[:, 0] <= x_max) & (arr[:, 1] >= 0) & (arr[:, 1] <= y_max)
        if keep.sum() < 2:
            continue
        d = " ".join(f"{_fmt(X(x))},{_fmt(Y(y))}" for x, y in arr[keep])
        parts.append(f'<polyline id="trajectory-{k}" points="{d}" fill="none" stroke="green" stroke-width="1"/>')

    # equilibria
    eq_meta = []
    for e in eqs:
        cls = classify_equilibrium(params, e)
        fill = {"sink": "black", "source": "white", "saddle": "orange"}.get(cls.stability, "gray")
        parts.append(f'<circle class="equilibrium" data-label="{e.label}" cx="{_fmt(X(e.x))}" cy="{_fmt(Y(e.y))}" '
                     f'r="4" fill="{fill}" stroke="black"/>')
        eq_meta.append({"label": e.label, "x": e.x, "y": e.y, "kind": cls.kind, "multiplicity": e.multiplicity})
    parts.append(f'<circle class="equilibrium" data-label="O" cx="{_fmt(X(0))}" cy="{_fmt(Y(0))}" r="3" fill="black"/>')

    # region labels
    labels = _label_points(params, x_max, y_max, eqs)
    for tag, (x, y) in labels.items():
        parts.append(f'<text class="region" x="{_fmt(X(x))}" y="{_fmt(Y(y))}" font-size="14" '
                     f'font-family="sans-serif">{tag}</text>')

    regions = sorted(region_grid(params, n=160))
    meta = {
        "params": {"N": params.N, "p": params.p, "M": params.M},
        "regime": str(regime_of(params)),
        "viewport": [0.0, x_max, 0.0, y_max],
        "equilibria": eq_meta,
        "equilibrium_count": len(eqs),
        "double_equilibrium": any(e.multiplicity == "double" for e in eqs),
        "C_bounded": nc.C_bounded,
        "regions": regions,
        "labels_drawn": sorted(labels),
    }
    parts.append(f'<metadata id="{METADATA_ID}">{escape(json.dumps(meta, sort_keys=True))}</metadata>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def read_metadata(svg_text: str) -> dict:
    """Extract the JSON metadata block from an SVG produced by :func:`portrait_svg`."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg_text)
    for el in root.iter():
        if el.tag.endswith("metadata") and el.get("id") == METADATA_ID:
            return json.loads(el.text)
    raise ValueError("no emdenflow metadata in SVG")
