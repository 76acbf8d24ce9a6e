"""Command-line entry point: constants, equilibria, classification, CSV
trajectories, SVG portraits, diagnostics, shooting scans and JSON reports.

Every numeric value is printed with 17 significant digits. Files are written
through a temporary file in the target directory and renamed into place, so
a failed run never leaves a partial file behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from typing import Any, Optional, Sequence

import numpy as np

from . import errors
from .bifurcation import default_workers, shoot_g, shoot_h
from .classifier import classify_seed
from .diagnostics import (F_of, G_of, V_of, Z_of, ceilings, check_F_monotonicity, check_G_negative,
                          check_V_monotonicity, check_Z_relation)
from .equilibria import classify_equilibrium, classify_origin, find_equilibria
from .field import PhasePoint, region_of
from .integrator import IntegrationConfig, integrate, trajectory_to_radial
from .manifolds import (SeedDescriptor, integrate_seed, seed_origin_slow, seed_origin_stable, seed_regular,
                        seed_saddle_branches)
from .params import ProblemParams, critical_constants, derive_constants, regime_of
from .portrait import PortraitOptions, portrait_svg

SCHEMA_VERSION = 1
CSV_HEADER = ("t", "r", "x", "y", "u", "ur", "region", "F", "V", "Z", "G")

EXIT_OK, EXIT_REGIME, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# flag defaults; a JSON config file fills anything the command line leaves unset
DEFAULTS: dict[str, Any] = {
    "N": 3,
    "p": 7.0,
    "M": 0.0,
    "rtol": 1e-10,
    "atol": 1e-12,
    "t_len": 60.0,
    "seed": "regular",
    "delta": None,
    "eps": 1e-7,
    "stride": 0.05,
    "out": None,
    "quiver_n": 20,
    "overlay": [],
    "target": "g",
    "grid": None,
    "n": 24,
    "workers": None,
    "verdicts": False,
    "input": None,
    "shoot": None,
}


# ---------------------------------------------------------------- serialization


def fmt_float(v: float) -> str:
    """17 significant digits; non-finite values use the JSON extensions Python reads back."""
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def to_json(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Serialize ``obj`` like ``json.dumps(..., sort_keys=True)`` with 17-digit floats."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(obj[k], indent, _level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent, _level + 1) for v in seq) + "\n" + pad + "]"
    if isinstance(obj, complex):
        return to_json([obj.real, obj.imag], indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary sibling and ``os.replace``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".emdenflow-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        atomic_write(path, text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------- shared builders


def _opt(v):
    return None if v is None else float(v)


def constants_dict(params: ProblemParams) -> dict:
    k = derive_constants(params)
    c = critical_constants(params)
    return {
        "K": k.K,
        "L": k.L,
        "q": k.q,
        "mu_star": _opt(c.mu_star),
        "mu_star_1": c.mu_star_1,
        "mu_star_2": c.mu_star_2,
        "m_bar": _opt(c.m_bar),
        "m0": _opt(c.m0),
        "m1": _opt(c.m1),
    }


def equilibria_list(params: ProblemParams) -> list[dict]:
    out = []
    cls = classify_origin(params)
    out.append({"label": "O", "x": 0.0, "y": 0.0, "kind": cls.kind,
                "eigs": [[e.real, e.imag] for e in cls.eigenvalues]})
    for e in find_equilibria(params):
        cls = classify_equilibrium(params, e)
        out.append({"label": e.label, "x": e.x, "y": e.y, "kind": cls.kind,
                    "eigs": [[v.real, v.imag] for v in cls.eigenvalues]})
    return out


def params_dict(params: ProblemParams) -> dict:
    return {"N": params.N, "p": params.p, "M": params.M}


def integration_config(ns) -> IntegrationConfig:
    return IntegrationConfig(rel_tol=ns.rtol, abs_tol=ns.atol)


def resolve_seed(params: ProblemParams, spec: str, ns) -> SeedDescriptor:
    """Turn a seed spec into a descriptor.

    Accepted forms: ``regular``, ``origin-stable``, ``origin-slow``,
    ``branch:<name>`` (saddle branch at the saddle equilibrium),
    ``eq:<label>`` (start on an equilibrium), ``point:x,y`` (forward) and
    ``point-back:x,y`` (backward).
    """
    if spec == "regular":
        return seed_regular(params, ns.delta)
    if spec == "origin-stable":
        return seed_origin_stable(params, ns.eps)
    if spec == "origin-slow":
        return seed_origin_slow(params, ns.eps)
    head, _, tail = spec.partition(":")
    if head == "branch":
        saddles = [e for e in find_equilibria(params) if classify_equilibrium(params, e).kind == "saddle"]
        if not saddles:
            raise errors.NotASaddle(f"no saddle equilibrium at {params}")
        for s in seed_saddle_branches(params, saddles[0]):
            if s.branch == tail:
                return s
        raise ValueError(f"unknown branch {tail!r}")
    if head == "eq":
        for e in find_equilibria(params):
            if e.label == tail:
                return SeedDescriptor("equilibrium", 0.0, 0.0, PhasePoint(e.x, e.y), 1, eq_label=e.label)
        raise errors.NotAnEquilibrium(f"no equilibrium labelled {tail!r} at {params}")
    if head in ("point", "point-back"):
        x, y = (float(v) for v in tail.split(","))
        return SeedDescriptor("point", 0.0, 0.0, PhasePoint(x, y), 1 if head == "point" else -1)
    raise ValueError(f"unrecognized seed {spec!r}")


def run_seed(params: ProblemParams, seed: SeedDescriptor, ns):
    cfg = integration_config(ns)
    if seed.kind == "equilibrium":
        # a capped step keeps the dense output from wandering at a rest point
        cfg = replace(cfg, h_max=1.0).with_span(0.0, ns.t_len)
        traj = integrate(params, seed.point, cfg, balls=[], seed=seed)
        from .classifier import LimitVerdict
        return LimitVerdict("to-equilibrium", equilibrium=seed.eq_label, point=seed.point,
                            evidence={"start_on_equilibrium": True}), traj
    if seed.kind == "point":
        from .classifier import classify_limit
        traj = integrate_seed(params, seed, cfg, ns.t_len)
        return classify_limit(params, traj, "forward" if seed.direction > 0 else "backward"), traj
    return classify_seed(params, seed, cfg, t_len=ns.t_len)


def _event_dict(e) -> dict:
    return {"kind": e.kind, "t": e.t, "x": e.point.x, "y": e.point.y, "direction": e.direction}


# ---------------------------------------------------------------- commands


def cmd_constants(params: ProblemParams, ns) -> int:
    out = {"params": params_dict(params), "regime": str(regime_of(params)), "constants": constants_dict(params)}
    emit(to_json(out), ns.out)
    return EXIT_OK


def cmd_equilibria(params: ProblemParams, ns) -> int:
    out = {"params": params_dict(params), "regime": str(regime_of(params)), "equilibria": equilibria_list(params)}
    emit(to_json(out), ns.out)
    return EXIT_OK


def cmd_classify(params: ProblemParams, ns) -> int:
    seed = resolve_seed(params, ns.seed, ns)
    verdict, traj = run_seed(params, seed, ns)
    out = {"params": params_dict(params), "seed": seed.to_dict(), "verdict": verdict.to_dict(),
           "termination": {"kind": traj.termination.kind}}
    emit(to_json(out), ns.out)
    return EXIT_NUMERIC if verdict.kind == "undetermined" else EXIT_OK


def trajectory_rows(params: ProblemParams, traj, stride: float) -> list[list]:
    """Sample ``traj`` every ``stride`` units of t; returns CSV rows."""
    t0, t1 = traj.t[0], traj.t[-1]
    n = int(math.floor(abs(t1 - t0) / stride + 1e-9))
    ts = t0 + np.sign(t1 - t0 or 1.0) * stride * np.arange(n + 1)
    if abs(ts[-1] - t1) > 1e-12:
        ts = np.append(ts, t1)
    xy = traj.at_many(ts)
    x, y = xy[:, 0], xy[:, 1]
    p = params.p
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        r = np.exp(ts)
        u = x * np.exp(-2 * ts / (p - 1))
        ur = -y * np.exp(-(p + 1) * ts / (p - 1))
        F = F_of(params, x, y)
        V = V_of(params, x, y)
        Z = Z_of(params, ts, x, y)
        G = G_of(params, ts, x, y)
    eqs = find_equilibria(params)
    rows = []
    for i in range(len(ts)):
        rows.append([ts[i], r[i], x[i], y[i], u[i], ur[i], region_of(params, (x[i], y[i]), eqs),
                     F[i], V[i], Z[i], G[i]])
    return rows


def cmd_trajectory(params: ProblemParams, ns) -> int:
    if not ns.stride > 0:
        raise ValueError("stride must be positive")
    if ns.out is None:
        raise ValueError("trajectory needs --out for the CSV file")
    seed = resolve_seed(params, ns.seed, ns)
    verdict, traj = run_seed(params, seed, ns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in trajectory_rows(params, traj, ns.stride):
        w.writerow([v if isinstance(v, str) else fmt_float(float(v)) for v in row])
    side = {
        "params": params_dict(params),
        "seed": seed.to_dict(),
        "seed_error": seed.seed_error,
        "verdict": verdict.to_dict(),
        "termination": {"kind": traj.termination.kind},
        "events": [_event_dict(e) for e in traj.events],
        "stride": ns.stride,
        "csv": os.path.basename(ns.out),
    }
    side_text = to_json(side) + "\n"
    # both files go through temporaries; the sidecar is written first so a
    # failing CSV path leaves neither behind
    sidecar = ns.out + ".json"
    atomic_write(sidecar, side_text)
    try:
        atomic_write(ns.out, buf.getvalue())
    except BaseException:
        os.unlink(sidecar)
        raise
    return EXIT_NUMERIC if verdict.kind == "undetermined" else EXIT_OK


def cmd_portrait(params: ProblemParams, ns) -> int:
    overlays = []
    for spec in ns.overlay or []:
        seed = resolve_seed(params, spec, ns)
        traj = integrate_seed(params, seed, integration_config(ns), ns.t_len)
        t, x, y = traj.dense_samples(4)
        overlays.append(np.column_stack([x, y]))
    svg = portrait_svg(params, PortraitOptions(quiver_n=ns.quiver_n, trajectories=overlays))
    emit(svg, ns.out)
    return EXIT_OK


def _checked(fn, *a, **kw) -> dict:
    try:
        res = fn(*a, **kw)
    except errors.RegimeMismatch as exc:
        return {"applies": False, "reason": str(exc)}
    if isinstance(res, list):
        return {"applies": True, "items": [r.to_dict() for r in res]}
    if hasattr(res, "to_dict"):
        return {"applies": True, "passed": bool(res), **res.to_dict()}
    return {"applies": True, **res}


def cmd_diagnose(params: ProblemParams, ns) -> int:
    seed = resolve_seed(params, ns.seed, ns)
    verdict, traj = run_seed(params, seed, ns)
    ground = verdict.kind == "to-equilibrium" and seed.kind == "regular"
    out = {
        "params": params_dict(params),
        "seed": seed.to_dict(),
        "verdict": verdict.to_dict(),
        "V": _checked(check_V_monotonicity, params, traj),
        "F": _checked(check_F_monotonicity, params, traj),
        "Z": _checked(check_Z_relation, params, traj),
        "G": _checked(check_G_negative, params, traj),
        "ceilings": _checked(ceilings, params, traj, ground_state=ground),
    }
    emit(to_json(out), ns.out)
    return EXIT_NUMERIC if verdict.kind == "undetermined" else EXIT_OK


def default_shoot_grid(params: ProblemParams, target: str, n: int) -> np.ndarray:
    """Interior grid of the interval where the theory puts the zero."""
    c = critical_constants(params)
    k = derive_constants(params)
    if target == "g" and k.K > 0 and params.M >= 0:
        lo, hi = c.require("m_bar"), c.require("m0")
    elif k.K < 0:
        lo, hi = -c.mu_star_1, c.require("m_bar")
    else:
        raise errors.RegimeMismatch(f"no default {target} grid at N={params.N}, p={params.p}; pass --grid")
    pad = 1e-3 * (hi - lo)
    return np.linspace(lo + pad, hi - pad, n)


def parse_grid(text: str) -> np.ndarray:
    """``lo,hi,n`` (uniform) or an explicit list ``m1;m2;...``."""
    if ";" in text:
        return np.array([float(v) for v in text.split(";") if v.strip()])
    lo, hi, n = text.split(",")
    return np.linspace(float(lo), float(hi), int(n))


def shoot_dict(params: ProblemParams, ns) -> dict:
    grid = parse_grid(ns.grid) if ns.grid else default_shoot_grid(params, ns.target, ns.n)
    workers = ns.workers or default_workers()
    cfg = integration_config(ns)
    if ns.target == "g":
        res = shoot_g(params.N, params.p, grid, cfg, workers=workers, verdicts=ns.verdicts)
    elif ns.target == "h":
        res = shoot_h(params.N, params.p, grid, cfg, workers=workers, verdicts=ns.verdicts)
    else:
        raise ValueError(f"target must be g or h, got {ns.target!r}")
    return res.to_dict()


def cmd_shoot(params: ProblemParams, ns) -> int:
    out = {"schema_version": SCHEMA_VERSION, "params": params_dict(params), "shoot": shoot_dict(params, ns)}
    emit(to_json(out), ns.out)
    return EXIT_OK


def build_report(params: ProblemParams, shoot: Optional[dict]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "params": params_dict(params),
        "constants": constants_dict(params),
        "equilibria": equilibria_list(params),
        "shoot": shoot,
    }


def cmd_report(params: ProblemParams, ns) -> int:
    """Full report. With ``--input`` the parameters and shoot section come from
    an earlier report (or shoot output) and everything else is regenerated."""
    shoot = None
    if ns.input:
        with open(ns.input) as fh:
            prev = json.load(fh)
        if prev.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {prev.get('schema_version')!r}")
        pp = prev["params"]
        params = ProblemParams(pp["N"], pp["p"], pp["M"])
        shoot = prev.get("shoot")
    elif ns.shoot:
        shoot = shoot_dict(params, replace_ns(ns, target=ns.shoot))
    emit(to_json(build_report(params, shoot)), ns.out)
    return EXIT_OK


def replace_ns(ns, **kw):
    out = argparse.Namespace(**vars(ns))
    for k, v in kw.items():
        setattr(out, k, v)
    return out


COMMANDS = {
    "constants": cmd_constants,
    "equilibria": cmd_equilibria,
    "classify": cmd_classify,
    "trajectory": cmd_trajectory,
    "portrait": cmd_portrait,
    "diagnose": cmd_diagnose,
    "shoot": cmd_shoot,
    "report": cmd_report,
}


# ---------------------------------------------------------------- argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; flags override it")
    common.add_argument("--N", type=int)
    common.add_argument("--p", type=float)
    common.add_argument("--M", type=float)
    common.add_argument("--rtol", type=float, help="integrator relative tolerance")
    common.add_argument("--atol", type=float, help="integrator absolute tolerance")
    common.add_argument("--t-len", dest="t_len", type=float, help="integration length in t = ln r")
    common.add_argument("-o", "--out", help="output path (stdout when omitted)")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", help="regular | origin-stable | origin-slow | branch:NAME | eq:LABEL | point:x,y")
    seeded.add_argument("--delta", type=float, help="regular seed amplitude")
    seeded.add_argument("--eps", type=float, help="origin seed offset")

    parser = argparse.ArgumentParser(prog="emdenflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common], help="derived and critical constants")
    sub.add_parser("equilibria", parents=[common], help="equilibria and their linearization")
    sub.add_parser("classify", parents=[common, seeded], help="limit of a seeded trajectory")
    tr = sub.add_parser("trajectory", parents=[common, seeded], help="CSV samples plus JSON sidecar")
    tr.add_argument("--stride", type=float, help="sampling step in t")
    po = sub.add_parser("portrait", parents=[common, seeded], help="SVG phase portrait")
    po.add_argument("--quiver-n", dest="quiver_n", type=int)
    po.add_argument("--overlay", action="append", help="seed spec to overlay; repeatable")
    sub.add_parser("diagnose", parents=[common, seeded], help="monotone functionals and ceilings")
    sh = sub.add_parser("shoot", parents=[common], help="sign scan and refinement of g or h")
    rp = sub.add_parser("report", parents=[common], help="JSON report")
    for sp in (sh, rp):
        sp.add_argument("--grid", help="lo,hi,n or m1;m2;...")
        sp.add_argument("--n", type=int, help="points in the default grid")
        sp.add_argument("--workers", type=int, help="worker processes (default: hardware threads)")
        sp.add_argument("--verdicts", action="store_true", default=None, help="record per-point verdicts")
    sh.add_argument("--target", choices=("g", "h"))
    rp.add_argument("--input", help="earlier report or shoot JSON to regenerate")
    rp.add_argument("--shoot", choices=("g", "h"), help="run a shooting scan into the report")
    return parser


def resolve_options(ns: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from the defaults."""
    config: dict = {}
    if ns.config:
        with open(ns.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(config) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, default in DEFAULTS.items():
        if getattr(ns, key, None) is None:
            setattr(ns, key, config.get(key, default))
    return ns


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        ns = resolve_options(ns)
        params = ProblemParams(ns.N, ns.p, ns.M)
        return COMMANDS[ns.command](params, ns)
    except (errors.RegimeMismatch, errors.RegimeUndefined, errors.NotASaddle, errors.BadK,
            errors.NotAnEquilibrium, errors.NotACenterCandidate) as exc:
        print(f"emdenflow: regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (errors.UndeterminedTrajectory, errors.NoCycleFound, errors.StepUnderflow, errors.BlowupGuard,
            errors.TransformInvalid) as exc:
        print(f"emdenflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"emdenflow: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"emdenflow: invalid input: {exc}", file=sys.stderr)
        return EXIT_REGIME


if __name__ == "__main__":
    sys.exit(main())
