"""Walk through N=3, p=7 as M grows: sink, Hopf cycle, escape, and the
shooting zero that separates the cycle regime from escape.

Run with ``python3 scripts/supercritical_tour.py``.
"""
import numpy as np

from emdenflow import ProblemParams, classify_equilibrium, find_equilibria, seed_regular
from emdenflow.bifurcation import hopf_scan, shoot_g
from emdenflow.classifier import classify_seed
from emdenflow.params import critical_constants

N, p = 3, 7.0
cc = critical_constants(ProblemParams(N, p, 0.0))
print(f"Hopf value m_bar = {cc.m_bar:.12f}, upper threshold m0 = {cc.m0:.12f}")

for M in (0.1, cc.m_bar + 0.01, 0.8, 2 * cc.m0):
    pp = ProblemParams(N, p, M)
    eq = find_equilibria(pp)[-1]
    lin = classify_equilibrium(pp, eq)
    verdict, _ = classify_seed(pp, seed_regular(pp))
    print(f"M={M:8.5f}  P=({eq.x:.6f}, {eq.y:.6f}) {lin.kind:18s} regular trajectory: {verdict}")

rep = hopf_scan(N, p)
print(f"trace zero at M={rep['crossing']:.12f}, first Lyapunov coefficient {rep['lyapunov']:.4f}")
for c in rep["cycles"]:
    print(f"  offset {c['offset']:.2f}: amplitude {c['amplitude']:.5f}, {c['stability']}")

res = shoot_g(N, p, np.linspace(cc.m_bar + 1e-3, cc.m0, 12))
print("sign of g on the grid:", "".join("+" if g.value > 0 else "-" for g in res.grid))
print("refined zeros:", [f"{m:.10f}" for m in res.zeros])
