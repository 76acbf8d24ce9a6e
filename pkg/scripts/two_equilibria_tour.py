"""N=3, p=2 with M below -mu*: a saddle P1 and an upper equilibrium P2.

Shows the equilibria, the fate of the regular trajectory, and the sign
changes of the two gap functions g and h.

Run with ``python3 scripts/two_equilibria_tour.py``.
"""
import numpy as np

from emdenflow import ProblemParams, classify_equilibrium, find_equilibria, seed_regular
from emdenflow.bifurcation import shoot_g, shoot_h
from emdenflow.classifier import classify_seed
from emdenflow.diagnostics import check_G_negative
from emdenflow.params import critical_constants

N, p = 3, 2.0
cc = critical_constants(ProblemParams(N, p, 0.0))
print(f"mu* = {cc.mu_star:.12f}, mu*(1) = {cc.mu_star_1:.12f}, m_bar = {cc.m_bar:.12f}")

for M in (-1.25, -2.0, -3.0):
    pp = ProblemParams(N, p, M)
    parts = [f"{e.label}=({e.x:.5f}, {e.y:.5f}) {classify_equilibrium(pp, e).kind}" for e in find_equilibria(pp)]
    verdict, traj = classify_seed(pp, seed_regular(pp))
    print(f"M={M:6.2f}  " + "; ".join(parts) + f"  -> {verdict}")
    if M <= -cc.mu_star_1:
        g = check_G_negative(pp, traj)
        print(f"          G<0 along the trajectory: {g.all_negative}, x at the end {g.liminf_value:.3f}"
              f" (bound {g.liminf_bound:.3f})")

grid = np.linspace(-cc.mu_star_1 + 0.05, cc.m_bar - 1e-3, 12)
for name, fn in (("g", shoot_g), ("h", shoot_h)):
    res = fn(N, p, grid)
    signs = "".join("+" if v.value > 0 else "-" for v in res.grid)
    print(f"{name}: signs {signs}, zeros {[round(m, 10) for m in res.zeros]}")
