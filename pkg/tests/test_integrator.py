import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from emdenflow.errors import BlowupGuard
from emdenflow.field import make_rhs
from emdenflow.integrator import IntegrationConfig, integrate, residual_check, trajectory_to_radial
from emdenflow.manifolds import integrate_seed, seed_regular
from emdenflow.diagnostics import E_of
from emdenflow.equilibria import find_equilibria
from emdenflow.params import ProblemParams


def _scipy(pp, start, t1):
    rhs = make_rhs(pp)
    sol = solve_ivp(lambda t, s: rhs(s[0], s[1]), (0.0, t1), start, method="DOP853", rtol=1e-13, atol=1e-15,
                    dense_output=True)
    return sol


@pytest.mark.parametrize("pp, start", [(ProblemParams(3, 7.0, 0.1), (0.3, 0.05)),
                                       (ProblemParams(3, 2.0, -3.0), (0.5, 0.4)),
                                       (ProblemParams(4, 3.0, 0.5), (0.8, 0.2))])
def test_matches_reference_solver(pp, start):
    traj = integrate(pp, start, IntegrationConfig(t_span=(0.0, 5.0)), balls=[])
    ref = _scipy(pp, start, traj.t[-1])
    for t in np.linspace(0, traj.t[-1], 25):
        assert np.allclose(traj.at(t), ref.sol(t), rtol=1e-8, atol=1e-10)


def test_backward_then_forward_recovers_start():
    pp = ProblemParams(3, 7.0, 0.3)
    start = (0.6, 0.2)
    back = integrate(pp, start, IntegrationConfig(t_span=(0.0, -3.0)), balls=[], events=[])
    fwd = integrate(pp, tuple(back.end), IntegrationConfig(t_span=(back.t[-1], 0.0)), balls=[], events=[])
    assert np.allclose(tuple(fwd.end), start, atol=1e-9)


def test_events_lie_on_their_curves():
    pp = ProblemParams(3, 7.0, 0.3)
    traj = integrate(pp, (0.6, 0.2), IntegrationConfig(t_span=(0.0, 40.0)))
    cross = traj.crossings("cross-L")
    assert cross
    for e in cross:
        assert abs(e.point.y - 2 * e.point.x / 6) <= 1e-9
        # direction is the sign of d/dt (y - 2x/(p-1)) at the event
        h1, h2 = make_rhs(pp)(e.point.x, e.point.y)
        assert math.copysign(1, h2 - h1 / 3) == e.direction


def test_exit_terminates():
    pp = ProblemParams(3, 2.0, -0.5)
    traj = integrate_seed(pp, seed_regular(pp), IntegrationConfig(), 60.0)
    assert traj.termination.kind == "exits-Q"
    assert traj.end.x == pytest.approx(0.0, abs=1e-9) or traj.end.y == pytest.approx(0.0, abs=1e-9)


def test_equilibrium_ball_termination():
    pp = ProblemParams(3, 7.0, 0.1)
    traj = integrate_seed(pp, seed_regular(pp), IntegrationConfig(), 200.0)
    assert traj.termination.kind == "equilibrium"
    assert traj.termination.detail["label"] == "P"


def test_blowup_guard():
    pp = ProblemParams(3, 7.0, 0.0)
    # singular backward in t from a large x
    cfg = IntegrationConfig(t_span=(0.0, -10.0), blowup=1e3)
    traj = integrate(pp, (5.0, 0.1), cfg, balls=[], events=[])
    assert traj.termination.kind == "blowup"
    with pytest.raises(BlowupGuard):
        integrate(pp, (5.0, 0.1), IntegrationConfig(t_span=(0.0, -10.0), blowup=1e3, strict_blowup=True),
                  balls=[], events=[])


def test_budget():
    pp = ProblemParams(3, 7.0, 0.3)
    traj = integrate(pp, (0.6, 0.2), IntegrationConfig(t_span=(0.0, 1e4), max_steps=50), balls=[], events=[])
    assert traj.termination.kind == "budget-exhausted"


def test_at_outside_span_raises():
    pp = ProblemParams(3, 7.0, 0.3)
    traj = integrate(pp, (0.6, 0.2), IntegrationConfig(t_span=(0.0, 1.0)), balls=[], events=[])
    with pytest.raises(ValueError):
        traj.at(2.0)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegrationConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegrationConfig(max_steps=0)


def test_sobolev_energy_conservation():
    pp = ProblemParams(3, 5.0, 0.0)
    X = find_equilibria(pp)[0].x
    traj = integrate(pp, (1.3 * X, 0.5 * 1.3 * X), IntegrationConfig(t_span=(0.0, 30.0)), balls=[])
    E = E_of(pp, np.asarray(traj.x), np.asarray(traj.y))
    assert np.all(E < 0)
    assert np.max(np.abs(E - E[0])) <= 1e-8 * abs(E[0])


def test_step_quadrature_exact_for_time():
    pp = ProblemParams(3, 7.0, 0.3)
    traj = integrate(pp, (0.6, 0.2), IntegrationConfig(t_span=(0.0, 3.0)), balls=[], events=[])
    assert traj.step_quadrature(lambda t, x, y: np.ones_like(t)) == pytest.approx(3.0, rel=1e-13)
    # int x' dt = x(T) - x(0)
    two = 2 / 6
    got = traj.step_quadrature(lambda t, x, y: two * x - y)
    assert got == pytest.approx(traj.end.x - 0.6, abs=1e-8)


@pytest.mark.parametrize("pp", [ProblemParams(3, 7.0, 0.1), ProblemParams(3, 2.0, -3.0), ProblemParams(3, 5.0, 0.0)])
def test_radial_residual(pp):
    traj = integrate_seed(pp, seed_regular(pp), IntegrationConfig(), 30.0)
    assert residual_check(pp, traj) <= 1e-6
    r, u, ur = trajectory_to_radial(traj)
    assert np.all(np.diff(r) > 0)
    assert u[0] == pytest.approx(1.0, abs=1e-6)
