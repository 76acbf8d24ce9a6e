import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from emdenflow.errors import BadK
from emdenflow.field import (KolmogorovPoint, PhasePoint, eval_H, eval_V, eval_V_desingularized, from_kolmogorov,
                             jacobian, make_rhs, nullclines, region_grid, region_of, to_kolmogorov)
from emdenflow.integrator import IntegrationConfig, integrate
from emdenflow.manifolds import integrate_seed, seed_regular
from emdenflow.params import ProblemParams, mu_star_formula

params_st = st.builds(ProblemParams, st.sampled_from([1, 2, 3, 4]), st.floats(1.1, 9.0), st.floats(-10, 10))
pos = st.floats(1e-6, 1e3)


@given(params_st, pos)
def test_inward_on_x_axis(pp, x):
    assert eval_H(pp, (x, 0.0))[1] >= 0


@given(params_st, pos)
def test_outward_on_y_axis(pp, y):
    assert eval_H(pp, (0.0, y))[0] == -y


@given(params_st, st.floats(0.01, 10), st.floats(0.01, 10))
def test_jacobian_matches_fd(pp, x, y):
    J = jacobian(pp, x, y)
    ref = oracles.fd_jacobian(make_rhs(pp), x, y, 1e-7)
    assert np.allclose(J, ref, rtol=1e-5, atol=1e-5 * (1 + np.abs(J).max()))


@given(params_st, st.floats(0.01, 10), st.floats(0.01, 10))
def test_kolmogorov_roundtrip(pp, x, y):
    back = from_kolmogorov(pp, to_kolmogorov(pp, PhasePoint(x, y)))
    assert back.x == pytest.approx(x, rel=1e-10) and back.y == pytest.approx(y, rel=1e-10)


@pytest.mark.parametrize("pp", [ProblemParams(3, 7.0, 0.1), ProblemParams(3, 2.0, -3.0), ProblemParams(4, 3.0, 0.7)])
def test_kolmogorov_field_along_trajectory(pp):
    """d/dt of (sigma, z) along a computed orbit equals the Kolmogorov field."""
    traj = integrate_seed(pp, seed_regular(pp), IntegrationConfig(), 20.0)
    t_mid = np.linspace(traj.t[0] + 1, traj.t[-1] - 1, 15)
    h = 1e-4
    for t in t_mid:
        ka = to_kolmogorov(pp, traj.at(t - h))
        kb = to_kolmogorov(pp, traj.at(t + h))
        k0 = to_kolmogorov(pp, traj.at(t))
        ds, dz = (kb.sigma - ka.sigma) / (2 * h), (kb.z - ka.z) / (2 * h)
        vs, vz = eval_V(pp, k0)
        # size of the individual terms of each component
        J = (k0.sigma**pp.p * k0.z) ** (1 / (pp.p + 1))
        ss = abs(k0.sigma) * (abs(k0.sigma) + pp.N + abs(k0.z) + abs(pp.M) * J)
        sz = abs(k0.z) * (pp.N + pp.p * abs(k0.sigma) + abs(k0.z) + abs(pp.M) * J)
        assert abs(ds - vs) <= 1e-6 * ss
        assert abs(dz - vz) <= 1e-6 * sz


def test_desingularized_field():
    pp = ProblemParams(3, 2.0, -1.0)
    with pytest.raises(BadK):
        eval_V_desingularized(pp, (0.5, 0.5), 2)
    k = 4
    st_, zt = 0.9, 1.1
    m = 2 * k + 1
    vs, vz = eval_V(pp, KolmogorovPoint(st_**m, zt**m))
    ws, wz = eval_V_desingularized(pp, (st_, zt), k)
    # chain rule: sigma' = m s^(m-1) s', so s' = sigma' / (m s^(m-1))
    assert ws == pytest.approx(vs / (m * st_ ** (m - 1)), rel=1e-12)
    assert wz == pytest.approx(vz / (m * zt ** (m - 1)), rel=1e-12)


@pytest.mark.parametrize("pp", [ProblemParams(3, 7.0, 1.0), ProblemParams(3, 2.0, -2.0), ProblemParams(3, 7.0, -1.0)])
def test_nullclines_are_zero_sets(pp):
    nc = nullclines(pp, 3.0)
    for x, y in nc.L_line[::37]:
        assert abs(eval_H(pp, (x, y))[0]) <= 1e-12 * (1 + y)
    for x, y in nc.C_curve[::37]:
        assert abs(eval_H(pp, (x, y))[1]) <= 1e-9 * (1 + y)


def test_C_bounded_only_for_positive_M_and_K():
    assert nullclines(ProblemParams(3, 7.0, 1.0), 1.0).C_bounded
    assert not nullclines(ProblemParams(3, 7.0, -1.0), 1.0).C_bounded
    assert not nullclines(ProblemParams(3, 2.0, -2.0), 1.0).C_bounded


@given(params_st, st.floats(1e-3, 50), st.floats(1e-3, 50))
def test_region_signs(pp, x, y):
    tag = region_of(pp, (x, y))
    h1, h2 = eval_H(pp, (x, y))
    expect = {"A": (h1 < 0 and h2 < 0), "B": (h1 > 0 and h2 < 0), "C": (h1 > 0 and h2 > 0),
              "D": (h1 < 0 and h2 > 0), "E": (h1 < 0 and h2 > 0)}
    if tag in expect:
        assert expect[tag]
    assert region_of(pp, (-x, y)) == "outside-Q"


def test_region_sets_by_regime():
    mu = mu_star_formula(3, 2.0)
    assert region_grid(ProblemParams(3, 2.0, -2.0)) == {"A", "B", "C", "D", "E"}
    assert region_grid(ProblemParams(3, 2.0, -0.5)) == {"A", "C", "D"}
    assert region_grid(ProblemParams(3, 2.0, -mu)) == {"A", "C", "D", "E"}
    assert region_grid(ProblemParams(3, 7.0, 1.0)) == {"A", "B", "C", "D"}
