import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from emdenflow import NoCycleFound, ProblemParams, RegimeMismatch, find_equilibria, seed_regular
from emdenflow.classifier import (LimitVerdict, classify_limit, classify_seed, find_cycle, scan_section,
                                  sigma_monotonicity_check)
from emdenflow.integrator import IntegrationConfig, integrate
from emdenflow.params import critical_constants

KINDS = {"to-equilibrium", "limit-cycle", "exits-Q", "undetermined"}


def _mbar(N, p):
    return critical_constants(ProblemParams(N, p, 0.0)).m_bar


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from([3, 4]), st.floats(1.3, 8.0), st.floats(-3.0, 3.0))
def test_verdict_is_one_of_four(N, p, M):
    pp = ProblemParams(N, p, M)
    v, traj = classify_seed(pp, seed_regular(pp), t_len=40.0, widen=2.0)
    assert v.kind in KINDS
    d = v.to_dict()
    assert d["kind"] == v.kind and d["label"] == str(v)
    if v.kind == "exits-Q":
        assert v.side in ("x=0", "y=0")
    if v.kind == "to-equilibrium":
        assert v.equilibrium in {"P", "P1", "P2", "O"}


@pytest.mark.parametrize("M, expected", [
    (0.3, "to-equilibrium(P)"),
    (0.6, "limit-cycle"),
    (1.0, "exits-Q(x=0)"),
])
def test_known_verdicts_37(M, expected):
    pp = ProblemParams(3, 7.0, M)
    v, _ = classify_seed(pp, seed_regular(pp))
    assert str(v) == expected


def test_two_equilibria_regular_goes_to_P2():
    pp = ProblemParams(3, 2.0, -2.0)
    v, _ = classify_seed(pp, seed_regular(pp))
    assert str(v) == "to-equilibrium(P2)"


def test_direction_must_match():
    pp = ProblemParams(3, 7.0, 0.3)
    traj = integrate(pp, (0.5, 0.2), IntegrationConfig(t_span=(0.0, 5.0)))
    with pytest.raises(ValueError):
        classify_limit(pp, traj, "backward")
    with pytest.raises(ValueError):
        classify_limit(pp, traj, "sideways")


def test_cycle_multiplier_matches_floquet_integral():
    pp = ProblemParams(3, 7.0, _mbar(3, 7.0) + 0.02)
    eq = find_equilibria(pp)[-1]
    cyc = find_cycle(pp, (1.2 * eq.x, 2.4 * eq.x / 6))
    assert cyc.stability == "attracting"
    assert cyc.floquet_integral < 0
    # secant estimate of P'(s*) against exp of the divergence integral
    assert cyc.multiplier == pytest.approx(math.exp(cyc.floquet_integral), rel=1e-3)
    assert cyc.residual <= 1e-8
    assert cyc.section_point.y == pytest.approx(2 * cyc.section_point.x / 6, rel=1e-12)


def test_scan_section_agrees_with_find_cycle():
    pp = ProblemParams(3, 7.0, _mbar(3, 7.0) + 0.02)
    eq = find_equilibria(pp)[-1]
    cyc = find_cycle(pp, (1.2 * eq.x, 2.4 * eq.x / 6))
    found = scan_section(pp, eq.x * (1 + np.geomspace(1e-3, 2.0, 40)))
    assert len(found) == 1
    assert found[0].section_point.x == pytest.approx(cyc.section_point.x, rel=1e-6)
    assert found[0].multiplier == pytest.approx(math.exp(found[0].floquet_integral), rel=1e-6)


def test_no_cycle_below_threshold():
    # below the Hopf value P is a sink with no cycle around it
    pp = ProblemParams(3, 7.0, 0.3)
    eq = find_equilibria(pp)[-1]
    with pytest.raises(NoCycleFound):
        find_cycle(pp, (1.2 * eq.x, 2.4 * eq.x / 6))


def test_critical_exponent_cycle_is_neutral():
    pp = ProblemParams(3, 5.0, 0.0)
    eq = find_equilibria(pp)[-1]
    cyc = find_cycle(pp, (1.3 * eq.x, 2.6 * eq.x / 4))
    assert cyc.stability == "neutral-within-tol"
    assert abs(cyc.floquet_integral) <= 1e-6


def test_sigma_monotone_at_minus_mu_star():
    mu = critical_constants(ProblemParams(3, 2.0, 0.0)).mu_star
    pp = ProblemParams(3, 2.0, -mu)
    _, traj = classify_seed(pp, seed_regular(pp))
    assert sigma_monotonicity_check(pp, traj)
    assert sigma_monotonicity_check(pp, (traj.x, traj.y))


def test_sigma_check_detects_decrease():
    mu = critical_constants(ProblemParams(3, 2.0, 0.0)).mu_star
    pp = ProblemParams(3, 2.0, -mu)
    x = np.array([1.0, 1.0, 1.0])
    y = np.array([2.5, 3.0, 2.6])
    assert not sigma_monotonicity_check(pp, (x, y))


def test_sigma_check_rejects_other_M():
    pp = ProblemParams(3, 2.0, -1.0)
    with pytest.raises(RegimeMismatch):
        sigma_monotonicity_check(pp, (np.ones(2), np.ones(2)))


def test_limit_verdict_dict_drops_nonscalar_evidence():
    v = LimitVerdict("undetermined", evidence={"a": 1.0, "b": [1, 2]})
    assert v.to_dict()["evidence"] == {"a": 1.0}
