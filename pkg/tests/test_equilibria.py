import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from emdenflow.equilibria import (bounds_report, bt_normal_form, classify_equilibrium, classify_origin,
                                  equilibrium_residual, find_equilibria, lyapunov_coefficient)
from emdenflow.errors import NotACenterCandidate
from emdenflow.field import make_rhs
from emdenflow.params import ProblemParams, critical_constants, derive_constants, mu_star_formula, regime_of


@given(st.sampled_from([1, 2, 3, 4, 11]), st.floats(1.1, 9.0), st.floats(-30, 30))
@settings(max_examples=200)
def test_root_count_matches_sign_scan(N, p, M):
    pp = ProblemParams(N, p, M)
    eqs = find_equilibria(pp)
    assert len(eqs) == regime_of(pp).expected_equilibria == oracles.sign_scan_count(N, p, M)
    K = derive_constants(pp).K
    for e in eqs:
        assert equilibrium_residual(pp, e) <= 1e-10 * (1 + abs(K))
        assert e.x == pytest.approx((p - 1) / 2 * e.y, rel=1e-15)
    assert [e.x for e in eqs] == sorted(e.x for e in eqs)


@pytest.mark.parametrize("N, p", [(3, 2.0), (3, 1.4), (2, 3.0), (1, 3.0)])
def test_double_root_at_minus_mu_star(N, p):
    pp = ProblemParams(N, p, -mu_star_formula(N, p))
    (e,) = find_equilibria(pp)
    assert e.multiplicity == "double"
    # the closed form at the double root gives the y-coordinate; x = (p-1) y / 2
    K = derive_constants(pp).K
    Y = (2 / (p - 1)) ** (p / (p - 1)) * (-K / p) ** (1 / (p - 1))
    assert e.y == pytest.approx(Y, rel=1e-8)
    assert e.x == pytest.approx((p - 1) / 2 * Y, rel=1e-8)


def test_monotonicity_in_M():
    Ms = np.linspace(0.0, 5.0, 40)
    X = [find_equilibria(ProblemParams(3, 7.0, m))[0].x for m in Ms]
    assert np.all(np.diff(X) < 0)
    prod = [m * find_equilibria(ProblemParams(3, 7.0, m))[0].y ** 0.75 for m in Ms]
    assert np.all(np.diff(prod) > 0)
    mu = mu_star_formula(3, 2.0)
    Ms = np.linspace(-10, -mu * 1.001, 40)
    pairs = [find_equilibria(ProblemParams(3, 2.0, m)) for m in Ms]
    assert np.all(np.diff([a.x for a, _ in pairs]) > 0)
    assert np.all(np.diff([b.x for _, b in pairs]) < 0)


@given(st.sampled_from([(3, 7.0), (3, 2.0), (4, 3.0), (2, 3.0)]), st.floats(-20, 20))
def test_trace_and_det_identities(Np, M):
    N, p = Np
    pp = ProblemParams(N, p, M)
    k = derive_constants(pp)
    for e in find_equilibria(pp):
        cls = classify_equilibrium(pp, e)
        c = k.q * M * e.y ** k.s
        assert cls.trace == pytest.approx(c - k.L, abs=1e-10 * (1 + abs(c)))
        assert cls.det == pytest.approx(2 * k.K - c, abs=1e-10 * (1 + abs(c)))


@given(st.sampled_from([(3, 7.0), (3, 2.0), (4, 3.0), (2, 3.0), (3, 5.0)]), st.floats(-20, 20))
def test_eigenvalues_match_fd_jacobian(Np, M):
    N, p = Np
    pp = ProblemParams(N, p, M)
    rhs = make_rhs(pp)
    for e in find_equilibria(pp):
        got = sorted(classify_equilibrium(pp, e).eigenvalues, key=lambda z: (z.real, z.imag))
        ref = sorted(np.linalg.eigvals(oracles.fd_jacobian(rhs, e.x, e.y, 1e-6 * max(1, e.y))),
                     key=lambda z: (z.real, z.imag))
        for a, b in zip(got, ref):
            assert abs(a - b) <= 1e-5 * max(1.0, abs(b))


def test_center_at_m_bar():
    pp = ProblemParams(3, 7.0, critical_constants(ProblemParams(3, 7.0)).m_bar)
    e = find_equilibria(pp)[0]
    lam = classify_equilibrium(pp, e).eigenvalues
    assert all(abs(z.real) < 1e-10 for z in lam)
    assert abs(lam[0].imag) ** 2 == pytest.approx(1.0, rel=1e-10)


def test_origin_spectrum():
    for N, p in [(3, 7.0), (3, 2.0), (5, 1.5)]:
        lam = sorted(z.real for z in classify_origin(ProblemParams(N, p)).eigenvalues)
        assert lam[1] - lam[0] == pytest.approx(N - 2)


@pytest.mark.parametrize("N, p, sign", [(3, 7.0, -1), (3, 2.0, 1)])
def test_lyapunov_sign_is_minus_sign_L(N, p, sign):
    pp = ProblemParams(N, p, critical_constants(ProblemParams(N, p)).m_bar)
    lam = lyapunov_coefficient(pp, find_equilibria(pp)[-1])
    assert math.copysign(1, lam) == sign


def test_lyapunov_requires_center():
    pp = ProblemParams(3, 7.0, 0.1)
    with pytest.raises(NotACenterCandidate):
        lyapunov_coefficient(pp, find_equilibria(pp)[0])


def test_kind_tables_positive_M():
    c = critical_constants(ProblemParams(3, 7.0))
    kind = lambda M: classify_equilibrium(ProblemParams(3, 7.0, M), find_equilibria(ProblemParams(3, 7.0, M))[0])
    assert kind(c.m_bar * 0.5).stability == "sink"
    assert kind(c.m_bar * 1.5).stability == "source"
    assert kind(c.m_bar).kind == "weak-sink"
    assert classify_equilibrium(ProblemParams(3, 3.5, 1.0), find_equilibria(ProblemParams(3, 3.5, 1.0))[0]
                                ).stability == "source"


def test_two_root_regime_has_saddle_and_node_or_focus():
    pp = ProblemParams(3, 2.0, -2.0)
    e1, e2 = find_equilibria(pp)
    assert classify_equilibrium(pp, e1).kind == "saddle"
    assert classify_equilibrium(pp, e2).kind != "saddle"


def test_bounds_records_hold_away_from_known_issue():
    for M in (0.5, 2.0, -0.5, -5.0):
        for rec in bounds_report(ProblemParams(3, 7.0, M)):
            assert rec["ok"], rec


def test_first_root_upper_bound_flagged_for_small_p():
    recs = bounds_report(ProblemParams(3, 2.0, -50.0))
    first = next(r for r in recs if r["name"] == "two-roots-first")
    assert first["lower_ok"] and "note" in first


@pytest.mark.parametrize("alpha", [0.005, 0.01, 0.02])
def test_bt_normal_form_signs(alpha):
    f = bt_normal_form(3.0, alpha)
    assert f.beta1 < 0 < f.beta2
    assert f.beta2**2 - 4 * f.beta1 > 0
    assert f.sign_BA == 1


def test_bt_normal_form_linear_in_alpha():
    a, b = bt_normal_form(3.0, 0.005), bt_normal_form(3.0, 0.02)
    assert b.beta1 / a.beta1 == pytest.approx(4.0, rel=1e-2)
    assert b.beta2 / a.beta2 == pytest.approx(4.0, rel=1e-2)


def test_bt_normal_form_validates():
    with pytest.raises(ValueError):
        bt_normal_form(3.0, 0.5)
