import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from emdenflow.errors import RegimeUndefined
from emdenflow.params import (ProblemParams, RegimeCase, critical_constants, derive_constants, f_M,
                              mu_star_formula, regime_of)

Ns = st.sampled_from([1, 2, 3, 4, 11, 12])
ps = st.floats(1.05, 12.0)


def test_constants_at_known_point():
    k = derive_constants(ProblemParams(3, 7.0))
    assert (k.K, k.L, k.q) == pytest.approx((2 / 3, 1 / 3, 1.75), rel=1e-15)


@pytest.mark.parametrize("bad", [dict(N=0, p=2.0), dict(N=2.5, p=2.0), dict(N=3, p=1.0),
                                 dict(N=3, p=math.inf), dict(N=3, p=2.0, M=math.nan), dict(N=True, p=2.0)])
def test_invalid_params_rejected(bad):
    with pytest.raises(ValueError):
        ProblemParams(**bad)


@given(Ns, ps)
def test_L_identity(N, p):
    k = derive_constants(ProblemParams(N, p))
    assert abs(k.L - (k.K - 2 / (p - 1))) <= 1e-14 * (1 + abs(k.K))


@given(st.sampled_from([3, 4, 11, 12]), ps)
def test_sign_of_m_bar_follows_critical_exponent(N, p):
    crit = (N + 2) / (N - 2)
    if abs(p - crit) < 1e-6:
        return
    m_bar = critical_constants(ProblemParams(N, p)).m_bar
    assert math.copysign(1, m_bar) == math.copysign(1, p - crit)


@given(st.sampled_from([1, 2, 3, 4, 11]), st.floats(1.05, 9.0))
@settings(max_examples=60)
def test_mu_star_matches_double_root_oracle(N, p):
    if N >= 3 and p > N / (N - 2):
        with pytest.raises(RegimeUndefined):
            mu_star_formula(N, p)
        return
    got = mu_star_formula(N, p)
    ref = oracles.mu_star(N, p)
    assert abs(got - ref) <= 1e-12 * abs(ref)


@given(st.sampled_from([3, 4, 5, 11]), st.floats(0.01, 1.0))
def test_m_bar_below_minus_mu_star_subcritical(N, frac):
    # p drawn inside (1, N/(N-2))
    p = 1 + frac * (N / (N - 2) - 1) * 0.999
    c = critical_constants(ProblemParams(N, p))
    assert c.m_bar + c.mu_star < 0


@given(st.floats(1.05, 9.0))
def test_m_bar_equals_minus_mu_star_at_N2(p):
    c = critical_constants(ProblemParams(2, p))
    assert abs(c.m_bar + c.mu_star) <= 1e-12 * max(1.0, c.mu_star)


@given(Ns, st.floats(1.05, 12.0))
def test_node_thresholds_bracket_m_bar(N, p):
    c = critical_constants(ProblemParams(N, p))
    if c.m0 is not None and c.m1 is not None and c.m_bar is not None:
        assert c.m1 < c.m_bar < c.m0


def test_m_bar_closed_form_example():
    ref = 16 / (mp.mpf(28) ** (mp.mpf(7) / 8) * mp.mpf(40) ** (mp.mpf(1) / 8))
    assert critical_constants(ProblemParams(3, 7.0)).m_bar == pytest.approx(float(ref), rel=1e-14)


def test_known_values_N3_p2():
    c = critical_constants(ProblemParams(3, 2.0))
    assert c.mu_star == pytest.approx(1.19055078897615, rel=1e-12)
    assert c.m_bar == pytest.approx(-1.3158079821957898, rel=1e-12)
    assert c.m_bar < -c.mu_star


def test_critical_exponent_gives_zero_m_bar():
    assert critical_constants(ProblemParams(3, 5.0)).m_bar == 0.0


def test_require_raises_when_undefined():
    c = critical_constants(ProblemParams(3, 7.0))
    assert c.mu_star is None
    with pytest.raises(RegimeUndefined):
        c.require("mu_star")


@pytest.mark.parametrize("params, case", [
    (ProblemParams(3, 2.0, 1.0), RegimeCase.NONE_POSITIVE),
    (ProblemParams(3, 7.0, 1.0), RegimeCase.ONE_POSITIVE),
    (ProblemParams(3, 7.0, -1.0), RegimeCase.ONE_NEGATIVE),
    (ProblemParams(3, 2.0, -0.5), RegimeCase.NONE_NEGATIVE),
    (ProblemParams(3, 2.0, -mu_star_formula(3, 2.0)), RegimeCase.DOUBLE),
    (ProblemParams(3, 2.0, -2.0), RegimeCase.TWO),
])
def test_regime_table(params, case):
    assert regime_of(params).case == case


def test_boundary_flags():
    assert "K=0" in regime_of(ProblemParams(3, 3.0, 0.5)).boundaries
    assert "L=0" in regime_of(ProblemParams(3, 5.0, 0.5)).boundaries
    assert "M=0" in regime_of(ProblemParams(3, 7.0, 0.0)).boundaries


@given(Ns, ps, st.floats(-20, 20))
def test_f_M_matches_mpmath(N, p, M):
    pp = ProblemParams(N, p, M)
    for y in (1e-3, 0.5, 3.0):
        ref = oracles.f_eq(N, p, mp.mpf(M), mp.mpf(y))
        assert abs(f_M(pp, y) - float(ref)) <= 1e-12 * (1 + abs(float(ref)) + abs(M) + 10 * y ** (p - 1))
