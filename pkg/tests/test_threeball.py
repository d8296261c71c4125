import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from freqlab import field as F
from freqlab import polysystem as P
from freqlab import threeball as T

import oracles

TRIPLE = (0.1, 0.2, 0.9)
FROZEN_J2_GAP = -1.5292153482452644  # log h(r2) - weighted logs, J2 with λ=49, from the 1-D oracle


def test_exponent_examples():
    a, b = T.exponents(T.ThreeBallConfig(TRIPLE))
    np.testing.assert_allclose((a, b), (math.log(2.25), math.log(4.0)), rtol=1e-15)
    a1, _ = T.exponents(T.ThreeBallConfig((0.05, 0.1, 0.9), "Linf_schrodinger"))
    np.testing.assert_allclose(a1, math.log(1.35), rtol=1e-15)
    a3, b3 = T.exponents(T.ThreeBallConfig((0.01, 0.1, 0.5), "Linf_polyharmonic", beta_factor=2.0))
    np.testing.assert_allclose((a3, b3), (math.log(1.5 / 1.4), 2 * math.log(0.7 / 0.03)), rtol=1e-14)


@pytest.mark.parametrize("radii, variant", [
    ((0.3, 0.3, 0.3), "L2_schrodinger"),
    ((0.1, 0.3, 0.5), "L2_schrodinger"),
    ((0.1, 0.2, 1.0), "Linf_schrodinger"),
    ((0.05, 0.1, 0.35), "Linf_polyharmonic"),
])
def test_hypothesis_violations(radii, variant):
    with pytest.raises(T.HypothesisError, match="r3"):
        T.ThreeBallConfig(radii, variant)


@given(st.floats(0.01, 0.2), st.floats(1.05, 3.0), st.floats(2.05, 4.5),
       st.sampled_from(T.VARIANTS))
def test_exponents_positive_and_weights_sum(r1, f2, f3, variant):
    r2 = r1 * f2
    r3 = r2 * (f3 if variant != "Linf_polyharmonic" else f3 + 2.0)
    assume(r3 < 1)
    cfg = T.ThreeBallConfig((r1, r2, r3), variant)
    a, b = T.exponents(cfg)
    assert a > 0 and b > 0
    assert abs(a / (a + b) + b / (a + b) - 1) <= 1e-15


@pytest.mark.parametrize("k", range(6))
def test_power_law_residual(k):
    u = F.make_harmonic_polynomial(k)
    s = 2 * k + 2
    rep = T.check_L2_three_ball(u, None, T.ThreeBallConfig(TRIPLE))
    np.testing.assert_allclose(rep.residual0, s * math.log(2), atol=1e-12)
    assert rep.C_emp == 0.0


def test_constant_field_residual():
    rep = T.check_L2_three_ball(F.make_constant(3.0), None, T.ThreeBallConfig(TRIPLE))
    np.testing.assert_allclose(rep.residual0, 2 * math.log(2), atol=1e-12)


def test_J2_against_oracle():
    C, gap = oracles.l2_schrodinger_C(2, 49.0, TRIPLE)
    np.testing.assert_allclose(gap, FROZEN_J2_GAP, rtol=1e-11)
    u, V = F.make_bessel_mode(2, 49.0)
    rep = T.check_L2_three_ball(u, V, T.ThreeBallConfig(TRIPLE, M=T.effective_M(V, "L2_schrodinger")))
    np.testing.assert_allclose(rep.lhs - rep.rhs0, FROZEN_J2_GAP, rtol=1e-11)
    assert rep.C_emp == C == 0.0
    assert rep.alpha == 7.0 and rep.extra["bridges_hold"]


def test_guard_failure():
    with pytest.raises(T.GuardError):
        T.check_L2_three_ball(F.make_zero(), None, T.ThreeBallConfig(TRIPLE))
    with pytest.raises(T.GuardError):
        T.check_Linf_three_ball(F.make_zero(), None, T.ThreeBallConfig(TRIPLE, "Linf_schrodinger"))


@given(st.sampled_from([0, 1, 2, 3]), st.sampled_from([4.0, 25.0, 100.0]), st.floats(0.01, 100.0),
       st.sampled_from(["L2_schrodinger", "Linf_schrodinger"]))
@settings(max_examples=25, deadline=None)
def test_scale_invariance(k, lam, c, variant):
    u, V = F.make_bessel_mode(k, lam)
    cfg = T.ThreeBallConfig((0.05, 0.1, 0.5), variant, M=lam)
    a = T.check_three_ball(u, V, cfg)
    b = T.check_three_ball(u.scaled(c), V, cfg)
    np.testing.assert_allclose(b.residual0, a.residual0, atol=1e-12)
    np.testing.assert_allclose(b.C_emp, a.C_emp, rtol=1e-10, atol=1e-12)


def test_C_emp_monotone_in_r3_for_power_laws():
    u = F.make_harmonic_polynomial(2)
    prev = math.inf
    slack = []
    for r3 in np.linspace(0.45, 0.99, 12):
        rep = T.check_L2_three_ball(u, None, T.ThreeBallConfig((0.1, 0.2, r3)))
        assert rep.C_emp <= prev
        prev = rep.C_emp
        slack.append(rep.residual0)
    assert np.all(np.diff(slack) > -1e-12)


def test_linf_linear_field():
    u = F.make_harmonic_polynomial(1)
    cfg = T.ThreeBallConfig((0.05, 0.1, 0.9), "Linf_schrodinger")
    rep = T.check_Linf_three_ball(u, None, cfg)
    np.testing.assert_allclose(rep.extra["sups"], [0.05, 0.1, 0.9], rtol=1e-12)
    a, b = T.exponents(cfg)
    geo = math.log(0.81 / 0.7)
    rhs0 = geo + (a * math.log(0.05) + b * math.log(0.9)) / (a + b)
    np.testing.assert_allclose(rep.rhs0, rhs0, rtol=1e-12)
    np.testing.assert_allclose(rep.residual0, rhs0 + 1.0 - math.log(0.1), rtol=1e-12)


def test_linf_constant_field():
    cfg = T.ThreeBallConfig((0.05, 0.1, 0.9), "Linf_schrodinger")
    rep = T.check_Linf_three_ball(F.make_constant(2.0), None, cfg)
    np.testing.assert_allclose(rep.residual0, math.log(0.81 / 0.7) + 1.0, rtol=1e-12)
    assert rep.residual0 > 0


@pytest.mark.parametrize("variant", T.VARIANTS)
def test_calibrated_residual_is_tight(variant):
    u, V = F.make_bessel_mode(3, 100.0)
    radii = (0.02, 0.1, 0.9) if variant != "Linf_polyharmonic" else (0.02, 0.1, 0.5)
    obj = u
    if variant.endswith("polyharmonic"):
        obj = P.decompose(u, 1, V.negated())
    cfg = T.ThreeBallConfig(radii, variant, M=T.effective_M(V, variant))
    rep = T.check_three_ball(obj, V, cfg)
    assert rep.residual >= -1e-12
    if rep.C_emp > 0:
        assert abs(rep.residual) <= 1e-9


def test_effective_M():
    V = F.constant_potential(-25.0)
    assert T.effective_M(V, "L2_schrodinger") == 25.0
    assert T.effective_M(V, "L2_polyharmonic") == 26.0
    assert T.effective_M(F.constant_potential(0.0), "Linf_polyharmonic") == 2.0
    assert T.effective_M(F.constant_potential(0.0), "Linf_schrodinger") == 1.0


def test_theta_values():
    np.testing.assert_allclose(T.theta_schrodinger(), math.log(9 / 8) / math.log(6), rtol=1e-14)
    assert 0 < T.theta_schrodinger() < 1
    np.testing.assert_allclose(T.theta_polyharmonic(1.0), T.theta_schrodinger(), rtol=1e-14)


def test_elliptic_bound_examples():
    Z = F.constant_potential(0.0)
    e = T.elliptic_sup_bound(F.make_constant(1.0), Z, 0.5)
    assert e.measured == 1.0
    np.testing.assert_allclose(e.bound, 2 * math.sqrt(math.pi), rtol=1e-14)
    np.testing.assert_allclose(e.implied_constant, 1 / (2 * math.sqrt(math.pi)), rtol=1e-14)
    z = T.elliptic_sup_bound(F.make_zero(), Z, 0.5)
    assert (z.measured, z.bound, z.implied_constant) == (0.0, 0.0, 0.0)
    x = T.elliptic_sup_bound(F.make_harmonic_polynomial(1), Z, 0.4)
    np.testing.assert_allclose(x.measured, 0.4, rtol=1e-12)
    np.testing.assert_allclose(x.bound, math.sqrt(math.pi * 0.8**4 / 4) / 0.4, rtol=1e-13)
