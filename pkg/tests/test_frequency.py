import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqlab import field as F
from freqlab import frequency as Q

import oracles

O = np.zeros(2)

# reference values from the 1-D adaptive oracle in tests/oracles.py
FROZEN_H_J2_LAM49 = 0.005576130238830064  # H at r=0.5, α=1
FROZEN_N = {
    (0, 4.0, 0.5, 0): -0.49705203384686414,
    (1, 25.0, 0.7, 2): -0.41496776993820317,
    (3, 100.0, 0.4, 1): 6.489353125694657,
}


def test_oracle_reproduces_frozen_values():
    np.testing.assert_allclose(oracles.bessel_H(2, 49.0, 0.5, 1), FROZEN_H_J2_LAM49, rtol=1e-12)
    for key, val in FROZEN_N.items():
        np.testing.assert_allclose(oracles.bessel_N(*key), val, rtol=1e-11)


def test_H_against_oracle():
    u, _ = F.make_bessel_mode(2, 49.0)
    np.testing.assert_allclose(Q.compute_H(u, O, 0.5, 1.0), FROZEN_H_J2_LAM49, rtol=1e-12)


@pytest.mark.parametrize("key", list(FROZEN_N))
def test_N_against_oracle(key):
    k, lam, r, alpha = key
    u, _ = F.make_bessel_mode(k, lam)
    N = Q.compute_I_definition(u, O, r, alpha) / Q.compute_H(u, O, r, alpha)
    np.testing.assert_allclose(N, FROZEN_N[key], rtol=1e-11)


def test_H_examples():
    np.testing.assert_allclose(Q.compute_H(F.make_constant(1.0), O, 1.0, 1.0), math.pi / 2, rtol=1e-14)
    assert Q.compute_H(F.make_zero(), O, 1.0, 0.0) == 0.0
    np.testing.assert_allclose(Q.compute_H(F.make_harmonic_polynomial(1), O, 1.0, 0.0), math.pi / 4,
                               rtol=1e-14)


def test_I_definition_examples():
    assert Q.compute_I_definition(F.make_constant(3.0), O, 0.7, 1.0) == 0.0
    np.testing.assert_allclose(Q.compute_I_definition(F.make_harmonic_polynomial(1), O, 1.0, 0.0),
                               math.pi / 2, rtol=1e-14)
    u = F.make_harmonic_polynomial(2)
    np.testing.assert_allclose(Q.compute_I_definition(u, O, 0.8, 1.0), 8 * Q.compute_H(u, O, 0.8, 1.0),
                               rtol=1e-13)


def test_I_parts_examples():
    Z = F.constant_potential(0.0)
    np.testing.assert_allclose(Q.compute_I_parts(F.make_harmonic_polynomial(1), Z, O, 1.0, 0.0),
                               math.pi / 2, rtol=1e-14)
    assert Q.compute_I_parts(F.make_zero(), Z, O, 1.0, 0.0) == 0.0
    u, V = F.make_bessel_mode(0, 4.0)
    np.testing.assert_allclose(Q.compute_I_parts(u, V, O, 0.6, 0.0),
                               Q.compute_I_definition(u, O, 0.6, 0.0), rtol=1e-8)


def test_I_parts_rejects_non_solution():
    u, _ = F.make_bessel_mode(0, 4.0)
    with pytest.raises(Q.PDEResidualError):
        Q.compute_I_parts(u, F.constant_potential(-5.0), O, 0.5, 0.0)


@pytest.mark.parametrize("k", range(6))
@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_exact_frequency_of_harmonics(k, alpha):
    p = Q.frequency_profile(F.make_harmonic_polynomial(k), None, O, np.linspace(0.05, 0.9, 12), alpha)
    np.testing.assert_allclose(p.N, 2 * (alpha + 1) * k, rtol=1e-9, atol=1e-12)


def test_constant_and_bessel_limits():
    p = Q.frequency_profile(F.make_constant(2.0), None, O, [0.1, 0.5], 1.0)
    np.testing.assert_array_equal(p.N, [0.0, 0.0])
    u, _ = F.make_bessel_mode(0, 4.0)
    p = Q.frequency_profile(u, None, O, [0.01, 0.02], 0.0)
    assert abs(p.N[0]) <= 1e-2


def test_zero_field_is_guarded():
    p = Q.frequency_profile(F.make_zero(), None, O, [0.1, 0.2, 0.3], 0.0)
    assert not p.valid.any()
    assert len(p.dropped) == 3
    assert Q.check_derivative_identity(p) == 0.0


@pytest.mark.parametrize("u, alpha", [
    (F.make_constant(1.0), 1.0),
    (F.make_harmonic_polynomial(1), 0.0),
    (F.make_harmonic_polynomial(3), 2.0),
])
def test_derivative_identity_closed_forms(u, alpha):
    p = Q.frequency_profile(u, None, O, np.arange(0.2, 0.3001, 1e-3), alpha)
    assert Q.check_derivative_identity(p) <= 1e-9


def test_derivative_identity_coarse_grid_warns():
    u, _ = F.make_bessel_mode(0, 25.0)
    p = Q.frequency_profile(u, None, O, np.linspace(0.1, 0.9, 9), 0.0)
    with pytest.warns(UserWarning, match="radius step"):
        Q.check_derivative_identity(p)


@given(st.sampled_from([0, 1, 2, 3]), st.sampled_from([4.0, 25.0]), st.floats(0.0, 3.0),
       st.floats(0.1, 10.0))
@settings(max_examples=25, deadline=None)
def test_scale_invariance(k, lam, alpha, c):
    u, _ = F.make_bessel_mode(k, lam)
    radii = [0.2, 0.5, 0.8]
    a = Q.frequency_profile(u, None, O, radii, alpha)
    b = Q.frequency_profile(u.scaled(c), None, O, radii, alpha)
    np.testing.assert_allclose(b.N, a.N, rtol=1e-12, atol=1e-12)


@given(st.sampled_from([0, 1, 2]), st.sampled_from([4.0, 25.0, 100.0]), st.floats(0.0, 4.0))
@settings(max_examples=20, deadline=None)
def test_formula_equivalence(k, lam, alpha):
    u, V = F.make_bessel_mode(k, lam)
    for r in (0.3, 0.9):
        d = Q.compute_I_definition(u, O, r, alpha)
        p = Q.compute_I_parts(u, V, O, r, alpha)
        assert abs(d - p) <= 1e-8 * abs(d)


@given(st.floats(0.1, 4.0))
@settings(max_examples=15, deadline=None)
def test_bridges(alpha):
    u, _ = F.make_bessel_mode(1, 25.0)
    p = Q.frequency_profile(u, None, O, np.linspace(0.1, 0.9, 9), alpha)
    assert p.bridge_violations() == 0


def test_monotonicity_examples():
    radii = np.linspace(0.05, 0.9, 86)
    p = Q.frequency_profile(F.make_harmonic_polynomial(2), None, O, radii, 0.0)
    rep = Q.check_monotonicity_schrodinger(p, F.constant_potential(0.0))
    assert rep.passed and rep.minimal_constant == 0.0
    u, V = F.make_bessel_mode(1, 25.0)
    p = Q.frequency_profile(u, None, O, radii, 0.0)
    rep = Q.check_monotonicity_schrodinger(p, V)
    assert rep.constant == 11 and rep.passed
    assert rep.minimal_constant <= 11


def test_monotonicity_detects_decreasing_profile():
    r = np.linspace(0.1, 0.9, 20)
    H = np.ones_like(r)
    p = Q.FrequencyProfile(alpha=0.0, radii=r, H=H, I_def=-r, N=-r, h=H, dimension=2)
    rep = Q.check_monotonicity_schrodinger(p, F.constant_potential(0.0))
    assert not rep.passed
    assert rep.min_increment < 0
    rep = Q.check_monotonicity_schrodinger(p, F.constant_potential(1.0))
    # the slack C r^2 must beat a unit slope: C (r_{i+1}^2 - r_i^2) >= Δr
    np.testing.assert_allclose(rep.minimal_constant, 1 / (r[0] + r[1]), rtol=1e-12)


def test_central_derivative_order():
    r = np.linspace(0.1, 0.9, 81)
    d = Q.central_derivative(r, np.sin(3 * r))
    ok = np.isfinite(d)
    np.testing.assert_allclose(d[ok], 3 * np.cos(3 * r[ok]), atol=1e-8)
    assert not ok[:3].any() and not ok[-3:].any()


def test_profile_rows_layout():
    p = Q.frequency_profile(F.make_harmonic_polynomial(1), F.constant_potential(0.0), O,
                            [0.1, 0.2, 0.3], 0.0)
    cols, rows = p.rows()
    assert cols == ["r", "H", "I_def", "I_parts", "N", "h", "dHdr", "identity_residual"]
    assert len(rows) == 3 and len(rows[0]) == len(cols)


def test_relative_guard_is_optional():
    radii = np.linspace(0.05, 0.9, 20)
    u = F.make_harmonic_polynomial(5)
    p = Q.frequency_profile(u, None, O, radii, 2.0)
    assert p.valid.all()
    q = Q.frequency_profile(u, None, O, radii, 2.0, guard_rel=1e-14)
    assert not q.valid[0] and q.valid[-1]
