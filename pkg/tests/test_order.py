import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqlab import field as F
from freqlab import order as Ord
from freqlab import quad


def normalized(u):
    return u.scaled(1.0 / quad.sup_norm_on_ball(u.eval, np.zeros(u.dimension), 1.0))


@pytest.mark.parametrize("k", range(6))
def test_harmonic_order_exact(k):
    est = Ord.estimate_vanishing_order(F.make_harmonic_polynomial(k))
    np.testing.assert_allclose(est.order, k, atol=1e-10)
    assert est.fit_residual <= 1e-10


def test_constant_order():
    est = Ord.estimate_vanishing_order(F.make_constant(4.0))
    assert abs(est.order) <= 1e-12
    assert est.verdict == "within bound"


def test_bessel_order_and_bound():
    u, V = F.make_bessel_mode(4, 64.0)
    est = Ord.estimate_vanishing_order(u, M=V.effective_m())
    assert abs(est.order - 4) <= 0.05
    assert est.bound == 8.0 and est.verdict == "within bound"


def test_order_exceeds_bound():
    est = Ord.estimate_vanishing_order(F.make_harmonic_polynomial(3), M=1.0, C=1.0)
    assert est.verdict == "exceeds"


def test_inconclusive_on_curved_profile():
    # |x|^2 + 1e-4: the profile bends from slope n to slope n + 4 across the window
    u = F.AnalyticField(2, lambda p: np.sum(p * p, axis=1) + 1e-4, lambda p: 2 * p, lambda j: None)
    est = Ord.estimate_vanishing_order(u)
    assert est.verdict == "inconclusive"


def test_order_input_errors():
    with pytest.raises(Ord.OrderResolutionError, match="numerically zero"):
        Ord.estimate_vanishing_order(F.make_zero())
    with pytest.raises(ValueError):
        Ord.estimate_vanishing_order(F.make_constant(), samples=5)


@given(st.floats(1e-3, 1e3), st.sampled_from([0, 2, 5]))
@settings(max_examples=20, deadline=None)
def test_order_scale_invariance(c, k):
    u, _ = F.make_bessel_mode(k, 25.0)
    a = Ord.estimate_vanishing_order(u)
    b = Ord.estimate_vanishing_order(u.scaled(c))
    np.testing.assert_allclose(b.order, a.order, atol=1e-10)


def test_chain_linear_field():
    u = F.make_harmonic_polynomial(1)
    cert = Ord.run_chain_certificate(u, None, 1e-3)
    assert cert.d == 200
    np.testing.assert_allclose(cert.measured, 1e-3, rtol=1e-12)
    assert cert.valid and cert.bound <= cert.measured


def test_chain_geometry():
    u, V = F.make_bessel_mode(1, 25.0)
    cert = Ord.run_chain_certificate(normalized(u), V, 1e-2)
    centers = np.array([s.center for s in cert.steps])
    gaps = np.linalg.norm(np.diff(centers, axis=0), axis=1)
    assert np.all(gaps <= cert.radius / 2 + 1e-15)
    assert np.linalg.norm(cert.target - centers[-1]) <= cert.radius
    np.testing.assert_allclose(np.linalg.norm(cert.target), 1.0, rtol=1e-12)
    assert cert.valid


def test_chain_constant_field():
    cert = Ord.run_chain_certificate(F.make_constant(1.0), None, 1e-3)
    assert cert.bound <= 1.0 and cert.valid


def test_chain_q_matches_closed_form():
    cert = Ord.run_chain_certificate(F.make_harmonic_polynomial(1), None, 1e-3)
    np.testing.assert_allclose(cert.q, (math.log(7 / 3 * 0.01) - math.log(1e-3)) / math.log(9 / 7),
                               rtol=1e-13)
    np.testing.assert_allclose(cert.q, cert.q_formula, rtol=1e-13)


def test_chain_normalization():
    u, V = F.make_bessel_mode(0, 25.0)
    with pytest.raises(Ord.NormalizationError, match=r"sup_\{\|x\|≤1\}\|u\(x\)\| ≥ 1"):
        Ord.run_chain_certificate(u.scaled(0.5), V, 1e-3)


def test_chain_deterministic():
    u, V = F.make_bessel_mode(2, 25.0)
    a = Ord.run_chain_certificate(normalized(u), V, 1e-3, seed=4)
    b = Ord.run_chain_certificate(normalized(u), V, 1e-3, seed=4)
    assert a.log_bound == b.log_bound and a.measured == b.measured


def test_rescaling_harmonic():
    u = F.make_harmonic_polynomial(2)
    rep = Ord.corollary_rescaling(u, F.constant_potential(0.0), 1, 3.0, [3.0, 0.0])
    assert rep.identity_residual == 0.0


def test_rescaling_exp_mode():
    u, Vb, m = F.make_polyharmonic_example("exp_mode")
    uR = u.dilated(2.0, [2.0, 0.0])
    np.testing.assert_allclose(uR.eval([0.0, 0.0]), math.e**2)
    np.testing.assert_allclose(uR.laplacian_power([0.0, 0.0], 2), 16 * math.e**2, rtol=1e-14)
    rep = Ord.corollary_rescaling(u, Vb, m, 2.0, [2.0, 0.0])
    assert rep.identity_residual <= 1e-10
    assert rep.fd_residual <= 1e-6
    assert rep.M == 16.0
    np.testing.assert_allclose(rep.log_lower_bound, -16 * math.log(2.0))


def test_rescaling_grid_field(tmp_path):
    u, V = F.make_bessel_mode(0, 4.0)
    path = tmp_path / "j0.csv"
    F.write_grid_csv(path, u, 0.01, 1.0)
    g = F.import_grid_field(path, 0.01, 2)
    rep = Ord.corollary_rescaling(g, V.negated(), 1, 0.5, [0.3, 0.0], fd_step=2e-3)
    assert rep.identity_residual <= 1e-4


def test_rescaling_domain_too_small():
    u, Vb = F.make_bessel_mode(0, 100.0)
    with pytest.raises(F.FieldError, match="domain too small"):
        Ord.corollary_rescaling(u, Vb.negated(), 1, 1.5, [1.5, 0.0])
