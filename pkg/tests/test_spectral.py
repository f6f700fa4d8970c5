import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad, trapezoid

from fbmsteer import spectral
from fbmsteer.spectral import (FracPower, SineBasis, analytic_constant, cell_weights,
                               conv_weight_exact, exp_trapezoid_weights, frac_power_apply,
                               frac_power_norm, gramian_closed_form, semigroup_apply)

vecs = st.lists(st.floats(-10, 10), min_size=1, max_size=12).map(np.array)


def test_semigroup_basics():
    v = np.arange(1.0, 6.0)
    np.testing.assert_array_equal(semigroup_apply(0.0, v), v)
    assert semigroup_apply(np.log(2.0), np.array([1.0]))[0] == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        semigroup_apply(-0.1, v)


@given(v=vecs, t=st.floats(0, 3), s=st.floats(0, 3))
def test_semigroup_law(v, t, s):
    np.testing.assert_allclose(semigroup_apply(t, semigroup_apply(s, v)), semigroup_apply(t + s, v),
                               rtol=1e-12, atol=1e-300)


def test_frac_power_values():
    p = FracPower(0.75)
    v = np.zeros(5)
    v[1] = 1.0
    assert frac_power_apply(p, "positive", v)[1] == pytest.approx(2**1.5, rel=1e-15)
    for n in (1, 4, 50):
        assert frac_power_norm(p, "negative", n) == 1.0
    assert spectral.inverse_power_bound(0.75) == 1.0
    with pytest.raises(ValueError):
        FracPower(0.0)
    with pytest.raises(ValueError):
        FracPower(1.5)
    with pytest.raises(ValueError):
        frac_power_apply(p, "up", v)


@given(v=vecs, alpha=st.floats(0.01, 1.0))
def test_frac_power_inverse(v, alpha):
    p = FracPower(alpha)
    back = frac_power_apply(p, "positive", frac_power_apply(p, "negative", v))
    np.testing.assert_allclose(back, v, rtol=1e-12, atol=1e-300)


def test_analytic_constant():
    assert analytic_constant(0.25) == pytest.approx(0.55069531490318374762, rel=1e-14)
    beta = 0.75
    M = analytic_constant(1 - beta)
    n = np.arange(1, 65)[:, None]
    t = np.geomspace(1e-4, 1.0, 200)[None, :]
    lhs = n ** (2 * (1 - beta)) * np.exp(-n**2 * t)
    assert np.all(lhs <= M * t ** (-(1 - beta)) * (1 + 1e-12))


def test_conv_weight_values():
    w_s, w_as = conv_weight_exact(1, 0.0, 0.7, 0.7)
    assert w_s == pytest.approx(1 - np.exp(-0.7), rel=1e-14)
    assert w_as == pytest.approx(-w_s, rel=1e-15)
    # vanishing exponent: w_S -> t1 - t0
    w_s, _ = conv_weight_exact(1, 0.0, 1e-9, 1e-9)
    assert w_s == pytest.approx(1e-9, rel=1e-8)
    with pytest.raises(ValueError):
        conv_weight_exact(1, 0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        conv_weight_exact(1, 0.0, 1.0, 0.5)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_conv_weight_matches_quadrature(n):
    t0, t1, t = 0.2, 0.45, 0.9
    ref = quad(lambda s: np.exp(-n * n * (t - s)), t0, t1, epsabs=0, epsrel=1e-13)[0]
    assert conv_weight_exact(n, t0, t1, t)[0] == pytest.approx(ref, rel=1e-12)


def test_conv_weight_telescopes():
    # A S(t-s) integrated over a partition of [0, t] gives S(t) - I per mode
    t, J = 0.8, 37
    n = np.arange(1, 9)
    edges = np.linspace(0, t, J + 1)
    total = sum(conv_weight_exact(n, a, b, t)[1] for a, b in zip(edges[:-1], edges[1:]))
    np.testing.assert_allclose(total, np.exp(-n**2 * t) - 1.0, rtol=1e-12, atol=1e-15)


def test_cell_weights_consistent():
    decay, w_s, w_as = cell_weights(6, 0.01)
    ref_s, ref_as = conv_weight_exact(np.arange(1, 7), 0.0, 0.01, 0.01)
    np.testing.assert_allclose(w_s, ref_s, rtol=1e-14)
    np.testing.assert_allclose(w_as, ref_as, rtol=1e-14)
    np.testing.assert_allclose(decay, np.exp(-np.arange(1, 7) ** 2 * 0.01), rtol=1e-15)


def test_gramian_values():
    assert not gramian_closed_form(np.zeros((3, 3)), 1.0).any()
    assert gramian_closed_form(np.eye(1), 1.0)[0, 0] == pytest.approx(0.43233235838169365405, abs=1e-15)


def test_gramian_against_trapezoid():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((4, 4))
    B = B + B.T
    T = 1.0
    s = np.linspace(0, T, 200001)
    lam = np.arange(1, 5) ** 2
    E = np.exp(-np.outer(T - s, lam))                          # (K, 4)
    integrand = np.einsum("ki,ij,kj->kij", E, B @ B.T, E)
    ref = trapezoid(integrand, s, axis=0)
    np.testing.assert_allclose(gramian_closed_form(B, T), ref, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("kappa,h,wl,wr", [
    (4.0, 0.1, 0.038469959718815611849, 0.043950028772274562965),
    (4.0, 0.3, 0.070285986206907372371, 0.10441546081504210347),
    (0.5, 0.01, 0.0049833645417100322692, 0.0049916770729253410257),
])
def test_exp_trapezoid_weights(kappa, h, wl, wr):
    a, b = exp_trapezoid_weights(kappa, h)
    assert a == pytest.approx(wl, rel=1e-14)
    assert b == pytest.approx(wr, rel=1e-14)


@given(kappa=st.floats(0.01, 50), h=st.floats(1e-6, 2.0))
def test_exp_trapezoid_integrates_constants(kappa, h):
    a, b = exp_trapezoid_weights(kappa, h)
    assert a + b == pytest.approx(-np.expm1(-kappa * h) / kappa, rel=1e-12)
    assert a > 0 and b > 0


def test_exp_trapezoid_vectorised_and_zero_width():
    h = np.array([0.0, 0.05, 0.2])
    a, b = exp_trapezoid_weights(3.0, h)
    assert a[0] == 0.0 and b[0] == 0.0
    for i in range(1, 3):
        assert (a[i], b[i]) == pytest.approx(exp_trapezoid_weights(3.0, h[i]), rel=1e-15)


def test_sine_basis_roundtrip():
    b = SineBasis(8)
    rng = np.random.default_rng(1)
    c = rng.standard_normal(8)
    np.testing.assert_allclose(b.project(b.to_points(c)), c, atol=1e-13)
    with pytest.raises(ValueError):
        SineBasis(8, 4)


def test_galerkin_identity_and_projection():
    b = SineBasis(6)
    np.testing.assert_allclose(b.galerkin_matrix(lambda x: np.ones_like(x)), np.eye(6), atol=1e-13)
    e2 = b.project_function(lambda x: np.sqrt(2 / np.pi) * np.sin(2 * x))
    np.testing.assert_allclose(e2, np.eye(6)[1], atol=1e-13)
    # indicator control region: symmetric, norm at most 1
    B = b.galerkin_matrix(lambda x: ((x > 1.0) & (x < 2.0)).astype(float), breakpoints=(1.0, 2.0))
    np.testing.assert_allclose(B, B.T, atol=0)
    assert np.linalg.norm(B, 2) <= 1 + 1e-12
