import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fbmsteer.model import (CallableMap, DeclaredConstants, ExampleParams, ExpMemoryMap,
                            HistoryIntegralMap, Impulse, PointMap, ProblemSpec, ZeroMap,
                            apply_impulse, build_example, controllability_constants,
                            hypothesis_report, probe_lipschitz)
from fbmsteer.phase_space import History, InitialFunction, PhaseWeight, segment_at
from fbmsteer.spectral import SineBasis, analytic_constant
from fbmsteer.solver import Grid, simulate_mild

from conftest import linear_spec


def seg0(phi):
    x0 = phi(0.0)
    return History(phi, 0.0, np.array([0.0]), x0[None, :], x0)


def test_zero_maps():
    b = SineBasis(4)
    phi = InitialFunction.constant(np.ones(4))
    assert not ZeroMap().evaluate(0.3, seg0(phi), b).any()
    spec = build_example(ExampleParams(n_modes=4))
    assert isinstance(spec.neutral_g, ZeroMap) and isinstance(spec.drift_f, ZeroMap)


def test_unit_control_profile_is_identity():
    spec = build_example(ExampleParams(n_modes=5, control_c=lambda x: np.ones_like(x)))
    np.testing.assert_allclose(spec.control_B, np.eye(5), atol=1e-13)


def test_history_integral_closed_form():
    # F = e^theta sin(xi), constant history: ∫ e^theta = 1 so f = P_N[psi sin]
    n = 6
    b = SineBasis(n, 400)
    v = np.array([1.0, 0.3, 0.0, 0.0, 0.0, -0.2])
    phi = InitialFunction.constant(v)
    got = HistoryIntegralMap(lambda t, xi, th: np.exp(th) * np.sin(xi)).evaluate(0.0, seg0(phi), b)

    def psi(x):
        return np.sqrt(2 / np.pi) * np.sin(np.arange(1, n + 1) * x) @ v

    ref = [quad(lambda x: psi(x) * np.sin(x) * np.sqrt(2 / np.pi) * np.sin(k * x), 0, np.pi,
                epsabs=1e-14)[0] for k in range(1, n + 1)]
    np.testing.assert_allclose(got, ref, atol=1e-6)


def test_exp_memory_matches_generic_quadrature():
    n = 4
    b = SineBasis(n)
    phi = InitialFunction(((1.0, 1.5, [0.5, -0.2, 0.1, 0.0]),), n)
    # plain trapezoid on e^{rate theta} y is second order, so sample finely
    times = np.linspace(0, 0.3, 3001)
    vals = phi(0.0) * np.exp(-times)[:, None]
    traj = type("P", (), {"times": times, "left": vals, "right": vals})()
    seg = segment_at(traj, phi, 0.3)
    for pw in ("identity", "tanh"):
        fast = ExpMemoryMap(0.7, 5.0, "sine", pw).evaluate(0.3, seg, b)
        slow = HistoryIntegralMap(lambda t, xi, th: 0.7 * np.sin(xi) * np.exp(5.0 * th), pw,
                                  n_panels=2000).evaluate(0.3, seg, b)
        np.testing.assert_allclose(fast, slow, rtol=1e-6, atol=1e-10)


def test_exp_memory_stream_matches_direct():
    spec = build_example(ExampleParams(n_modes=4, g_amp=0.01, f_amp=0.05, f_map="sin",
                                       phi_amp=1.0, phi_rate=2.0, phi_vector=[1.0, 0.5, 0, 0],
                                       impulse_times=(0.5,), impulse_gain=0.2))
    grid = Grid.for_spec(spec, 1 / 64)
    traj = simulate_mild(spec, None, None, grid)
    for j in (0, 10, 32, 50, 64):
        seg = segment_at(traj, spec.phi, float(grid.times[j]))
        np.testing.assert_allclose(spec.f(float(grid.times[j]), seg), traj.f_values[j], atol=1e-13)
        np.testing.assert_allclose(spec.g(float(grid.times[j]), seg), traj.g_values[j], atol=1e-13)


def test_exp_memory_validation():
    with pytest.raises(ValueError):
        ExpMemoryMap(1.0, 0.0)
    with pytest.raises(ValueError):
        ExpMemoryMap(1.0, 1.0, "sine", "cube")
    assert ExpMemoryMap(1.0, 2.0).lipschitz_bound(4, 0.75, PhaseWeight(4.0)) == math.inf


def test_point_and_callable_maps():
    b = SineBasis(2)
    phi = InitialFunction.constant([1.0, 2.0])
    m = PointMap(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(m.evaluate(0.0, seg0(phi), b), [2.0, 1.0])
    c = CallableMap(lambda t, s: t * s.endpoint)
    np.testing.assert_array_equal(c.evaluate(0.5, seg0(phi), b), [0.5, 1.0])


def test_impulse_arithmetic():
    spec = linear_spec(n=3, impulses=(Impulse(0.3, 0.1), Impulse(0.6, fn=lambda x: -x),
                                      Impulse(0.8, 0.0)))
    v = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(apply_impulse(1, v, spec), [1.1, 0.0, 0.0], rtol=1e-15)
    np.testing.assert_array_equal(apply_impulse(2, v, spec), np.zeros(3))
    np.testing.assert_array_equal(apply_impulse(3, v, spec), v)
    with pytest.raises(ValueError):
        apply_impulse(4, v, spec)


def test_impulse_constants_and_flags():
    assert Impulse(0.5, 0.05).lipschitz_sq() == pytest.approx(0.0025)
    assert Impulse(0.5, 0.05).bound_sq(10.0) == pytest.approx(0.25)
    assert Impulse(0.5, 0.3, "tanh").bound_sq(10.0) == pytest.approx(0.09 * np.pi)
    with pytest.raises(ValueError):
        Impulse(0.5, history_map=lambda t, seg: seg.endpoint)
    k = Impulse(0.5, history_map=lambda t, seg: 0.5 * seg(-0.1)[0], nonconforming=True)
    assert k.lipschitz_sq() is None and not k.kernel_eligible


def test_spec_validation():
    with pytest.raises(ValueError):
        linear_spec(n=2, B=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        linear_spec(impulses=(Impulse(1.0, 0.1),))
    with pytest.raises(ValueError):
        linear_spec(impulses=(Impulse(0.5, 0.1), Impulse(0.5, 0.2)))
    with pytest.raises(ValueError):
        build_example(ExampleParams(n_modes=3, beta=0.5))
    with pytest.raises(ValueError):
        ProblemSpec(n_modes=2, horizon=1.0, hurst=0.7, beta=0.75, neutral_g=ZeroMap(),
                    drift_f=ZeroMap(), noise_sigma=0.0, control_B=2 * np.eye(2), impulses=(),
                    phi=InitialFunction.zero(2), declared=DeclaredConstants(M_b=1.0))


def test_impulses_sorted():
    spec = linear_spec(impulses=(Impulse(0.7, 0.1), Impulse(0.2, 0.3)))
    assert [k.time for k in spec.impulses] == [0.2, 0.7]


def test_controllability_constants_zero():
    nu, c32, ex = controllability_constants(1, 0.55, 1, 0.25, 0.0, 0.0, 1, 1, 1, 0.75)
    assert (nu, c32, ex) == (0.0, 0.0, 0.0)


def test_controllability_constants_arithmetic():
    M14 = analytic_constant(0.25)
    _, c32, _ = controllability_constants(1, M14, 1, 0.25, 1e-3, 1e-3, 1, 1, 1, 0.75)
    assert c32 == pytest.approx(0.082105715780947952844, rel=1e-13)
    assert c32 < 1


@settings(max_examples=30, deadline=None)
@given(T=st.floats(0.1, 3.0), Mg=st.floats(0, 1), Mf=st.floats(0, 1))
def test_cond32_monotone_in_horizon(T, Mg, Mf):
    a = controllability_constants(1, 0.55, 1, 0.25, Mg, Mf, 1, 2, T, 0.75)[1]
    b = controllability_constants(1, 0.55, 1, 0.25, Mg, Mf, 1, 2, 1.1 * T, 0.75)[1]
    assert b >= a


def test_report_trivial_maps():
    rep = hypothesis_report(linear_spec(n=3))
    assert rep.constants.nu == 0.0 and rep.constants.cond32 == 0.0
    assert rep.all_true


def test_lipschitz_probe_below_declared():
    spec = build_example(ExampleParams(n_modes=4, g_amp=0.02, g_rate=4.0, f_amp=0.3, f_rate=4.0))
    emp_g = probe_lipschitz(spec.neutral_g, spec, 0.75)
    emp_f = probe_lipschitz(spec.drift_f, spec, 0.0)
    assert 0 < emp_g <= spec.declared.M_g
    assert 0 < emp_f <= spec.declared.M_f


def test_report_example(example_spec):
    rep = hypothesis_report(example_spec)
    c = rep.constants
    assert c.l == 0.25 and c.M == 1.0 and c.c1 == 1.0
    assert c.M_w == pytest.approx(1 / ((1 - np.exp(-128.0)) / 128.0), rel=1e-12)
    ref = controllability_constants(c.M, c.M_1mb, c.c1, c.l, c.M_g, c.M_f, c.M_b, c.M_w, 1.0, 0.75)
    assert (c.nu, c.cond32, c.example_cond) == pytest.approx(ref, rel=1e-14)
    assert c.sum_M_k == pytest.approx(2 * 0.05**2)
    assert rep.all_true
    assert set(rep.as_dict()) == {"constants", "declared", "empirical", "verdicts", "caratheodory"}
