import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbmsteer import _backend
from fbmsteer.fbm import wiener_integral
from fbmsteer.model import ExampleParams, Impulse, PointMap, build_example
from fbmsteer.phase_space import InitialFunction
from fbmsteer.solver import (Grid, NeutralNonContraction, PicardDivergence, picard_solve,
                             simulate_mild)

from conftest import EXAMPLE_PARAMS, linear_spec


def test_grid_snapping():
    g = Grid.uniform(1.0, 0.1, [0.3, 0.52])
    assert g.impulse_nodes == (3, 5)
    assert g.impulse_shift[1] == pytest.approx(-0.02)
    with pytest.raises(ValueError):
        Grid.uniform(1.0, 0.3)
    with pytest.raises(ValueError):
        Grid.uniform(1.0, 0.1, [0.02])
    with pytest.raises(ValueError):
        Grid.uniform(1.0, 0.1, [0.3, 0.31])


def test_free_evolution_exact():
    spec = linear_spec(n=5)
    grid = Grid.for_spec(spec, 1 / 50)
    traj = simulate_mild(spec, None, None, grid)
    lam = np.arange(1, 6) ** 2
    ref = np.exp(-np.outer(grid.times, lam)) * spec.phi(0.0)
    np.testing.assert_allclose(traj.left, ref, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(traj.z, 0.0, atol=1e-15)


def test_single_impulse_response():
    v0 = np.array([0.5, -1.0, 0.25])
    spec = linear_spec(n=3, phi=InitialFunction.zero(3), impulses=(Impulse(0.25, fn=lambda x: v0),))
    grid = Grid.for_spec(spec, 1 / 64)
    traj = simulate_mild(spec, None, None, grid)
    k = grid.impulse_nodes[0]
    assert not traj.left[: k + 1].any()
    np.testing.assert_allclose(traj.right[k], v0)
    lam = np.arange(1, 4) ** 2
    after = np.exp(-np.outer(grid.times[k:] - 0.25, lam)) * v0
    np.testing.assert_allclose(traj.right[k:], after, rtol=1e-13, atol=1e-15)


def test_linear_drift_first_order():
    a = 0.6
    spec = linear_spec(n=1, phi=InitialFunction.constant([1.0]), drift=PointMap(np.array([[a]])))
    errs = []
    for dt in (1 / 64, 1 / 128, 1 / 256):
        traj = simulate_mild(spec, None, None, Grid.for_spec(spec, dt))
        errs.append(abs(traj.terminal[0] - np.exp(a - 1.0)))
    assert errs[0] < 0.01
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.05)
    assert errs[2] / errs[1] == pytest.approx(0.5, abs=0.05)


def test_noise_term_is_stochastic_convolution():
    spec = linear_spec(n=3, phi=InitialFunction.zero(3), sigma=0.4, lambdas=np.array([1.0, 0.5, 0.2]))
    grid = Grid.for_spec(spec, 1 / 32)
    noise = spec.sample_noise(grid.times, 17)
    traj = simulate_mild(spec, None, noise, grid)
    lam = np.arange(1, 4) ** 2
    ref = wiener_integral(lambda s: 0.4 * np.exp(-lam * (1.0 - s)), noise, 1.0)
    np.testing.assert_allclose(traj.terminal, ref, rtol=1e-12, atol=1e-15)
    assert traj.noise_seed == 17


def test_noise_on_finer_grid_is_subsampled():
    spec = linear_spec(n=2, sigma=0.3)
    coarse = Grid.for_spec(spec, 1 / 16)
    fine_noise = spec.sample_noise(np.linspace(0, 1, 65), 5)
    a = simulate_mild(spec, None, fine_noise, coarse)
    b = simulate_mild(spec, None, fine_noise.subsample(4), coarse)
    np.testing.assert_array_equal(a.left, b.left)
    with pytest.raises(ValueError):
        simulate_mild(spec, None, spec.sample_noise(np.linspace(0, 1, 25), 5), coarse)


def test_control_shape_checked():
    spec = linear_spec(n=2)
    grid = Grid.for_spec(spec, 0.25)
    with pytest.raises(ValueError):
        simulate_mild(spec, np.zeros((4, 2)), None, grid)


@pytest.fixture(scope="module")
def example_run():
    spec = build_example(ExampleParams(**EXAMPLE_PARAMS))
    grid = Grid.for_spec(spec, 1 / 128)
    noise = spec.sample_noise(grid.times, 3)
    u = np.random.default_rng(0).standard_normal((grid.times.size, spec.n_modes)) * 0.1
    return spec, grid, noise, u


def test_kernel_and_generic_routes_agree(example_run):
    spec, grid, noise, u = example_run
    fast = simulate_mild(spec, u, noise, grid)
    slow = simulate_mild(spec, u, noise, grid, force_generic=True)
    for name in ("left", "right", "g_values", "f_values", "jumps"):
        np.testing.assert_allclose(getattr(fast, name), getattr(slow, name), atol=1e-13)


def test_picard_agrees_with_sweep(example_run):
    spec, grid, noise, u = example_run
    ref = simulate_mild(spec, u, noise, grid)
    traj, diag = picard_solve(spec, u, noise, grid, tol=1e-13)
    assert diag.converged and not diag.diverging
    np.testing.assert_allclose(traj.left, ref.left, atol=1e-12)
    np.testing.assert_allclose(traj.right, ref.right, atol=1e-12)


def test_picard_constant_operator_one_iteration():
    spec = linear_spec(n=3, sigma=0.2)
    grid = Grid.for_spec(spec, 1 / 32)
    traj, diag = picard_solve(spec, None, spec.sample_noise(grid.times, 1), grid, keep_iterates=True)
    assert diag.iterations == 1
    assert len(diag.iterates) == 3


def test_picard_reports_divergence():
    # the neutral term acts instantaneously, so a large amplitude breaks contraction
    spec = build_example(ExampleParams(n_modes=4, g_amp=200.0, g_rate=4.0, phi_amp=1.0,
                                       phi_vector=[1.0, 0, 0, 0]))
    grid = Grid.for_spec(spec, 1 / 32)
    with pytest.raises(PicardDivergence) as info:
        picard_solve(spec, None, None, grid, max_iter=50)
    d = info.value.diagnostics
    assert not d.converged and d.diverging
    assert min(d.contraction_ratios[2:]) > 1
    assert len(d.sup_distances) <= 50


def test_neutral_failure_is_raised():
    spec = build_example(ExampleParams(n_modes=4, g_amp=300.0, g_rate=4.0, phi_amp=1.0,
                                       phi_vector=[1.0, 0.5, 0, 0]))
    with pytest.raises(NeutralNonContraction) as info:
        simulate_mild(spec, None, None, Grid.for_spec(spec, 1 / 32), max_inner=50)
    assert info.value.node >= 1


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gain=st.floats(-0.5, 0.5))
def test_backends_agree(seed, gain):
    if "cython" not in _backend.available():
        pytest.skip("compiled core not built")
    params = dict(EXAMPLE_PARAMS, impulse_gain=gain, n_modes=4, phi_vector=[1.0, 0.5, 0, 0])
    spec = build_example(ExampleParams(**params))
    grid = Grid.for_spec(spec, 1 / 64)
    noise = spec.sample_noise(grid.times, seed)
    a = simulate_mild(spec, None, noise, grid, backend="python")
    b = simulate_mild(spec, None, noise, grid, backend="cython")
    np.testing.assert_allclose(a.left, b.left, atol=1e-14)
    np.testing.assert_allclose(a.right, b.right, atol=1e-14)
