import numpy as np
import pytest

from fbmsteer.model import (DeclaredConstants, ExampleParams, Impulse, ProblemSpec, ZeroMap,
                            build_example)
from fbmsteer.phase_space import InitialFunction, PhaseWeight


def linear_spec(n=4, horizon=1.0, phi=None, impulses=(), sigma=0.0, drift=None, B=None, lambdas=None):
    """Controlled heat equation with optional linear drift, impulses and noise."""
    phi = phi if phi is not None else InitialFunction.constant(np.linspace(1.0, 0.2, n))
    return ProblemSpec(
        n_modes=n, horizon=horizon, hurst=0.7, beta=0.75,
        neutral_g=ZeroMap(), drift_f=drift or ZeroMap(), noise_sigma=sigma,
        control_B=np.eye(n) if B is None else B, impulses=tuple(impulses), phi=phi,
        weight=PhaseWeight(4.0), lambdas=lambdas, declared=DeclaredConstants(),
    )


EXAMPLE_PARAMS = dict(
    n_modes=8, g_amp=5e-4, f_amp=2e-3, f_map="tanh", sigma=0.1,
    impulse_times=(0.25, 0.5), impulse_gain=0.05, phi_amp=1.0, phi_rate=1.0,
    phi_vector=np.r_[1.0, 0.5, np.zeros(6)],
)


@pytest.fixture(scope="session")
def example_spec():
    return build_example(ExampleParams(**EXAMPLE_PARAMS))


@pytest.fixture(scope="session")
def example_target():
    return np.r_[0.5, -0.3, 0.2, np.zeros(5)]


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
