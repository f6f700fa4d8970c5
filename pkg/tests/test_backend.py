import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from fbmsteer import _backend, _pycore
from fbmsteer.fbm import fgn_autocov

needs_ext = pytest.mark.skipif("cython" not in _backend.available(), reason="compiled core not built")


def test_selection():
    assert _backend.get("python") is _pycore
    assert _backend.NAME in _backend.available()
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_env_forces_fallback():
    env = dict(os.environ, FBMSTEER_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from fbmsteer import _backend; print(_backend.NAME)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"


def test_hosking_reproduces_covariance():
    # the recursion is linear in z: feeding unit vectors exposes the factor L^T
    gam = fgn_autocov(12, 0.7)
    Lt = _pycore.hosking(gam, np.eye(12))
    np.testing.assert_allclose(Lt.T @ Lt, linalg.toeplitz(gam), atol=1e-13)


def test_exp_scan_recursion():
    rng = np.random.default_rng(0)
    decay = np.exp(-np.arange(1, 4) ** 2 * 0.1)
    data = rng.standard_normal((6, 3))
    out = _pycore.exp_scan(decay, data)
    ref = np.zeros((7, 3))
    for j in range(6):
        ref[j + 1] = decay * ref[j] + data[j]
    np.testing.assert_allclose(out, ref, rtol=1e-15)


@needs_ext
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 64), H=st.floats(0.51, 0.99))
def test_hosking_agree(seed, n, H):
    gam = fgn_autocov(n, H)
    z = np.random.default_rng(seed).standard_normal((3, n))
    a = np.asarray(_backend.get("python").hosking(gam, z))
    b = np.asarray(_backend.get("cython").hosking(gam, z))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_ext
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 50), N=st.integers(1, 10))
def test_exp_scan_agree(seed, J, N):
    rng = np.random.default_rng(seed)
    decay = rng.uniform(0, 1, N)
    data = rng.standard_normal((J, N))
    np.testing.assert_allclose(_backend.get("python").exp_scan(decay, data),
                               _backend.get("cython").exp_scan(decay, data), rtol=1e-14, atol=1e-15)
