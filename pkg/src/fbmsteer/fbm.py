"""Fractional Brownian motion: covariance, kernel, samplers and Wiener integrals.

Only the long-memory regime 1/2 < H < 1 is supported.  Paths are sampled
directly from the covariance of the increments (fractional Gaussian noise)
with one of three methods:

``cholesky``   exact, O(n^2) memory, the reference method
``circulant``  Davies-Harte circulant embedding, O(n log n)
``hosking``    Durbin-Levinson recursion, O(n^2) time, O(n) memory
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, special

from . import _backend

METHODS = ("cholesky", "circulant", "hosking")


class SingularArgumentError(ValueError):
    """K_H(t, s) requested at s = 0 < t where the prefactor s^(1/2-H) blows up."""


@dataclass(frozen=True)
class HurstParam:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.5 < v < 1.0):
            raise ValueError(f"Hurst parameter must lie in (1/2, 1), got {v}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value


def _hurst(H) -> float:
    return H.value if isinstance(H, HurstParam) else HurstParam(H).value


def derive_seed(master_seed: int, *keys: int) -> int:
    """Seed for the stream labelled by ``keys`` under ``master_seed``.

    Derivation depends only on the labels, never on the order in which
    streams are requested.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------- covariance

def cov_rh(s, t, H):
    """Covariance R_H(s, t) = (t^2H + s^2H - |t-s|^2H) / 2 (vectorised)."""
    h2 = 2.0 * _hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("cov_rh is defined for nonnegative times only")
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocov(n_lags: int, H, dt: float = 1.0) -> np.ndarray:
    """Autocovariance of increments over steps of length dt, lags 0..n_lags-1."""
    h2 = 2.0 * _hurst(H)
    k = np.arange(n_lags, dtype=float)
    return 0.5 * dt**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


# -------------------------------------------------------------------- kernel

def kh_constant(H) -> float:
    h = _hurst(H)
    return float(np.sqrt(h * (2 * h - 1) / special.beta(2 - 2 * h, h - 0.5)))


def kernel_kh(t: float, s: float, H) -> float:
    """Square-integrable kernel of the Wiener representation of fBm.

    Returns 0 for t <= s.  The integrable singularity (u - s)^(H - 3/2) is
    handed to QUADPACK as an algebraic weight.
    """
    h = _hurst(H)
    if t < 0 or s < 0:
        raise ValueError("kernel_kh needs nonnegative times")
    if t <= s:
        return 0.0
    if s == 0.0:
        raise SingularArgumentError("K_H(t, 0) diverges for t > 0 (prefactor s^(1/2-H))")
    val, _ = integrate.quad(
        lambda u: u ** (h - 0.5), s, t,
        weight="alg", wvar=(h - 1.5, 0.0), epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return kh_constant(h) * s ** (0.5 - h) * val


def representation_variance(t: float, H) -> float:
    """∫_0^t K_H(t, s)^2 ds, which equals t^(2H) when the kernel is right.

    Writing the inner integral as (t-s)^(H-1/2) I(s) with a bounded I leaves
    the outer integrand c^2 s^(1-2H) (t-s)^(2H-1) I(s)^2, whose endpoint
    behaviour is again an algebraic weight.
    """
    h = _hurst(H)
    c2 = kh_constant(h) ** 2

    def inner(s):
        val, _ = integrate.quad(
            lambda v: (s + (t - s) * v) ** (h - 0.5), 0.0, 1.0,
            weight="alg", wvar=(h - 1.5, 0.0), epsabs=0.0, epsrel=1e-11, limit=400,
        )
        return val

    val, _ = integrate.quad(
        lambda s: inner(s) ** 2, 0.0, t,
        weight="alg", wvar=(1 - 2 * h, 2 * h - 1), epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return c2 * val


# ------------------------------------------------------------------ sampling

@dataclass(frozen=True)
class FbmPath:
    grid: np.ndarray
    values: np.ndarray
    hurst: HurstParam
    seed: int
    method: str = "cholesky"
    fallback: bool = False  # circulant embedding failed, cholesky used instead

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])


@functools.lru_cache(maxsize=32)
def _unit_cholesky(n: int, h: float) -> np.ndarray:
    cov = linalg.toeplitz(fgn_autocov(n, h))
    return np.linalg.cholesky(cov)


@functools.lru_cache(maxsize=32)
def _circulant_eigs(n: int, h: float) -> np.ndarray:
    g = fgn_autocov(n + 1, h)
    row = np.concatenate([g, g[-2:0:-1]])
    return np.fft.fft(row).real


def fgn_batch(n_steps: int, dt: float, H, rng: np.random.Generator,
              n_paths: int = 1, method: str = "cholesky"):
    """Draw ``n_paths`` rows of fractional Gaussian noise.

    Returns ``(increments, fallback)`` where increments has shape
    ``(n_paths, n_steps)``.
    """
    h = _hurst(H)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    scale = dt**h
    fallback = False
    if method == "circulant":
        lam = _circulant_eigs(n_steps, h)
        if lam.min() < -1e-10 * lam.max():
            fallback = True
            method = "cholesky"
        else:
            m = lam.size
            lam = np.clip(lam, 0.0, None)
            z = rng.standard_normal((n_paths, m)) + 1j * rng.standard_normal((n_paths, m))
            w = np.fft.fft(np.sqrt(lam / m) * z, axis=1)
            # real and imaginary parts are independent fGn draws; keep the real one
            return scale * w[:, :n_steps].real, fallback
    z = rng.standard_normal((n_paths, n_steps))
    if method == "cholesky":
        return scale * z @ _unit_cholesky(n_steps, h).T, fallback
    return scale * _backend.core.hosking(fgn_autocov(n_steps, h), z), fallback


def sample_fgn(n_steps: int, dt: float, H, seed: int, method: str = "cholesky") -> FbmPath:
    """One fBm path on the grid k*dt, k = 0..n_steps, built from its increments."""
    hp = H if isinstance(H, HurstParam) else HurstParam(H)
    rng = np.random.default_rng(seed)
    inc, fallback = fgn_batch(n_steps, dt, hp, rng, 1, method)
    values = np.concatenate([[0.0], np.cumsum(inc[0])])
    grid = dt * np.arange(n_steps + 1)
    return FbmPath(grid, values, hp, int(seed), method, fallback)


def sample_fbm_batch(n_paths: int, n_steps: int, dt: float, H, seed: int,
                     method: str = "cholesky") -> np.ndarray:
    """(n_paths, n_steps + 1) array of fBm paths from a single seeded stream."""
    rng = np.random.default_rng(seed)
    inc, _ = fgn_batch(n_steps, dt, H, rng, n_paths, method)
    return np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)], axis=1)


# ---------------------------------------------------------------------- Q-fBm

@dataclass(frozen=True)
class QfbmSpec:
    lambdas: np.ndarray
    hurst: HurstParam

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("need at least one mode")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("mode weights must be finite and nonnegative")
        object.__setattr__(self, "lambdas", lam)
        if not isinstance(self.hurst, HurstParam):
            object.__setattr__(self, "hurst", HurstParam(self.hurst))

    @property
    def n_modes(self) -> int:
        return int(self.lambdas.size)


@dataclass(frozen=True)
class QfbmPath:
    """Truncated Q-fBm; ``values[:, n]`` is sqrt(lambda_n) times fBm path n."""

    grid: np.ndarray
    modes: tuple
    spec: QfbmSpec
    master_seed: int
    values: np.ndarray = field(repr=False)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def subsample(self, factor: int) -> "QfbmPath":
        """Same realisation seen on every ``factor``-th node."""
        if factor < 1 or (self.grid.size - 1) % factor:
            raise ValueError("factor must divide the number of steps")
        modes = tuple(
            FbmPath(p.grid[::factor], p.values[::factor], p.hurst, p.seed, p.method, p.fallback)
            for p in self.modes
        )
        return QfbmPath(self.grid[::factor], modes, self.spec, self.master_seed,
                        self.values[::factor].copy())


def _check_uniform(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid needs at least two nodes")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    d = np.diff(grid)
    if np.any(d <= 0) or np.ptp(d) > 1e-9 * d[0]:
        raise ValueError("grid must be uniform and strictly increasing")
    return grid


def sample_qfbm(spec: QfbmSpec, grid, master_seed: int, method: str = "cholesky") -> QfbmPath:
    """Independent fBm per mode, seeded by (master_seed, mode number)."""
    grid = _check_uniform(grid)
    n_steps = grid.size - 1
    dt = (grid[-1] - grid[0]) / n_steps
    modes = []
    for n in range(spec.n_modes):
        p = sample_fgn(n_steps, dt, spec.hurst, derive_seed(master_seed, n + 1), method)
        modes.append(FbmPath(grid, p.values, p.hurst, p.seed, p.method, p.fallback))
    values = np.stack([p.values for p in modes], axis=1) * np.sqrt(spec.lambdas)
    return QfbmPath(grid, tuple(modes), spec, int(master_seed), values)


# ------------------------------------------------------------ Wiener integral

def _grid_index(grid, t) -> int:
    j = int(np.rint(t / (grid[1] - grid[0])))
    if j < 0 or j >= grid.size or abs(grid[j] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t = {t} is not a grid node")
    return j


def wiener_integral(integrand, path: QfbmPath, t: float) -> np.ndarray:
    """Left-point sum of a deterministic per-mode step integrand against ``path``.

    ``integrand`` is either a callable s -> per-mode multipliers, an array of
    shape (n_cells, N) with one row per grid cell, or a constant.
    """
    j = _grid_index(path.grid, t)
    dB = path.increments[:j]
    if callable(integrand):
        psi = np.array([np.broadcast_to(integrand(s), (path.spec.n_modes,)) for s in path.grid[:j]])
    else:
        psi = np.asarray(integrand, dtype=float)
        psi = psi[:j] if psi.ndim == 2 else np.broadcast_to(psi, dB.shape)
    if j == 0:
        return np.zeros(path.spec.n_modes)
    return np.sum(psi * dB, axis=0)


def abs_h_norm_sq(psi, dt: float, H) -> float:
    """Norm in |H| of a step function with value psi[i] on cell i.

    Cell pairs are integrated exactly: H(2H-1) ∫∫ |s-t|^(2H-2) over cells i, j
    equals the increment autocovariance at lag |i-j|, so the diagonal
    singularity needs no special handling.
    """
    a = np.asarray(psi, dtype=float)
    a = np.abs(a) if a.ndim == 1 else np.linalg.norm(a, axis=1)
    gam = fgn_autocov(a.size, H, dt)
    return float(a @ linalg.toeplitz(gam) @ a)


def wiener_moment_bound(psi_sq_integral: float, t: float, H) -> float:
    """2H t^(2H-1) ∫_0^t ||psi||^2: bound on the second moment of a Wiener integral."""
    h = _hurst(H)
    return 2 * h * t ** (2 * h - 1) * psi_sq_integral
