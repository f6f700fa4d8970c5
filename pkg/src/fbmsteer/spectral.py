"""Dirichlet Laplacian on (0, pi) in its sine eigenbasis.

A state is a vector of coefficients against e_n = sqrt(2/pi) sin(n xi),
n = 1..N.  In this basis the semigroup, fractional powers and the
convolution integrals of the mild formula are all diagonal and exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SEMIGROUP_BOUND = 1.0  # sup_t ||S(t)||, attained at t = 0


def mode_numbers(n_modes: int) -> np.ndarray:
    return np.arange(1, n_modes + 1, dtype=float)


def eigenvalues(n_modes: int) -> np.ndarray:
    """Eigenvalues n^2 of -A."""
    return mode_numbers(n_modes) ** 2


def semigroup_apply(t: float, v) -> np.ndarray:
    """S(t) v: mode n is multiplied by exp(-n^2 t)."""
    if t < 0:
        raise ValueError("semigroup is defined for t >= 0 only")
    v = np.asarray(v, dtype=float)
    return np.exp(-eigenvalues(v.shape[-1]) * t) * v


@dataclass(frozen=True)
class FracPower:
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"fractional power must lie in (0, 1], got {self.alpha}")


def _sign(sign) -> float:
    if sign in ("positive", +1, 1):
        return 1.0
    if sign in ("negative", -1):
        return -1.0
    raise ValueError(f"sign must be 'positive' or 'negative', got {sign!r}")


def frac_power_apply(p: FracPower, sign, v) -> np.ndarray:
    """(-A)^(+-alpha) v: mode n is multiplied by n^(+-2 alpha)."""
    v = np.asarray(v, dtype=float)
    return mode_numbers(v.shape[-1]) ** (2 * _sign(sign) * p.alpha) * v


def frac_power_norm(p: FracPower, sign, n_modes: int) -> float:
    """Operator norm of (-A)^(+-alpha) restricted to the first n_modes modes."""
    return float(np.max(mode_numbers(n_modes) ** (2 * _sign(sign) * p.alpha)))


def inverse_power_bound(beta: float) -> float:
    """c_1 = ||(-A)^(-beta)|| = 1 (smallest eigenvalue is 1)."""
    return 1.0


def analytic_constant(alpha: float) -> float:
    """M_alpha = (alpha/e)^alpha, the sharp constant in
    ||(-A)^alpha S(t)|| <= M_alpha t^(-alpha) (max of mu^alpha e^(-mu))."""
    if alpha <= 0:
        return 1.0
    return float((alpha / np.e) ** alpha)


def conv_weight_exact(n, t0: float, t1: float, t: float):
    """Exact weights of a constant input over [t0, t1] seen at time t.

    Returns ``(w_S, w_AS)`` with w_S = ∫_{t0}^{t1} e^{-n^2 (t-s)} ds and
    w_AS = -n^2 w_S, the matching integral of A S(t - s).  Vectorised in n.
    """
    if not t0 < t1:
        raise ValueError("need t0 < t1")
    if t1 > t:
        raise ValueError("need t1 <= t")
    lam = np.asarray(n, dtype=float) ** 2
    # e^{-lam (t-t1)} (1 - e^{-lam (t1-t0)}) / lam, written to survive lam -> 0
    width = t1 - t0
    x = lam * width
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(x > 1e-12, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0 - 0.5 * x)
    w_s = np.exp(-lam * (t - t1)) * width * frac
    w_as = -lam * w_s
    if np.ndim(w_s) == 0:
        return float(w_s), float(w_as)
    return w_s, w_as


def cell_weights(n_modes: int, dt: float):
    """Per-mode (decay, w_S, w_AS) for one cell of width dt ending at the
    evaluation time; decay = e^{-n^2 dt}."""
    lam = eigenvalues(n_modes)
    decay = np.exp(-lam * dt)
    w_s = -np.expm1(-lam * dt) / lam
    return decay, w_s, -lam * w_s


def gramian_closed_form(B, T: float) -> np.ndarray:
    """∫_0^T S(T-s) B B^T S(T-s) ds in closed form."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    lam = eigenvalues(B.shape[0])
    s = lam[:, None] + lam[None, :]
    return (B @ B.T) * (-np.expm1(-s * T) / s)


def exp_trapezoid_weights(kappa: float, h):
    """Weights (w_left, w_right) with

        ∫_0^h e^{kappa (u - h)} [y0 (1 - u/h) + y1 u/h] du = w_left y0 + w_right y1,

    exact for linear data.  A series is used where kappa h is small.
    Vectorised in h; zero widths give zero weights.
    """
    h_arr = np.asarray(h, dtype=float)
    z = kappa * h_arr
    small = np.abs(z) < 0.5
    k = np.arange(30.0)
    coef = 1.0 / np.cumprod(np.concatenate([[1.0], k[1:]]))
    zs = np.where(small, z, 0.0)[..., None]
    powers = zs**k * coef
    ser_l = np.sum(powers / ((k + 1) * (k + 2)), axis=-1)
    ser_r = np.sum(powers / (k + 2), axis=-1)
    zb = np.where(small, 1.0, z)
    em = np.exp(-zb)
    big_l = (1.0 - em) / zb**2 - em / zb
    big_r = 1.0 / zb - (1.0 - em) / zb**2
    e_small = np.exp(-z)
    w_left = h_arr * np.where(small, e_small * ser_l, big_l)
    w_right = h_arr * np.where(small, e_small * ser_r, big_r)
    if w_left.ndim == 0:
        return float(w_left), float(w_right)
    return w_left, w_right


def _gauss_panels(a: float, b: float, breakpoints=(), n_panels: int = 64, order: int = 16):
    """Composite Gauss-Legendre nodes/weights on [a, b], split at breakpoints."""
    edges = np.unique(np.concatenate([np.linspace(a, b, n_panels + 1),
                                      [p for p in breakpoints if a < p < b]]))
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


class SineBasis:
    """Collocation points xi_q = q pi/(M+1), q = 1..M, for N retained modes.

    ``synth`` maps coefficients to point values and ``analysis`` maps point
    values back; analysis is the discrete sine transform, exact for sine
    polynomials of degree <= M.  Pointwise nonlinearities are applied on
    the collocation points.
    """

    def __init__(self, n_modes: int, n_points: int | None = None):
        self.n_modes = int(n_modes)
        self.n_points = int(n_points) if n_points else 4 * self.n_modes
        if self.n_points < self.n_modes:
            raise ValueError("need at least as many collocation points as modes")

    @cached_property
    def xi(self) -> np.ndarray:
        return np.arange(1, self.n_points + 1) * np.pi / (self.n_points + 1)

    @cached_property
    def synth(self) -> np.ndarray:
        return np.sqrt(2.0 / np.pi) * np.sin(np.outer(self.xi, mode_numbers(self.n_modes)))

    @cached_property
    def analysis(self) -> np.ndarray:
        return self.synth.T * (np.pi / (self.n_points + 1))

    def to_points(self, coeffs) -> np.ndarray:
        return self.synth @ np.asarray(coeffs, dtype=float)

    def project(self, values) -> np.ndarray:
        return self.analysis @ np.asarray(values, dtype=float)

    def project_function(self, fn, breakpoints=()) -> np.ndarray:
        """L2 projection of a field fn(xi) by composite Gauss-Legendre."""
        x, w = _gauss_panels(0.0, np.pi, breakpoints)
        e = np.sqrt(2.0 / np.pi) * np.sin(np.outer(mode_numbers(self.n_modes), x))
        return e @ (w * np.asarray(fn(x), dtype=float))

    def galerkin_matrix(self, c, breakpoints=()) -> np.ndarray:
        """B_mn = ∫ c(xi) e_m(xi) e_n(xi) dxi: multiplication by c in the basis."""
        x, w = _gauss_panels(0.0, np.pi, breakpoints)
        e = np.sqrt(2.0 / np.pi) * np.sin(np.outer(mode_numbers(self.n_modes), x))
        cx = np.broadcast_to(np.asarray(c(x), dtype=float), x.shape)
        B = (e * (w * cx)) @ e.T
        return 0.5 * (B + B.T)
