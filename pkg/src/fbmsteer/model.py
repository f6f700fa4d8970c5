"""Equation data: history maps, impulses, the heat-equation example and the
audit of every constant the controllability condition depends on.

The equation is

    d[x(t) - g(t, x_t)] = [A x(t) + f(t, x_t) + B u(t)] dt + sigma(t) dB^H(t),
    x(t_k^+) - x(t_k^-) = I_k(x(t_k^-)),      x_0 = phi,

with A the Dirichlet Laplacian on (0, pi) truncated to N sine modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import _pycore, spectral
from .fbm import HurstParam, QfbmSpec, sample_qfbm
from .phase_space import History, InitialFunction, PhaseWeight
from .spectral import FracPower, SineBasis

POINTWISE = {"identity": _pycore.IDENTITY, "tanh": _pycore.TANH, "sin": _pycore.SIN}
POINTWISE_LIP = {"identity": 1.0, "tanh": 1.0, "sin": 1.0}
POINTWISE_BOUND = {"identity": math.inf, "tanh": 1.0, "sin": 1.0}
PROFILES = {
    "sine": lambda xi: np.sin(xi),
    "constant": lambda xi: np.ones_like(np.asarray(xi, dtype=float)),
}


def _profile(profile) -> Callable:
    if callable(profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}") from None


def _code(pointwise: str) -> int:
    try:
        return POINTWISE[pointwise]
    except KeyError:
        raise ValueError(f"unknown pointwise map {pointwise!r}; choose from {sorted(POINTWISE)}") from None


def _rec_pairs(seg: History):
    """Consecutive record samples (start, end) of positive width on [0, t]."""
    times = np.concatenate([seg.rec_times, [seg.t]])
    vals = np.concatenate([seg.rec_values, seg.endpoint[None, :]])
    keep = np.diff(times) > 0
    return times[:-1][keep], times[1:][keep], vals[:-1][keep], vals[1:][keep]


# ------------------------------------------------------------------ history maps

class HistoryMap:
    """A map (t, segment) -> coefficient vector."""

    state_dependent = True
    is_zero = False

    def evaluate(self, t: float, seg: History, basis: SineBasis) -> np.ndarray:
        raise NotImplementedError

    def stream(self, phi: InitialFunction, basis: SineBasis, dt: float | None = None):
        return GenericStream(self, phi, basis)


class GenericStream:
    """Evaluates a map along a trajectory that is being built node by node."""

    def __init__(self, fmap: HistoryMap, phi: InitialFunction, basis: SineBasis):
        self.fmap, self.phi, self.basis = fmap, phi, basis
        self.times: list[float] = []
        self.values: list[np.ndarray] = []

    def segment(self, t: float, x) -> History:
        x = np.asarray(x, dtype=float)
        if not self.times:
            return History(self.phi, 0.0, np.array([0.0]), x[None, :].copy(), x.copy())
        rt = np.array(self.times + [t])
        rv = np.array(self.values + [x])
        return History(self.phi, float(t), rt, rv, x.copy())

    def peek(self, t: float, x) -> np.ndarray:
        return self.fmap.evaluate(t, self.segment(t, x), self.basis)

    def commit(self, t: float, x_left, x_right) -> None:
        self.times.append(float(t))
        self.values.append(np.array(x_left, dtype=float))
        if not np.array_equal(x_left, x_right):
            self.times.append(float(t))
            self.values.append(np.array(x_right, dtype=float))


class ZeroMap(HistoryMap):
    state_dependent = False
    is_zero = True

    def evaluate(self, t, seg, basis):
        return np.zeros(basis.n_modes)


@dataclass
class PointMap(HistoryMap):
    """x_t -> matrix @ x(t): depends on the current value only."""

    matrix: np.ndarray

    def evaluate(self, t, seg, basis):
        return np.asarray(self.matrix, dtype=float) @ seg.endpoint


@dataclass
class CallableMap(HistoryMap):
    fn: Callable[[float, History], np.ndarray]
    state_dependent: bool = True

    def evaluate(self, t, seg, basis):
        return np.asarray(self.fn(t, seg), dtype=float)


@dataclass
class HistoryIntegralMap(HistoryMap):
    """psi -> P_N[ ∫_{-inf}^0 T(psi(theta)(xi)) K(t, xi, theta - t) dtheta ].

    ``kernel(t, xi, theta)`` must broadcast over numpy arrays.  The initial
    function part is integrated by composite Gauss-Legendre on
    [-tail_span, -t]; the recorded part by the trapezoid rule between
    samples.
    """

    kernel: Callable
    pointwise: str = "identity"
    tail_span: float = 40.0
    n_panels: int = 400

    def evaluate(self, t, seg, basis):
        code = _code(self.pointwise)
        xi = basis.xi[:, None]
        total = np.zeros(basis.n_points)
        lo, hi = -self.tail_span, -seg.t
        if hi > lo:
            bps = ()
            if seg.phi.table_times is not None:
                bps = tuple(seg.phi.table_times - seg.t)
            theta, w = spectral._gauss_panels(lo, hi, bps, n_panels=self.n_panels, order=8)
            vals = _pycore.apply_code(code, basis.synth @ seg.phi(theta + seg.t).T)
            total += np.sum(vals * self.kernel(t, xi, theta[None, :] - t) * w, axis=1)
        s0, s1, v0, v1 = _rec_pairs(seg)
        if s0.size:
            th0, th1 = s0 - seg.t, s1 - seg.t
            y0 = _pycore.apply_code(code, basis.synth @ v0.T) * self.kernel(t, xi, th0[None, :] - t)
            y1 = _pycore.apply_code(code, basis.synth @ v1.T) * self.kernel(t, xi, th1[None, :] - t)
            total += np.sum(0.5 * (th1 - th0) * (y0 + y1), axis=1)
        return basis.project(total)


@dataclass
class ExpMemoryMap(HistoryMap):
    """Kernel amplitude * p(xi) * e^{rate theta}, evaluated at theta - t:

        psi -> P_N[ a p(xi) e^{-rate t} ∫_{-inf}^0 T(psi(theta)(xi)) e^{rate theta} dtheta ].

    The integral is updated recursively along a trajectory, which is what
    the compiled sweep exploits.
    """

    amplitude: float
    rate: float
    profile: str | Callable = "sine"
    pointwise: str = "identity"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("memory rate must be positive for the history integral to converge")
        _code(self.pointwise)
        _profile(self.profile)

    @property
    def code(self) -> int:
        return _code(self.pointwise)

    def amp_points(self, basis: SineBasis) -> np.ndarray:
        return self.amplitude * _profile(self.profile)(basis.xi)

    def tail_integral(self, phi: InitialFunction, basis: SineBasis) -> np.ndarray:
        """∫_{-inf}^0 T(phi(s)(xi_q)) e^{rate s} ds on the collocation points."""
        if self.code == _pycore.IDENTITY and phi.table_times is None:
            out = np.zeros(basis.n_points)
            for c, a, v in phi.terms:
                out += c / (a + self.rate) * (basis.synth @ v)
            return out
        s = phi.grid
        y = _pycore.apply_code(self.code, basis.synth @ phi(s).T)  # (M, K)
        h = np.diff(s)
        wl, wr = exp_trapezoid_vec(self.rate, h)
        fac = np.exp(self.rate * s[1:])
        body = np.sum(fac * (wl * y[:, :-1] + wr * y[:, 1:]), axis=1)
        return body + y[:, 0] * np.exp(self.rate * s[0]) / self.rate

    def memory(self, seg: History, basis: SineBasis) -> np.ndarray:
        r = np.exp(-self.rate * seg.t) * self.tail_integral(seg.phi, basis)
        s0, s1, v0, v1 = _rec_pairs(seg)
        if s0.size:
            wl, wr = exp_trapezoid_vec(self.rate, s1 - s0)
            fac = np.exp(self.rate * (s1 - seg.t))
            y0 = _pycore.apply_code(self.code, basis.synth @ v0.T)
            y1 = _pycore.apply_code(self.code, basis.synth @ v1.T)
            r = r + np.sum(fac * (wl * y0 + wr * y1), axis=1)
        return r

    def evaluate(self, t, seg, basis):
        scale = np.exp(-self.rate * t)
        return basis.project(self.amp_points(basis) * scale * self.memory(seg, basis))

    def stream(self, phi, basis, dt=None):
        return ExpMemoryStream(self, phi, basis)

    def lipschitz_bound(self, n_modes: int, beta: float, weight: PhaseWeight) -> float:
        """Upper bound for the squared Lipschitz constant against the weighted
        history norm, with (-A)^beta applied when beta > 0.  Needs rate >=
        weight.rate so that e^{rate s} <= h(s)."""
        if self.rate < weight.rate:
            return math.inf
        amp = abs(self.amplitude) * float(np.max(np.abs(_profile(self.profile)(np.linspace(0, np.pi, 1025)))))
        return (amp * POINTWISE_LIP[self.pointwise] * n_modes ** (2 * beta)) ** 2


class ExpMemoryStream:
    """Recursive evaluation of an ExpMemoryMap along a trajectory."""

    def __init__(self, fmap: ExpMemoryMap, phi: InitialFunction, basis: SineBasis):
        self.fmap, self.basis = fmap, basis
        self.amp = fmap.amp_points(basis)
        self.r = fmap.tail_integral(phi, basis)
        self.t_last = 0.0
        self.y_prev = None

    def _pre(self, t):
        h = t - self.t_last
        if self.y_prev is None or h == 0.0:
            return self.r, 0.0
        wl, wr = spectral.exp_trapezoid_weights(self.fmap.rate, h)
        return np.exp(-self.fmap.rate * h) * self.r + wl * self.y_prev, wr

    def peek(self, t, x):
        pre, wr = self._pre(t)
        y = _pycore.apply_code(self.fmap.code, self.basis.synth @ np.asarray(x, dtype=float))
        return self.basis.project(self.amp * np.exp(-self.fmap.rate * t) * (pre + wr * y))

    def commit(self, t, x_left, x_right):
        pre, wr = self._pre(t)
        y = _pycore.apply_code(self.fmap.code, self.basis.synth @ np.asarray(x_left, dtype=float))
        self.r = pre + wr * y
        self.t_last = float(t)
        self.y_prev = _pycore.apply_code(self.fmap.code, self.basis.synth @ np.asarray(x_right, dtype=float))


def exp_trapezoid_vec(kappa: float, h):
    return spectral.exp_trapezoid_weights(kappa, np.asarray(h, dtype=float))


# ---------------------------------------------------------------------- impulses

@dataclass(frozen=True)
class Impulse:
    """Jump I_k at ``time``.

    By default I_k(x) = gain * P_N[r(x)] with r a pointwise map applied on
    the collocation points (for r = identity this is gain * x).  ``fn``
    replaces that with an arbitrary callable of x(t_k^-).  ``history_map``
    is the nonconforming variant whose jump depends on the whole segment;
    it is only honoured when ``nonconforming`` is set.
    """

    time: float
    gain: float = 0.0
    pointwise: str = "identity"
    fn: Callable | None = None
    history_map: Callable | None = None
    nonconforming: bool = False

    def __post_init__(self):
        _code(self.pointwise)
        if self.history_map is not None and not self.nonconforming:
            raise ValueError("history-dependent impulses require nonconforming=True")

    @property
    def kernel_eligible(self) -> bool:
        return self.fn is None and self.history_map is None

    @property
    def code(self) -> int:
        return _code(self.pointwise)

    def __call__(self, x, basis: SineBasis, seg: History | None = None) -> np.ndarray:
        if self.history_map is not None:
            if seg is None:
                raise ValueError("history-dependent impulse needs the segment at t_k")
            return np.asarray(self.history_map(self.time, seg), dtype=float)
        x = np.asarray(x, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(x), dtype=float)
        if self.pointwise == "identity":
            return self.gain * x
        return self.gain * basis.project(_pycore.apply_code(_code(self.pointwise), basis.synth @ x))

    def lipschitz_sq(self) -> float | None:
        if not self.kernel_eligible:
            return None
        return (self.gain * POINTWISE_LIP[self.pointwise]) ** 2

    def bound_sq(self, radius: float) -> float | None:
        """sup ||I_k(x)||^2, over ||x|| <= radius when the map is unbounded."""
        if not self.kernel_eligible:
            return None
        b = POINTWISE_BOUND[self.pointwise]
        if math.isinf(b):
            return (self.gain * radius) ** 2
        return self.gain**2 * b**2 * np.pi


# ---------------------------------------------------------------- specification

@dataclass(frozen=True)
class DeclaredConstants:
    """User-declared constants; ``None`` means "compute it"."""

    M_g: float = 0.0
    M_g_bar: float | None = None
    M_f: float = 0.0
    M_f_bar: float | None = None
    M_k: tuple | None = None
    M_tilde_k: tuple | None = None
    M_b: float | None = None
    M_w: float | None = None
    impulse_radius: float = 10.0


def _sigma_fn(sigma, n_modes):
    if callable(sigma):
        return lambda t: np.broadcast_to(np.asarray(sigma(t), dtype=float), (n_modes,)).copy()
    arr = np.broadcast_to(np.asarray(sigma, dtype=float), (n_modes,)).copy()
    return lambda t: arr


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    n_modes: int
    horizon: float
    hurst: HurstParam
    beta: FracPower
    neutral_g: HistoryMap
    drift_f: HistoryMap
    noise_sigma: Callable | float | np.ndarray
    control_B: np.ndarray
    impulses: tuple
    phi: InitialFunction
    weight: PhaseWeight = field(default_factory=PhaseWeight)
    lambdas: np.ndarray | None = None
    declared: DeclaredConstants = field(default_factory=DeclaredConstants)
    basis: SineBasis | None = None
    probe_seed: int = 12345

    def __post_init__(self):
        n = int(self.n_modes)
        if n < 1:
            raise ValueError("need at least one mode")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not isinstance(self.hurst, HurstParam):
            object.__setattr__(self, "hurst", HurstParam(self.hurst))
        if not isinstance(self.beta, FracPower):
            object.__setattr__(self, "beta", FracPower(self.beta))
        if not (0.5 < self.beta.alpha < 1.0):
            raise ValueError("beta must lie in (1/2, 1)")
        B = np.atleast_2d(np.asarray(self.control_B, dtype=float))
        if B.shape != (n, n):
            raise ValueError(f"control_B must be {n}x{n}")
        if not np.allclose(B, B.T, atol=1e-12, rtol=0):
            raise ValueError("control_B must be symmetric")
        object.__setattr__(self, "control_B", B)
        if self.declared.M_b is not None and np.linalg.norm(B, 2) ** 2 > self.declared.M_b * (1 + 1e-12):
            raise ValueError("||B||^2 exceeds the declared M_b")
        imps = tuple(sorted(self.impulses, key=lambda k: k.time))
        times = [k.time for k in imps]
        if any(not (0 < s < self.horizon) for s in times) or len(set(times)) != len(times):
            raise ValueError("impulse times must be distinct and strictly inside (0, T)")
        object.__setattr__(self, "impulses", imps)
        lam = np.ones(n) if self.lambdas is None else np.asarray(self.lambdas, dtype=float)
        if lam.shape != (n,):
            raise ValueError("need one noise weight per mode")
        object.__setattr__(self, "lambdas", lam)
        if self.phi.n_modes != n:
            raise ValueError("initial function has the wrong number of modes")
        if self.basis is None:
            object.__setattr__(self, "basis", SineBasis(n))
        object.__setattr__(self, "sigma", _sigma_fn(self.noise_sigma, n))

    # convenience ----------------------------------------------------------
    @property
    def noise_spec(self) -> QfbmSpec:
        return QfbmSpec(self.lambdas, self.hurst)

    def sigma_values(self, times) -> np.ndarray:
        return np.array([self.sigma(t) for t in np.atleast_1d(times)])

    @property
    def noise_free(self) -> bool:
        return not np.any(self.sigma_values(np.linspace(0, self.horizon, 5))) or not np.any(self.lambdas)

    def sample_noise(self, grid, seed: int, method: str = "cholesky"):
        return sample_qfbm(self.noise_spec, grid, seed, method)

    def g(self, t, seg):
        return self.neutral_g.evaluate(t, seg, self.basis)

    def f(self, t, seg):
        return self.drift_f.evaluate(t, seg, self.basis)

    def phi_segment(self) -> History:
        x0 = self.phi(0.0)
        return History(self.phi, 0.0, np.array([0.0]), x0[None, :], x0.copy())


def apply_impulse(k: int, v_minus, spec: ProblemSpec, seg: History | None = None) -> np.ndarray:
    """x(t_k^+) = x(t_k^-) + I_k(x(t_k^-)), k = 1..m."""
    if not 1 <= k <= len(spec.impulses):
        raise ValueError(f"impulse index {k} out of range 1..{len(spec.impulses)}")
    v = np.asarray(v_minus, dtype=float)
    return v + spec.impulses[k - 1](v, spec.basis, seg)


# -------------------------------------------------------------- worked example

@dataclass
class ExampleParams:
    """Parameters of the heat-equation example with exponential-memory kernels."""

    n_modes: int = 8
    horizon: float = 1.0
    hurst: float = 0.7
    beta: float = 0.75
    rate: float = 4.0
    g_amp: float = 0.0
    g_rate: float = 4.0
    g_profile: str = "sine"
    g_map: str = "identity"
    g_kernel: Callable | None = None   # general G(t, xi, theta); overrides the exp form
    f_amp: float = 0.0
    f_rate: float = 4.0
    f_profile: str = "sine"
    f_map: str = "identity"
    f_kernel: Callable | None = None
    sigma: float = 0.0
    lambda_decay: float = 2.0          # lambda_n = n^(-lambda_decay)
    impulse_times: Sequence[float] = ()
    impulse_gain: float | Sequence[float] = 0.0
    impulse_alpha: Sequence[Callable] | None = None  # alpha_k; gain = ∫_0^inf alpha_k
    impulse_map: str = "identity"
    control_c: Callable | float = 1.0
    phi_amp: float = 0.0
    phi_rate: float = 0.0
    phi_vector: Sequence[float] | None = None
    declared: DeclaredConstants | None = None
    collocation: int | None = None
    probe_seed: int = 12345


def _kernel_integrable(kernel, horizon, n_t=5, n_xi=33) -> float:
    """max over sampled t of ∫_0^pi (∫_{-inf}^0 |K(t, xi, theta)| dtheta)^2 dxi."""
    worst = 0.0
    xis = np.linspace(0, np.pi, n_xi)
    for t in np.linspace(0, horizon, n_t):
        inner = np.array([integrate.quad(lambda th: abs(kernel(t, x, th)), -np.inf, 0.0, limit=200)[0]
                          for x in xis])
        worst = max(worst, float(integrate.trapezoid(inner**2, xis)))
    return worst


def build_example(p: ExampleParams) -> ProblemSpec:
    n = p.n_modes
    basis = SineBasis(n, p.collocation)
    weight = PhaseWeight(p.rate)

    def make(amp, rate, profile, pmap, kernel):
        if kernel is not None:
            val = _kernel_integrable(kernel, p.horizon)
            if not np.isfinite(val):
                raise ValueError("history kernel fails the integrability check")
            return HistoryIntegralMap(kernel, pmap)
        if amp == 0.0:
            return ZeroMap()
        prof = _profile(profile)
        val = _kernel_integrable(lambda t, x, th: amp * prof(x) * math.exp(rate * (th - t)), p.horizon, n_t=2, n_xi=9)
        if not np.isfinite(val):
            raise ValueError("history kernel fails the integrability check")
        return ExpMemoryMap(amp, rate, profile, pmap)

    g = make(p.g_amp, p.g_rate, p.g_profile, p.g_map, p.g_kernel)
    f = make(p.f_amp, p.f_rate, p.f_profile, p.f_map, p.f_kernel)

    if callable(p.control_c):
        B = basis.galerkin_matrix(p.control_c)
    else:
        B = float(p.control_c) * np.eye(n)

    m = len(p.impulse_times)
    if p.impulse_alpha is not None:
        gains = [integrate.quad(a, 0.0, np.inf)[0] for a in p.impulse_alpha]
    else:
        gains = list(np.broadcast_to(np.asarray(p.impulse_gain, dtype=float), (m,)))
    impulses = tuple(Impulse(float(t), float(gk), p.impulse_map) for t, gk in zip(p.impulse_times, gains))

    vec = np.zeros(n) if p.phi_vector is None else np.asarray(p.phi_vector, dtype=float)
    phi = InitialFunction(((p.phi_amp, p.phi_rate, vec),), n, weight=weight)

    declared = p.declared
    if declared is None:
        bound_g = g.lipschitz_bound(n, p.beta, weight) if isinstance(g, ExpMemoryMap) else 0.0
        bound_f = f.lipschitz_bound(n, 0.0, weight) if isinstance(f, ExpMemoryMap) else 0.0
        declared = DeclaredConstants(M_g=bound_g, M_f=bound_f)
    return ProblemSpec(
        n_modes=n, horizon=p.horizon, hurst=HurstParam(p.hurst), beta=FracPower(p.beta),
        neutral_g=g, drift_f=f, noise_sigma=p.sigma, control_B=B, impulses=impulses,
        phi=phi, weight=weight, lambdas=np.arange(1, n + 1, dtype=float) ** (-p.lambda_decay),
        declared=declared, basis=basis, probe_seed=p.probe_seed,
    )


def impulse_tilde_constant(alpha: Callable, t_k: float, weight: PhaseWeight) -> float:
    """∫_{-inf}^{t_k} h(s) alpha(s)^2 ds for the history-weighted impulse kernel."""
    val, _ = integrate.quad(lambda s: math.exp(weight.rate * s) * alpha(s) ** 2, -np.inf, t_k, limit=200)
    return float(val)


# ----------------------------------------------------------------- audit

def controllability_constants(M, M_1mb, c1, l, M_g, M_f, M_b, M_w, T, beta):
    """(nu, cond32, example_cond) from their inputs.

    nu      = 4 M_g l^2 (c1^2 + (M_1mb T^beta)^2 / (2 beta - 1))
    cond32  = 7 l^2 (1 + 8 M M_b M_w T^2) {8 (c1^2 + (M_1mb T^beta)^2/(2 beta - 1)) M_g + 8 M T^2 M_f}
    example = 7/2 (1 + 8 M M_b M_w T^2) {(1 + 2 M_1mb^2 T^(2 beta)) M_g + M T^2 M_f}
    """
    k = c1**2 + (M_1mb * T**beta) ** 2 / (2 * beta - 1)
    nu = 4 * M_g * l**2 * k
    lead = 1 + 8 * M * M_b * M_w * T**2
    cond32 = 7 * l**2 * lead * (8 * k * M_g + 8 * M * T**2 * M_f)
    example = 3.5 * lead * ((1 + 2 * M_1mb**2 * T ** (2 * beta)) * M_g + M * T**2 * M_f)
    return nu, cond32, example


@dataclass(frozen=True)
class HypothesisConstants:
    M: float
    M_1mb: float
    c1: float
    l: float
    M_g: float
    M_g_bar: float
    M_f: float
    M_f_bar: float
    M_b: float
    M_w: float
    sum_M_k: float
    sum_M_tilde_k: float
    nu: float
    cond32: float
    example_cond: float
    T: float
    beta: float


@dataclass
class HypothesisReport:
    constants: HypothesisConstants
    declared: dict
    empirical: dict
    verdicts: dict
    caratheodory: dict

    @property
    def all_true(self) -> bool:
        return all(self.verdicts.values())

    def as_dict(self) -> dict:
        from dataclasses import asdict
        return {
            "constants": asdict(self.constants),
            "declared": self.declared,
            "empirical": self.empirical,
            "verdicts": self.verdicts,
            "caratheodory": self.caratheodory,
        }


def _random_phi(rng, n, weight, scale=1.0) -> InitialFunction:
    terms = []
    for _ in range(rng.integers(1, 4)):
        terms.append((1.0, float(rng.uniform(0.0, 3.0)), scale * rng.standard_normal(n) / np.sqrt(n)))
    return InitialFunction(tuple(terms), n, weight=weight)


def probe_lipschitz(fmap: HistoryMap, spec: ProblemSpec, power: float,
                    n_probes: int = 48, seed: int | None = None) -> float:
    """max over random history pairs of ||(-A)^power (m(psi1) - m(psi2))||^2 / ||psi1 - psi2||^2."""
    if fmap.is_zero or not fmap.state_dependent:
        return 0.0
    rng = np.random.default_rng(spec.probe_seed if seed is None else seed)
    n = spec.n_modes
    fp = FracPower(power) if power > 0 else None
    best = 0.0
    for _ in range(n_probes):
        p1 = _random_phi(rng, n, spec.weight)
        p2 = _random_phi(rng, n, spec.weight)
        t = float(rng.uniform(0.0, spec.horizon))
        d = (p1 - p2).norm
        if d <= 0:
            continue
        s1 = History(p1, 0.0, np.array([0.0]), p1(0.0)[None, :], p1(0.0))
        s2 = History(p2, 0.0, np.array([0.0]), p2(0.0)[None, :], p2(0.0))
        diff = fmap.evaluate(t, s1, spec.basis) - fmap.evaluate(t, s2, spec.basis)
        if fp is not None:
            diff = spectral.frac_power_apply(fp, "positive", diff)
        best = max(best, float(diff @ diff) / d**2)
    return best


def _sup_at_zero(fmap, spec, power, n_t=17):
    zero = InitialFunction.zero(spec.n_modes, spec.weight)
    seg = History(zero, 0.0, np.array([0.0]), np.zeros((1, spec.n_modes)), np.zeros(spec.n_modes))
    fp = FracPower(abs(power)) if power else None
    best = 0.0
    for t in np.linspace(0.0, spec.horizon, n_t):
        v = fmap.evaluate(float(t), seg, spec.basis)
        if fp is not None:
            v = spectral.frac_power_apply(fp, "negative" if power < 0 else "positive", v)
        best = max(best, float(v @ v))
    return best


def caratheodory_profile(fmap, spec, radii=(1.0, 4.0), n_t=9, n_probes=12):
    """For each q, sup over probes with ||psi||^2 <= q of ||f(t, psi)||^2 at sampled t.

    The tabulated supremum is the fitted h_q; its integral over [0, T] must
    be finite.
    """
    rng = np.random.default_rng(spec.probe_seed + 1)
    ts = np.linspace(0.0, spec.horizon, n_t)
    out = {}
    for q in radii:
        sup = np.zeros(n_t)
        for _ in range(n_probes):
            p = _random_phi(rng, spec.n_modes, spec.weight)
            nrm = p.norm
            if nrm > 0:
                s = math.sqrt(q) / nrm
                p = InitialFunction(tuple((c * s, a, v) for c, a, v in p.terms), spec.n_modes, weight=spec.weight)
            seg = History(p, 0.0, np.array([0.0]), p(0.0)[None, :], p(0.0))
            for i, t in enumerate(ts):
                v = fmap.evaluate(float(t), seg, spec.basis)
                sup[i] = max(sup[i], float(v @ v))
        integral = float(integrate.trapezoid(sup, ts))
        out[str(q)] = {"times": ts.tolist(), "h_q": sup.tolist(), "integral": integral,
                       "finite": bool(np.isfinite(integral))}
    return out


def hypothesis_report(spec: ProblemSpec, n_probes: int = 48) -> HypothesisReport:
    beta = spec.beta.alpha
    T = spec.horizon
    M = spectral.SEMIGROUP_BOUND
    M_1mb = spectral.analytic_constant(1 - beta)
    c1 = spectral.inverse_power_bound(beta)
    l = spec.weight.l
    dec = spec.declared

    emp_g = probe_lipschitz(spec.neutral_g, spec, beta, n_probes)
    emp_f = probe_lipschitz(spec.drift_f, spec, 0.0, n_probes)
    M_g = max(dec.M_g, emp_g)
    M_f = max(dec.M_f, emp_f)
    M_g_bar = dec.M_g_bar if dec.M_g_bar is not None else _sup_at_zero(spec.neutral_g, spec, -beta)
    M_f_bar = dec.M_f_bar if dec.M_f_bar is not None else _sup_at_zero(spec.drift_f, spec, 0.0)

    B = spec.control_B
    M_b_emp = float(np.linalg.norm(B, 2) ** 2)
    M_b = max(dec.M_b, M_b_emp) if dec.M_b is not None else M_b_emp
    gram = spectral.gramian_closed_form(B, T)
    lam_min = float(np.linalg.eigvalsh(gram)[0])
    M_w_emp = math.inf if lam_min <= 0 else 1.0 / lam_min
    M_w = max(dec.M_w, M_w_emp) if dec.M_w is not None else M_w_emp

    mk = [k.lipschitz_sq() for k in spec.impulses]
    mtk = [k.bound_sq(dec.impulse_radius) for k in spec.impulses]
    if dec.M_k is not None:
        mk = [max(d, e or 0.0) for d, e in zip(dec.M_k, mk)]
    if dec.M_tilde_k is not None:
        mtk = [max(d, e or 0.0) for d, e in zip(dec.M_tilde_k, mtk)]
    sum_mk = float(sum(v if v is not None else math.inf for v in mk))
    sum_mtk = float(sum(v if v is not None else math.inf for v in mtk))

    nu, cond32, ex = controllability_constants(M, M_1mb, c1, l, M_g, M_f, M_b, M_w, T, beta)
    consts = HypothesisConstants(M, M_1mb, c1, l, M_g, M_g_bar, M_f, M_f_bar, M_b, M_w,
                                 sum_mk, sum_mtk, nu, cond32, ex, T, beta)
    carath = caratheodory_profile(spec.drift_f, spec) if spec.drift_f.state_dependent else {}
    verdicts = {
        "nu_lt_1": bool(nu < 1),
        "cond32_lt_1": bool(cond32 < 1),
        "example_condition_lt_1": bool(ex < 1),
        "caratheodory_integrable": all(v["finite"] for v in carath.values()),
    }
    return HypothesisReport(
        consts,
        declared={"M_g": dec.M_g, "M_f": dec.M_f, "M_b": dec.M_b, "M_w": dec.M_w},
        empirical={"M_g": emp_g, "M_f": emp_f, "M_b": M_b_emp, "M_w": M_w_emp,
                   "lambda_min_gramian": lam_min},
        verdicts=verdicts,
        caratheodory=carath,
    )
