"""Minimum-norm steering through the controllability Gramian.

The control is piecewise constant on the solver grid.  On that grid the map
W: u -> ∫_0^T S(T - s) B u(s) ds is exactly

    W u = sum_j diag(w_j) B u_j,      w_j = per-mode cell weight to T,

so its minimum-energy right inverse uses the grid Gramian
Gamma_d = (B B^T) o (sum_j w_j w_j^T) / dt, which tends to the closed-form
Gramian as dt -> 0.  Steering is pathwise: the realised noise is known over
[0, T] when the control is computed, as in the fixed-point construction it
mirrors; this is not a causal feedback law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .model import ProblemSpec
from .solver import Grid, Trajectory, _noise_increments, simulate_mild


@dataclass(frozen=True)
class ControlSignal:
    """u on the grid; value j is held on [s_j, s_{j+1})."""

    times: np.ndarray
    values: np.ndarray
    regularized: bool = False
    unreachable: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def cumulative_energy(self) -> np.ndarray:
        cell = np.sum(self.values[:-1] ** 2, axis=1) * np.diff(self.times)
        return np.concatenate([[0.0], np.cumsum(cell)])

    @property
    def energy(self) -> float:
        return float(self.cumulative_energy[-1])

    @classmethod
    def zero(cls, grid: Grid, n_modes: int) -> "ControlSignal":
        return cls(grid.times, np.zeros((grid.times.size, n_modes)))


@dataclass(frozen=True)
class Gramian:
    matrix: np.ndarray          # closed-form continuous Gramian
    discrete: np.ndarray        # grid-consistent Gramian used for steering
    weights: np.ndarray         # (J, N) cell weights to T
    control_B: np.ndarray
    dt: float
    epsilon: float = 0.0        # ridge actually applied (0 when none)
    condition: float = np.inf
    regularized: bool = False


def terminal_weights(n_modes: int, grid: Grid) -> np.ndarray:
    """w[j, n] = ∫_{s_j}^{s_{j+1}} e^{-n^2 (T - s)} ds."""
    decay, w_s, _ = spectral.cell_weights(n_modes, grid.dt)
    J = grid.n_steps
    powers = np.arange(J - 1, -1, -1)[:, None]
    return w_s * decay[None, :] ** powers


def gramian(spec: ProblemSpec, grid: Grid, epsilon: float = 1e-12) -> Gramian:
    """Closed-form and grid Gramians; ridge ``epsilon * trace/N`` if near singular."""
    n = spec.n_modes
    B = spec.control_B
    cont = spectral.gramian_closed_form(B, spec.horizon)
    W = terminal_weights(n, grid)
    disc = (B @ B.T) * (W.T @ W) / grid.dt
    disc = 0.5 * (disc + disc.T)
    ev = np.linalg.eigvalsh(disc)
    tr = float(np.trace(disc))
    ridge = 0.0
    if tr > 0 and ev[0] <= epsilon * tr / n:
        ridge = epsilon * tr / n
    lo = ev[0] + ridge
    cond = float(ev[-1] + ridge) / lo if lo > 0 else np.inf
    return Gramian(cont, disc, W, B, grid.dt, ridge, cond, ridge > 0)


def min_norm_control(gram: Gramian, rho, grid: Grid) -> ControlSignal:
    """Smallest-energy piecewise-constant control with W u = rho.

    u_j = B^T (w_j / dt o lambda) with Gamma_d lambda = rho; the last node
    carries the limiting value B^T lambda.  When the Gramian was ridged, or
    is zero, the part of rho that cannot be reached is returned in
    ``unreachable``.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    if not np.any(rho):
        return ControlSignal(grid.times, np.zeros((grid.times.size, n)), gram.regularized, np.zeros(n))
    G = gram.discrete
    if not np.any(G):
        lam = np.zeros(n)
    elif gram.regularized:
        lam = np.linalg.solve(G + gram.epsilon * np.eye(n), rho)
    else:
        lam = np.linalg.solve(G, rho)
    unreachable = rho - G @ lam
    coeff = gram.weights / grid.dt * lam          # (J, N)
    vals = np.vstack([coeff, lam[None, :]]) @ gram.control_B
    return ControlSignal(grid.times, vals, gram.regularized, unreachable)


def control_convolution(spec: ProblemSpec, u, grid: Grid) -> np.ndarray:
    """∫_0^T S(T - s) B u(s) ds for a piecewise-constant control."""
    vals = np.asarray(getattr(u, "values", u), dtype=float)
    W = terminal_weights(spec.n_modes, grid)
    return np.sum(W * (vals[:-1] @ spec.control_B.T), axis=0)


def steering_residual(spec: ProblemSpec, traj: Trajectory, noise, x1, grid: Grid | None = None) -> np.ndarray:
    """The part of x1 that the control convolution has to produce.

    Built term by term from the trajectory's recorded g, f and jump values:
    x1 - S(T)(phi(0) - g(0, phi)) - g(T, x_T) - sum w_AS g_j - sum w_S f_j
       - noise convolution - sum_k S(T - t_k) I_k(x(t_k^-)).
    """
    n = spec.n_modes
    if grid is None:
        grid = Grid.for_spec(spec, float(traj.times[1] - traj.times[0]))
    lam = spectral.eigenvalues(n)
    T = float(grid.times[-1])
    decay, w_s, w_as = spectral.cell_weights(n, grid.dt)
    J = grid.n_steps
    powers = np.arange(J - 1, -1, -1)[:, None]
    prop = decay[None, :] ** powers                   # e^{-n^2 (T - s_{j+1})}
    g, f = traj.g_values, traj.f_values
    free = np.exp(-lam * T) * (spec.phi(0.0) - g[0])
    memory = np.sum(prop * (w_as * g[:-1] + w_s * f[:-1]), axis=0)
    dB, _ = _noise_increments(spec, noise, grid)
    sig = spec.sigma_values(grid.times[:-1])
    stoch = np.sum(prop * decay * sig * dB, axis=0)
    jumps = np.sum(prop * decay * traj.jumps[:-1], axis=0)
    return np.asarray(x1, dtype=float) - (free + g[-1] + memory + stoch + jumps)


@dataclass
class SteeringResult:
    u: ControlSignal
    traj: Trajectory
    terminal_error_sq: float
    outer_iters: int
    error_history: list = field(default_factory=list)
    converged: bool = True
    regularized: bool = False
    unreachable: np.ndarray | None = None

    @property
    def energy(self) -> float:
        return self.u.energy


class SteeringDivergence(RuntimeError):
    def __init__(self, result: SteeringResult):
        super().__init__(f"steering did not reach tolerance in {result.outer_iters} outer "
                         f"iterations; error history {result.error_history}")
        self.result = result


def steer(spec: ProblemSpec, x1, noise, grid: Grid, steer_tol: float = 1e-10,
          max_outer: int = 20, gram: Gramian | None = None, inner_tol: float = 1e-13,
          max_inner: int = 200, epsilon: float = 1e-12, backend: str | None = None) -> SteeringResult:
    """Outer loop u <- W^-1 rho(x), x <- simulate(u) until |x(T) - x1|^2 < steer_tol."""
    x1 = np.asarray(x1, dtype=float)
    gram = gram or gramian(spec, grid, epsilon)
    u = ControlSignal.zero(grid, spec.n_modes)
    traj = simulate_mild(spec, u, noise, grid, inner_tol, max_inner, backend)
    history = []
    err = np.inf
    for k in range(1, max_outer + 1):
        rho = steering_residual(spec, traj, noise, x1, grid)
        u = min_norm_control(gram, rho, grid)
        traj = simulate_mild(spec, u, noise, grid, inner_tol, max_inner, backend)
        d = traj.terminal - x1
        err = float(d @ d)
        history.append(err)
        if err < steer_tol:
            return SteeringResult(u, traj, err, k, history, True, u.regularized, u.unreachable)
    result = SteeringResult(u, traj, err, max_outer, history, False, u.regularized, u.unreachable)
    raise SteeringDivergence(result)
