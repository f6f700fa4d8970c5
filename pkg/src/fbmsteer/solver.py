"""Time stepping of the mild formula and the global Picard iteration.

On a uniform grid s_i = i dt, per mode n (decay = e^{-n^2 dt}):

    x(s_i) = e^{-n^2 s_i}(phi(0) - g(0, phi)) + g(s_i, x_{s_i}) + acc_i + conv_i

where acc collects the left-point sums of g (against A S), f and the
impulses, and conv the control and noise convolutions.  All convolution
weights are exact exponential integrals, so the only approximation is
holding g, f, u and sigma constant on each cell.  g(s_i, x_{s_i}) depends on
x(s_i) itself and is resolved by a fixed-point iteration at every node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend, spectral
from .model import ExpMemoryMap, GenericStream, ProblemSpec, ZeroMap
from .phase_space import History


class NeutralNonContraction(RuntimeError):
    """The implicit neutral term could not be resolved at some node."""

    def __init__(self, node: int, time: float, quotient: float):
        super().__init__(f"neutral fixed point failed at node {node} (t = {time:.6g}); "
                         f"observed contraction quotient {quotient:.4g}")
        self.node, self.time, self.quotient = node, time, quotient


@dataclass(frozen=True)
class Grid:
    times: np.ndarray
    dt: float
    impulse_nodes: tuple
    impulse_shift: tuple = ()  # snapped minus requested impulse time

    @classmethod
    def uniform(cls, horizon: float, dt: float, impulse_times=()) -> "Grid":
        n = int(round(horizon / dt))
        if n < 1 or abs(n * dt - horizon) > 1e-9 * horizon:
            raise ValueError("dt must divide the horizon")
        times = np.arange(n + 1) * (horizon / n)
        dt = horizon / n
        nodes, shifts = [], []
        for t in impulse_times:
            k = int(round(t / dt))
            if not 0 < k < n:
                raise ValueError(f"impulse at {t} does not snap to an interior node")
            nodes.append(k)
            shifts.append(times[k] - t)
        if len(set(nodes)) != len(nodes):
            raise ValueError("two impulses snap to the same node; refine dt")
        return cls(times, dt, tuple(nodes), tuple(shifts))

    @classmethod
    def for_spec(cls, spec: ProblemSpec, dt: float) -> "Grid":
        return cls.uniform(spec.horizon, dt, [k.time for k in spec.impulses])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node values of one solution; ``left``/``right`` differ only at impulses."""

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    g_values: np.ndarray
    f_values: np.ndarray
    jumps: np.ndarray
    control: np.ndarray
    noise_seed: int | None
    impulse_nodes: tuple
    phi0: np.ndarray = field(repr=False, default=None)

    @property
    def terminal(self) -> np.ndarray:
        return self.left[-1]

    @property
    def y(self) -> np.ndarray:
        """Free evolution S(t) phi(0)."""
        lam = spectral.eigenvalues(self.left.shape[1])
        return np.exp(-np.outer(self.times, lam)) * self.phi0

    @property
    def z(self) -> np.ndarray:
        return self.left - self.y


def _control_values(u, grid: Grid, n: int) -> np.ndarray:
    if u is None:
        return np.zeros((grid.times.size, n))
    vals = getattr(u, "values", u)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (grid.times.size, n):
        raise ValueError(f"control must have shape {(grid.times.size, n)}")
    return vals


def _noise_increments(spec: ProblemSpec, noise, grid: Grid):
    n = spec.n_modes
    if noise is None:
        return np.zeros((grid.n_steps, n)), None
    ng = noise.grid
    if ng.size != grid.times.size:
        factor = (ng.size - 1) // grid.n_steps
        if factor < 1 or factor * grid.n_steps != ng.size - 1:
            raise ValueError("noise grid incompatible with the solver grid")
        noise = noise.subsample(factor)
    if not np.allclose(noise.grid, grid.times, rtol=0, atol=1e-12 * grid.times[-1]):
        raise ValueError("noise grid does not match the solver grid")
    return noise.increments, noise.master_seed


def linear_part(spec: ProblemSpec, u_vals, dB, grid: Grid, g0) -> np.ndarray:
    """State-independent part of the mild formula at every node."""
    n = spec.n_modes
    decay, w_s, _ = spectral.cell_weights(n, grid.dt)
    lam = spectral.eigenvalues(n)
    sig = spec.sigma_values(grid.times[:-1])
    data = w_s * (u_vals[:-1] @ spec.control_B.T) + decay * sig * dB
    conv = _backend.core.exp_scan(decay, data)
    free = np.exp(-np.outer(grid.times, lam)) * (spec.phi(0.0) - g0)
    return free + conv


def _kernel_route(spec: ProblemSpec) -> bool:
    maps_ok = all(isinstance(m, (ExpMemoryMap, ZeroMap)) for m in (spec.neutral_g, spec.drift_f))
    return maps_ok and all(k.kernel_eligible for k in spec.impulses)


def _kernel_arrays(spec: ProblemSpec, dt: float):
    b = spec.basis
    M = b.n_points
    on = np.zeros(2, dtype=np.int_)
    amp = np.zeros((2, M))
    kap = np.ones(2)
    code = np.zeros(2, dtype=np.int_)
    r0 = np.zeros((2, M))
    w = np.zeros((2, 2))
    for s, m in enumerate((spec.neutral_g, spec.drift_f)):
        if isinstance(m, ExpMemoryMap):
            on[s] = 1
            amp[s] = m.amp_points(b)
            kap[s] = m.rate
            code[s] = m.code
            r0[s] = m.tail_integral(spec.phi, b)
            w[s] = spectral.exp_trapezoid_weights(m.rate, dt)
    return on, amp, kap, code, r0, w


def simulate_mild(spec: ProblemSpec, u, noise, grid: Grid, inner_tol: float = 1e-13,
                  max_inner: int = 200, backend: str | None = None,
                  force_generic: bool = False) -> Trajectory:
    """Integrate the mild formula for one control and one noise realisation."""
    n = spec.n_modes
    if tuple(grid.impulse_nodes) != tuple(Grid.for_spec(spec, grid.dt).impulse_nodes):
        raise ValueError("grid impulse nodes do not match the spec")
    u_vals = _control_values(u, grid, n)
    dB, seed = _noise_increments(spec, noise, grid)
    seg0 = spec.phi_segment()
    g0 = spec.g(0.0, seg0)
    lin = linear_part(spec, u_vals, dB, grid, g0)
    decay, w_s, w_as = spectral.cell_weights(n, grid.dt)
    x0 = spec.phi(0.0)

    if _kernel_route(spec) and not force_generic:
        core = _backend.get(backend)
        on, amp, kap, code, r0, w = _kernel_arrays(spec, grid.dt)
        imps = spec.impulses
        left, right, gv, fv, status, quot = core.memory_sweep(
            lin, decay, w_as, w_s, spec.basis.synth, spec.basis.analysis,
            on, amp, kap, code, r0, w,
            np.array(grid.impulse_nodes, dtype=np.int_),
            np.array([k.gain for k in imps], dtype=float),
            np.array([k.code for k in imps], dtype=np.int_),
            x0, grid.dt, inner_tol, max_inner,
        )
        if status:
            node = status - 1
            raise NeutralNonContraction(node, float(grid.times[node]), float(quot))
        jumps = right - left
    else:
        left, right, gv, fv, jumps = _generic_sweep(spec, lin, grid, decay, w_s, w_as,
                                                    inner_tol, max_inner)
    return Trajectory(grid.times, left, right, gv, fv, jumps, u_vals, seed,
                      tuple(grid.impulse_nodes), x0.copy())


def _generic_sweep(spec, lin, grid, decay, w_s, w_as, inner_tol, max_inner):
    n = spec.n_modes
    J = grid.n_steps
    b = spec.basis
    gs = spec.neutral_g.stream(spec.phi, b, grid.dt)
    fs = spec.drift_f.stream(spec.phi, b, grid.dt)
    record = GenericStream(None, spec.phi, b)  # only used to build segments for impulses
    imp_at = {node: k for k, node in enumerate(grid.impulse_nodes)}
    left = np.zeros((J + 1, n))
    right = np.zeros((J + 1, n))
    gv = np.zeros((J + 1, n))
    fv = np.zeros((J + 1, n))
    jumps = np.zeros((J + 1, n))
    acc = np.zeros(n)
    for i in range(J + 1):
        t = float(grid.times[i])
        base = lin[i] + acc
        if i == 0:
            x = spec.phi(0.0)
            g = gs.peek(t, x)
        else:
            x, g = _neutral_solve(gs, t, base, right[i - 1], inner_tol, max_inner, i)
        gv[i] = g
        left[i] = x
        fv[i] = fs.peek(t, x)
        if i in imp_at:
            imp = spec.impulses[imp_at[i]]
            seg = record.segment(t, x) if imp.history_map is not None else None
            jumps[i] = imp(x, b, seg)
        right[i] = left[i] + jumps[i]
        gs.commit(t, left[i], right[i])
        fs.commit(t, left[i], right[i])
        record.commit(t, left[i], right[i])
        acc = decay * acc + w_as * gv[i] + w_s * fv[i] + decay * jumps[i]
    return left, right, gv, fv, jumps


def _neutral_solve(stream, t, base, start, tol, max_inner, node):
    x = np.array(start, dtype=float)
    last, quot = -1.0, 0.0
    for _ in range(max_inner):
        g = stream.peek(t, x)
        x_new = base + g
        diff = float(np.linalg.norm(x_new - x))
        if last > 0:
            quot = diff / last
        last = diff
        x = x_new
        if diff <= tol * (1 + np.linalg.norm(x)):
            return x, g
    x = np.array(start, dtype=float)
    for _ in range(max_inner):
        res = base + stream.peek(t, x) - x
        x = x + 0.5 * res
        if np.linalg.norm(res) <= tol * (1 + np.linalg.norm(x)):
            g = stream.peek(t, x)
            return base + g, g
    raise NeutralNonContraction(node, t, quot)


# ------------------------------------------------------------------ Picard

class PicardDivergence(RuntimeError):
    def __init__(self, diagnostics: "PicardDiagnostics"):
        r = diagnostics.contraction_ratios
        super().__init__(f"Picard iteration did not converge in {len(diagnostics.sup_distances)} "
                         f"steps; last ratio {r[-1] if r else float('nan'):.4g}")
        self.diagnostics = diagnostics


@dataclass
class PicardDiagnostics:
    sup_distances: list
    contraction_ratios: list
    iterations: int = 0
    converged: bool = False
    diverging: bool = False
    iterates: list = field(default_factory=list, repr=False)


def _apply_operator(spec, prev: Trajectory, lin, grid, decay, w_s, w_as, u_vals, seed):
    """One application of the mild-formula map with every state-dependent term
    evaluated on ``prev``."""
    n = spec.n_modes
    b = spec.basis
    gs = spec.neutral_g.stream(spec.phi, b, grid.dt)
    fs = spec.drift_f.stream(spec.phi, b, grid.dt)
    record = GenericStream(None, spec.phi, b)
    imp_at = {node: k for k, node in enumerate(grid.impulse_nodes)}
    J = grid.n_steps
    gv = np.zeros((J + 1, n))
    fv = np.zeros((J + 1, n))
    jumps = np.zeros((J + 1, n))
    for i in range(J + 1):
        t = float(grid.times[i])
        xl, xr = prev.left[i], prev.right[i]
        gv[i] = gs.peek(t, xl)
        fv[i] = fs.peek(t, xl)
        if i in imp_at:
            imp = spec.impulses[imp_at[i]]
            seg = record.segment(t, xl) if imp.history_map is not None else None
            jumps[i] = imp(xl, b, seg)
        gs.commit(t, xl, xr)
        fs.commit(t, xl, xr)
        record.commit(t, xl, xr)
    data = (w_as * gv + w_s * fv + decay * jumps)[:-1]
    acc = _backend.core.exp_scan(decay, data)
    left = lin + gv + acc
    left[0] = spec.phi(0.0)
    right = left + jumps
    return Trajectory(grid.times, left, right, gv, fv, jumps, u_vals, seed,
                      tuple(grid.impulse_nodes), left[0].copy())


def picard_solve(spec: ProblemSpec, u, noise, grid: Grid, tol: float = 1e-10,
                 max_iter: int = 50, keep_iterates: bool = False):
    """Global fixed-point iteration x^(k+1) = Pi(x^(k)) from x^(0)(t) = S(t) phi(0).

    Returns ``(trajectory, diagnostics)``.  ``diagnostics.iterations`` is the
    index k of the first iterate confirmed fixed, i.e. ||x^(k+1) - x^(k)|| < tol.
    """
    n = spec.n_modes
    u_vals = _control_values(u, grid, n)
    dB, seed = _noise_increments(spec, noise, grid)
    g0 = spec.g(0.0, spec.phi_segment())
    lin = linear_part(spec, u_vals, dB, grid, g0)
    decay, w_s, w_as = spectral.cell_weights(n, grid.dt)
    lam = spectral.eigenvalues(n)
    x0 = spec.phi(0.0)
    y = np.exp(-np.outer(grid.times, lam)) * x0
    cur = Trajectory(grid.times, y, y.copy(), np.zeros_like(y), np.zeros_like(y), np.zeros_like(y),
                     u_vals, seed, tuple(grid.impulse_nodes), x0.copy())
    diag = PicardDiagnostics([], [])
    if keep_iterates:
        diag.iterates.append(cur)
    for k in range(1, max_iter + 1):
        nxt = _apply_operator(spec, cur, lin, grid, decay, w_s, w_as, u_vals, seed)
        d = float(max(np.max(np.linalg.norm(nxt.left - cur.left, axis=1)),
                      np.max(np.linalg.norm(nxt.right - cur.right, axis=1))))
        if diag.sup_distances and diag.sup_distances[-1] > 0:
            diag.contraction_ratios.append(d / diag.sup_distances[-1])
        diag.sup_distances.append(d)
        if keep_iterates:
            diag.iterates.append(nxt)
        if not np.isfinite(d) or d > 1e150:
            diag.diverging = True
            raise PicardDivergence(diag)
        if d < tol:
            diag.iterations = k - 1
            diag.converged = True
            return nxt, diag
        cur = nxt
    r, d = diag.contraction_ratios, diag.sup_distances
    # diverging: still expanding, or ended farther apart than it started
    diag.diverging = bool((r and r[-1] >= 1.0) or d[-1] > d[0])
    raise PicardDivergence(diag)
