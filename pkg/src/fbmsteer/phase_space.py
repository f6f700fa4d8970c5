"""Histories on (-inf, 0] and the exponentially weighted sup-norm on them.

The norm is

    ||psi|| = ∫_{-inf}^0 e^{rate s} sup_{s <= theta <= 0} |psi(theta)| ds

evaluated pathwise (the second moment of one realisation is its square).
A history is known on a finite set of sample times; the running supremum is
a right-to-left cumulative max over those samples and the weight e^{rate s}
is integrated exactly between them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

TAIL_SPAN = 40.0   # initial functions are tabulated on [-TAIL_SPAN/rate, 0]
TAIL_CELLS = 4096


@dataclass(frozen=True)
class PhaseWeight:
    rate: float = 4.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("phase weight rate must be positive")

    @property
    def l(self) -> float:
        """∫_{-inf}^0 h(s) ds."""
        return 1.0 / self.rate

    def h(self, s):
        return np.exp(self.rate * np.asarray(s, dtype=float))


def weighted_sup_integral(theta, norms, rate: float) -> float:
    """∫_{-inf}^0 e^{rate s} S(s) ds for samples (theta, norms), theta ascending to 0.

    S(s) is the max over samples at or to the right of the cell end; beyond
    the first sample S is extended by the overall max.
    """
    theta = np.asarray(theta, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if theta.size == 0:
        return 0.0
    run = np.maximum.accumulate(norms[::-1])[::-1]
    e = np.exp(rate * theta)
    cells = np.sum((e[1:] - e[:-1]) * run[1:]) / rate
    tail = run[0] * e[0] / rate
    return float(cells + tail)


@dataclass(frozen=True, eq=False)
class InitialFunction:
    """phi(s) = sum_k c_k e^{a_k s} v_k, optionally overridden by a table on [s_0, 0].

    ``terms`` is a sequence of (c, a, v) with a >= 0 and v a coefficient
    vector.  Table values are linearly interpolated.
    """

    terms: tuple
    n_modes: int
    table_times: np.ndarray | None = None
    table_values: np.ndarray | None = None
    weight: PhaseWeight = field(default_factory=PhaseWeight)

    def __post_init__(self):
        terms = []
        for c, a, v in self.terms:
            v = np.asarray(v, dtype=float).reshape(-1)
            if v.size != self.n_modes:
                raise ValueError("initial-function vector has the wrong number of modes")
            if not (a >= 0 and np.isfinite(a) and np.isfinite(c) and np.all(np.isfinite(v))):
                raise ValueError("initial-function terms need finite c, v and rate a >= 0 "
                                 "(otherwise the weighted norm diverges)")
            terms.append((float(c), float(a), v))
        object.__setattr__(self, "terms", tuple(terms))
        if self.table_times is not None:
            tt = np.asarray(self.table_times, dtype=float)
            tv = np.asarray(self.table_values, dtype=float).reshape(tt.size, self.n_modes)
            if tt[-1] != 0.0 or np.any(np.diff(tt) <= 0):
                raise ValueError("table times must increase strictly and end at 0")
            object.__setattr__(self, "table_times", tt)
            object.__setattr__(self, "table_values", tv)

    @classmethod
    def constant(cls, v, weight: PhaseWeight | None = None) -> "InitialFunction":
        v = np.asarray(v, dtype=float)
        return cls(((1.0, 0.0, v),), v.size, weight=weight or PhaseWeight())

    @classmethod
    def zero(cls, n_modes: int, weight: PhaseWeight | None = None) -> "InitialFunction":
        return cls((), n_modes, weight=weight or PhaseWeight())

    def __call__(self, s):
        """Coefficient vector(s) at time(s) s <= 0; shape (..., N)."""
        s = np.asarray(s, dtype=float)
        if np.any(s > 0):
            raise ValueError("initial function is defined on (-inf, 0]")
        out = np.zeros(s.shape + (self.n_modes,))
        for c, a, v in self.terms:
            out += c * np.exp(a * s)[..., None] * v
        if self.table_times is not None:
            inside = s >= self.table_times[0]
            if np.any(inside):
                si = s[inside]
                cols = [np.interp(si, self.table_times, self.table_values[:, n])
                        for n in range(self.n_modes)]
                out[inside] = np.stack(cols, axis=-1)
        return out

    def __sub__(self, other: "InitialFunction") -> "InitialFunction":
        terms = self.terms + tuple((-c, a, v) for c, a, v in other.terms)
        if self.table_times is None and other.table_times is None:
            return InitialFunction(terms, self.n_modes, weight=self.weight)
        tables = [f.table_times for f in (self, other) if f.table_times is not None]
        times = np.unique(np.concatenate(tables))
        values = self(times) - other(times)
        # outside the tables both operands reduce to their exponential terms
        return InitialFunction(terms, self.n_modes, times, values, self.weight)

    @cached_property
    def grid(self) -> np.ndarray:
        """Tabulation times used whenever phi enters a weighted norm."""
        span = TAIL_SPAN / self.weight.rate
        g = np.linspace(-span, 0.0, TAIL_CELLS + 1)
        if self.table_times is not None:
            g = np.union1d(g, self.table_times[self.table_times >= -span])
        return g

    @cached_property
    def grid_norms(self) -> np.ndarray:
        return np.linalg.norm(self(self.grid), axis=-1)

    @cached_property
    def norm(self) -> float:
        return weighted_sup_integral(self.grid, self.grid_norms, self.weight.rate)


@dataclass(frozen=True, eq=False)
class History:
    """Segment x_t(theta) = x(t + theta), theta <= 0.

    For t + theta <= 0 the initial function is used.  On (0, t] the record
    (rec_times, rec_values) is used: it holds every stored value in [0, t],
    with impulse nodes appearing twice (left then right value).  ``endpoint``
    is x_t(0).
    """

    phi: InitialFunction
    t: float
    rec_times: np.ndarray
    rec_values: np.ndarray
    endpoint: np.ndarray

    def __call__(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if np.any(theta > 0):
            raise ValueError("segments are defined on (-inf, 0]")
        s = self.t + theta
        out = np.empty(theta.shape + (self.phi.n_modes,))
        past = s <= 0.0
        if np.any(past):
            out[past] = self.phi(np.minimum(s[past], 0.0))
        rec = ~past
        if np.any(rec):
            out[rec] = self._record_at(s[rec])
        at_end = theta == 0.0
        out[at_end] = self.endpoint
        return out

    def _record_at(self, s):
        # duplicate times mark jumps; side='left' picks the left value at a jump
        times, vals = self.rec_times, self.rec_values
        j = np.searchsorted(times, s, side="left")
        j = np.clip(j, 1, times.size - 1)
        t0, t1 = times[j - 1], times[j]
        exact = times[j] == s
        w = np.where(t1 > t0, (s - t0) / np.where(t1 > t0, t1 - t0, 1.0), 1.0)
        out = vals[j - 1] * (1 - w)[:, None] + vals[j] * w[:, None]
        out[exact] = vals[j[exact]]
        return out

    def samples(self):
        """(theta, norms) used by the weighted norm, ascending in theta."""
        phi_theta = self.phi.grid - self.t
        rec_theta = self.rec_times - self.t
        theta = np.concatenate([phi_theta, rec_theta, [0.0]])
        norms = np.concatenate([self.phi.grid_norms,
                                np.linalg.norm(self.rec_values, axis=-1),
                                [np.linalg.norm(self.endpoint)]])
        order = np.argsort(theta, kind="stable")
        return theta[order], norms[order]

    @property
    def norm(self) -> float:
        if self.t == 0.0 and self.rec_times.size <= 1:
            return self.phi.norm
        theta, norms = self.samples()
        return weighted_sup_integral(theta, norms, self.phi.weight.rate)


def bh_norm(x) -> float:
    """Weighted sup-norm of a History or an InitialFunction."""
    return x.norm


def segment_at(traj, phi: InitialFunction, t: float, side: str = "left") -> History:
    """Segment of a trajectory at grid time t.

    ``traj`` needs ``times``, ``left`` and ``right`` arrays.  At an impulse
    node, side='left' gives x_t(0) = x(t^-) and side='right' gives x(t^+).
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    times = np.asarray(traj.times)
    if t < 0 or t > times[-1] * (1 + 1e-12):
        raise ValueError(f"t = {t} is outside the recorded horizon [0, {times[-1]}]")
    i = int(np.searchsorted(times, t - 1e-12 * max(1.0, times[-1])))
    if i >= times.size or abs(times[i] - t) > 1e-9 * max(1.0, times[-1]):
        raise ValueError(f"t = {t} is not a grid node")
    left, right = np.asarray(traj.left), np.asarray(traj.right)
    if i == 0:
        end = right[0] if side == "right" else left[0]
        return History(phi, 0.0, np.array([0.0]), left[:1].copy(), end.copy())
    # interleave left/right at earlier nodes; equal values are harmless
    rt = np.repeat(times[:i], 2)
    rv = np.empty((2 * i, left.shape[1]))
    rv[0::2] = left[:i]
    rv[1::2] = right[:i]
    rt = np.concatenate([rt, [times[i]]])
    rv = np.concatenate([rv, left[i:i + 1]])
    end = right[i] if side == "right" else left[i]
    if side == "right":
        rt = np.concatenate([rt, [times[i]]])
        rv = np.concatenate([rv, right[i:i + 1]])
    return History(phi, float(times[i]), rt, rv, end.copy())


class PhaseInequalityReport(NamedTuple):
    lhs: float
    mid: float
    rhs: float
    holds: bool


def check_phase_inequality(traj, phi: InitialFunction, t: float, side: str = "left",
                  rtol: float = 1e-10) -> PhaseInequalityReport:
    """l |x(t)| <= ||x_t|| <= l sup_{0<=s<=t} |x(s)| + ||x_0||."""
    seg = segment_at(traj, phi, t, side)
    l = phi.weight.l
    lhs = l * float(np.linalg.norm(seg.endpoint))
    mid = seg.norm
    past = np.concatenate([np.linalg.norm(seg.rec_values, axis=-1),
                           [np.linalg.norm(seg.endpoint)]])
    rhs = l * float(past.max()) + phi.norm
    scale = max(rhs, 1e-300)
    holds = lhs <= mid + rtol * scale and mid <= rhs + rtol * scale
    return PhaseInequalityReport(lhs, mid, rhs, bool(holds))


check_lemma24 = check_phase_inequality  # contract name


def bdi_seminorm(traj, phi: InitialFunction) -> float:
    """||x_0|| + sup_{0<=t<=T} |x(t)| over a simulated trajectory (diagnostic only)."""
    vals = np.concatenate([np.linalg.norm(traj.left, axis=-1),
                           np.linalg.norm(traj.right, axis=-1)])
    return phi.norm + float(vals.max())
