"""Evolution operators of x' = A(t) x on a finite window.

The operator is stored as a chain of per-step local propagators
M_i = Phi(t_{i+1}, t_i) produced by an embedded Dormand-Prince 5(4) pair on
the matrix ODE.  Phi(t, s) for arbitrary t, s is assembled from ordered
products of the local factors (with short fresh integrations for off-grid
endpoints).  Long-window products of well-conditioned local factors keep the
relative error at roughly N * eps * cond(M_local); forming the global
Phi(t, T_min) and inverting it would instead lose exp(spread * window) digits
for strongly dichotomic systems, which is why that route is avoided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import IntegrationError, WindowError

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])

_MAX_CHECKPOINT_SPACING = 0.125  # at least 8 checkpoints per unit time
_BLOWUP_LOG_NORM = math.log(1e150)
_MIN_STEP = 1e-12


def _dp_step(a_func, t, h, y):
    """One DP45 step of Y' = A(t) Y from Y = y; returns (y5, error_estimate)."""
    k = [None] * 7
    k[0] = a_func(t) @ y
    for i in range(1, 7):
        acc = y + h * sum(c * k[j] for j, c in enumerate(_DP_A[i]))
        k[i] = a_func(t + _DP_C[i] * h) @ acc
    y5 = y + h * sum(b * k[i] for i, b in enumerate(_DP_B5) if b)
    y4 = y + h * sum(b * k[i] for i, b in enumerate(_DP_B4) if b)
    err = np.max(np.abs(y5 - y4))
    return y5, err


def _integrate_segment(a_func, n, t0, t1, tol):
    """Propagator Phi(t1, t0) for t1 >= t0 by adaptive DP45 from the identity."""
    if t1 < t0:
        raise ValueError("segment must run forward")
    y = np.eye(n)
    if t1 == t0:
        return y, 0.0
    t = t0
    h = min(_MAX_CHECKPOINT_SPACING, t1 - t0)
    worst = 0.0
    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        y_new, err = _dp_step(a_func, t, h, y)
        scale = tol * max(1.0, float(np.max(np.abs(y))))
        if err <= scale:
            t += h
            y = y_new
            worst = max(worst, err)
            if err > 0:
                h = min(h * min(5.0, 0.9 * (scale / err) ** 0.2), _MAX_CHECKPOINT_SPACING)
        else:
            h *= max(0.2, 0.9 * (scale / err) ** 0.2)
        if h < _MIN_STEP:
            raise IntegrationError(f"step-size underflow at t={t}")
    return y, worst


@dataclass
class EvolutionOperator:
    """Numerically integrated Phi(t, s) over a window, stored as a step chain."""

    a_func: object            # callable t -> (n, n) ndarray
    dimension: int
    t_min: float
    t_max: float
    tol: float
    times: np.ndarray         # checkpoint grid, times[0] = t_min, times[-1] = t_max
    steps: np.ndarray         # steps[i] = Phi(times[i+1], times[i])
    step_errors: np.ndarray

    def __post_init__(self):
        self._index = {round(float(t), 12): i for i, t in enumerate(self.times)}

    # -- checkpoint helpers -------------------------------------------------

    def checkpoint_index(self, t):
        return self._index.get(round(float(t), 12))

    def _require_window(self, t):
        if t < self.t_min - 1e-9 or t > self.t_max + 1e-9:
            raise WindowError(f"t={t} outside window [{self.t_min}, {self.t_max}]")

    def _forward(self, s, t):
        """Phi(t, s) for t >= s via the chain plus fresh end segments."""
        n = self.dimension
        if t - s < 1e-14:
            return np.eye(n)
        i = int(np.searchsorted(self.times, s + 1e-12)) - 1
        j = int(np.searchsorted(self.times, t + 1e-12)) - 1
        i = max(i, 0)
        j = max(j, 0)
        if i == j:
            return _integrate_segment(self.a_func, n, s, t, self.tol)[0]
        if abs(self.times[i] - s) < 1e-12:
            result = np.eye(n)
            start = i
        else:
            result = _integrate_segment(self.a_func, n, s, self.times[i + 1], self.tol)[0]
            start = i + 1
        for k in range(start, j):
            result = self.steps[k] @ result
        if abs(self.times[j] - t) > 1e-12:
            result = _integrate_segment(self.a_func, n, self.times[j], t, self.tol)[0] @ result
        return result

    def propagate(self, t, s):
        """Phi(t, s); the backward direction solves against the forward product."""
        self._require_window(t)
        self._require_window(s)
        if abs(t - s) < 1e-14:
            return np.eye(self.dimension)
        if t > s:
            return self._forward(s, t)
        forward = self._forward(t, s)  # Phi(s, t)
        return np.linalg.solve(forward, np.eye(self.dimension))

    def shifted_steps(self, gamma):
        """Local factors of the gamma-shifted system: exp(-gamma h_i) * M_i."""
        h = np.diff(self.times)
        return np.exp(-gamma * h)[:, None, None] * self.steps

    def shift(self, gamma):
        return ShiftedOperator(self, gamma)

    @property
    def window(self):
        return (self.t_min, self.t_max)


@dataclass
class ShiftedOperator:
    """Evolution operator of x' = (A(t) - gamma I) x, derived from a base operator."""

    base: EvolutionOperator
    gamma: float

    def propagate(self, t, s):
        return math.exp(-self.gamma * (t - s)) * self.base.propagate(t, s)

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def window(self):
        return self.base.window

    def shift(self, gamma):
        """Composing shifts adds them on the same base operator."""
        return ShiftedOperator(self.base, self.gamma + gamma)


def build_evolution(spec_or_func, window, tol=1e-9, dimension=None):
    """Integrate the matrix ODE over `window` into an EvolutionOperator.

    Accepts either a SystemSpec or a bare callable t -> matrix (then
    `dimension` is required).  Checkpoints are the accepted integrator steps,
    capped at spacing 1/8 so downstream grids stay dense.
    """
    t0, t1 = float(window[0]), float(window[1])
    if not t0 < t1:
        raise WindowError(f"window must satisfy T_min < T_max, got [{t0}, {t1}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if callable(spec_or_func) and dimension is not None:
        a_func, n = spec_or_func, dimension
    else:
        spec = spec_or_func
        n = spec.dimension
        a_func = spec.matrix

    times = [t0]
    steps = []
    errors = []
    t = t0
    h = _MAX_CHECKPOINT_SPACING
    log_norm = 0.0
    while t < t1 - 1e-12:
        h = min(h, t1 - t, _MAX_CHECKPOINT_SPACING)
        m, err = _dp_step(a_func, t, h, np.eye(n))
        scale = tol * max(1.0, float(np.max(np.abs(m))))
        if err <= scale:
            t = t1 if t1 - (t + h) < 1e-12 else t + h
            times.append(t)
            steps.append(m)
            errors.append(err)
            log_norm += math.log(max(float(np.linalg.norm(m, 2)), 1e-300))
            if log_norm > _BLOWUP_LOG_NORM:
                raise IntegrationError(
                    f"norm of Phi(t, T_min) exceeds 1e150 near t={t} (blow-up guard)"
                )
            if err > 0:
                h = min(h * min(5.0, 0.9 * (scale / err) ** 0.2), _MAX_CHECKPOINT_SPACING)
        else:
            h *= max(0.2, 0.9 * (scale / err) ** 0.2)
            if h < _MIN_STEP:
                raise IntegrationError(f"step-size underflow at t={t} (stiff or blowing up)")

    return EvolutionOperator(
        a_func=a_func,
        dimension=n,
        t_min=t0,
        t_max=t1,
        tol=tol,
        times=np.array(times),
        steps=np.array(steps),
        step_errors=np.array(errors),
    )


def propagate(ev, t, s):
    return ev.propagate(t, s)


def shift(ev, gamma):
    return ev.shift(gamma)


def cocycle_defect(ev, n_samples=50, seed=0):
    """Max of ||Phi(t,s)Phi(s,tau) - Phi(t,tau)|| over random checkpoint triples."""
    rng = np.random.default_rng(seed)
    times = ev.times
    worst = 0.0
    for _ in range(n_samples):
        t, s, tau = (float(times[i]) for i in rng.integers(0, len(times), size=3))
        lhs = ev.propagate(t, s) @ ev.propagate(s, tau)
        rhs = ev.propagate(t, tau)
        denom = max(1.0, float(np.linalg.norm(rhs, 2)))
        worst = max(worst, float(np.linalg.norm(lhs - rhs, 2)) / denom)
    return worst


def liouville_defect(ev, n_samples=20, seed=0):
    """Relative defect of det Phi(t,s) against exp(int_s^t trace A), by quadrature.

    The trace integral uses adaptive Gauss-Kronrod, independent of the RK chain.
    """
    rng = np.random.default_rng(seed)
    times = ev.times
    trace = lambda u: float(np.trace(ev.a_func(u)))
    worst = 0.0
    for _ in range(n_samples):
        t, s = (float(times[i]) for i in rng.integers(0, len(times), size=2))
        det = float(np.linalg.det(ev.propagate(t, s)))
        integral, _ = quad(trace, s, t, limit=200)
        ref = math.exp(integral)
        worst = max(worst, abs(det - ref) / max(abs(ref), 1e-300))
    return worst


def dump_checkpoints_csv(ev, path):
    """Write the checkpoint chain: columns t then row-major Phi(t_i, t_min)."""
    n = ev.dimension
    with open(path, "w", encoding="utf-8") as fh:
        header = ["t"] + [f"phi_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
        fh.write(",".join(header) + "\n")
        acc = np.eye(n)
        fh.write(",".join([repr(float(ev.times[0]))] + [repr(float(v)) for v in acc.ravel()]) + "\n")
        for i, m in enumerate(ev.steps):
            acc = m @ acc
            row = [repr(float(ev.times[i + 1]))] + [repr(float(v)) for v in acc.ravel()]
            fh.write(",".join(row) + "\n")
