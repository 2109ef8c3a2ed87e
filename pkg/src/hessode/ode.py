"""Explicit Runge-Kutta integration over flat float64 state vectors.

Two methods are provided: classic fixed-step RK4 and the adaptive
Dormand-Prince 5(4) embedded pair.  Both integrate forward or backward in
time (t1 < t0 simply runs with negative steps).  Systems are described by
an :class:`OdeSystem`, which carries the rate function together with
first- and second-derivative contraction callables; missing contractions
are filled in with central-difference fallbacks so downstream code can
always rely on all four being present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, MaxStepsExceeded, NonFiniteState
from . import backend as _backend

__all__ = [
    "OdeSystem",
    "IntegratorConfig",
    "IntegratorMethod",
    "Trajectory",
    "integrate",
    "reverse_check",
]


class IntegratorMethod(Enum):
    RK4_FIXED = "rk4"
    RK45_ADAPTIVE = "rk45"


def _as_method(m) -> IntegratorMethod:
    if isinstance(m, IntegratorMethod):
        return m
    return IntegratorMethod(str(m).lower())


@dataclass(frozen=True)
class OdeSystem:
    """An autonomous-or-not first order ODE with derivative contractions.

    f(t, y)        -> dy/dt, length ``dim``
    jvp(y, v)      -> F'(y) v            (directional derivative of f)
    vjp(y, s)      -> s . F'(y)          (co-vector contraction; the costate
                                          workhorse -- never assembles the
                                          full Jacobian for built-in systems)
    sovjp(y, a, b) -> a_m b_i d2F_m/dy_i dy_j  (vector over j)

    Any of jvp/vjp/sovjp may be omitted; finite-difference fallbacks are
    installed at construction time.
    """

    dim: int
    f: Callable[[float, np.ndarray], np.ndarray]
    jvp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    vjp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    sovjp: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    # Optional compiled kernel backing this system (see hessode.backend).
    kernel: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise DimensionMismatch(f"dim must be positive, got {self.dim}")
        if self.jvp is None:
            object.__setattr__(self, "jvp", _fd_jvp(self.f))
        if self.vjp is None:
            object.__setattr__(self, "vjp", _fd_vjp(self.dim, self.jvp))
        if self.sovjp is None:
            object.__setattr__(self, "sovjp", _fd_sovjp(self.vjp))


def _fd_jvp(f, eps0=1e-7):
    def jvp(y, v):
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        eps = eps0 * max(1.0, float(np.max(np.abs(y)))) / max(1.0, float(np.max(np.abs(v))))
        return (f(0.0, y + eps * v) - f(0.0, y - eps * v)) / (2.0 * eps)

    return jvp


def _fd_vjp(dim, jvp):
    # Column-by-column Jacobian assembly; dim jvp calls.  Test-only path for
    # the built-in systems, which all ship analytic vjp.
    def vjp(y, s):
        y = np.asarray(y, dtype=float)
        s = np.asarray(s, dtype=float)
        cols = np.empty((dim, dim))
        e = np.zeros(dim)
        for k in range(dim):
            e[k] = 1.0
            cols[:, k] = jvp(y, e)
            e[k] = 0.0
        return s @ cols

    return vjp


def _fd_sovjp(vjp, eps0=1e-5):
    def sovjp(y, a, b):
        y = np.asarray(y, dtype=float)
        b = np.asarray(b, dtype=float)
        eps = eps0 * max(1.0, float(np.max(np.abs(y)))) / max(1.0, float(np.max(np.abs(b))))
        return (vjp(y + eps * b, a) - vjp(y - eps * b, a)) / (2.0 * eps)

    return sovjp


@dataclass(frozen=True)
class IntegratorConfig:
    method: IntegratorMethod = IntegratorMethod.RK45_ADAPTIVE
    step: float = 1e-3          # fixed-step size, or initial adaptive step
    rtol: float = 1e-10
    atol: float = 1e-10
    max_steps: int = 1_000_000
    dense_samples: int = 0      # 0 = endpoint only

    def __post_init__(self):
        object.__setattr__(self, "method", _as_method(self.method))
        if not (0.0 < self.rtol < 1.0) or not (0.0 < self.atol < 1.0):
            raise ValueError("rtol and atol must lie in (0, 1)")
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.dense_samples < 0:
            raise ValueError("dense_samples must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # shape (len(times), dim)
    endpoint: np.ndarray
    n_accepted: int
    n_rejected: int


# Dormand-Prince 5(4) tableau.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# b5 - b4: contraction with the stages gives the embedded error estimate.
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_MIN_STEP_FRACTION = 1e-14


def _hermite(t, t0, h, y0, y1, f0, f1):
    """Cubic Hermite value at t on the step [t0, t0+h]."""
    th = (t - t0) / h
    u = th * (th - 1.0)
    return ((1.0 - th) * y0 + th * y1
            + u * ((1.0 - 2.0 * th) * (y1 - y0) + (th - 1.0) * h * f0 + th * h * f1))


class _DenseCollector:
    """Collects uniformly spaced samples while the stepper advances."""

    def __init__(self, t0, t1, n, y0):
        if n == 1:
            self.ts = np.array([t1])
        else:
            self.ts = np.linspace(t0, t1, n)
        self.states = np.empty((len(self.ts), len(y0)))
        self.pos = 0
        # Samples exactly at t0 are known before stepping.
        while self.pos < len(self.ts) and self.ts[self.pos] == t0:
            self.states[self.pos] = y0
            self.pos += 1

    def collect(self, t_prev, h, y_prev, y_new, f_prev, f_new, direction):
        t_new = t_prev + h
        while self.pos < len(self.ts) and direction * (self.ts[self.pos] - t_new) <= 0:
            ts = self.ts[self.pos]
            self.states[self.pos] = _hermite(ts, t_prev, h, y_prev, y_new, f_prev, f_new)
            self.pos += 1

    def finish(self, endpoint):
        while self.pos < len(self.ts):
            self.states[self.pos] = endpoint
            self.pos += 1
        self.states[-1] = endpoint


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(f"non-finite state at t={t}")


def _integrate_rk45(system, y0, t0, t1, config, dense):
    f = system.f
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    h = direction * min(config.step, span)
    t, y = t0, y0.copy()
    k1 = np.asarray(f(t, y), dtype=float)
    if k1.shape != y.shape:
        raise DimensionMismatch(f"f returned shape {k1.shape}, expected {y.shape}")
    _check_finite(k1, t)
    n_acc = n_rej = 0
    ks = [k1] + [np.empty_like(y) for _ in range(6)]
    min_step = _MIN_STEP_FRACTION * max(abs(t0), abs(t1), 1.0)
    while direction * (t1 - t) > 0:
        if abs(h) > abs(t1 - t):
            h = t1 - t
        for i in range(1, 7):
            yi = y.copy()
            ai = _DP_A[i]
            for j in range(i):
                if ai[j] != 0.0:
                    yi += (h * ai[j]) * ks[j]
            ks[i] = np.asarray(f(t + _DP_C[i] * h, yi), dtype=float)
        y_new = y.copy()
        for j in range(7):
            if _DP_B5[j] != 0.0:
                y_new += (h * _DP_B5[j]) * ks[j]
        err = np.zeros_like(y)
        for j in range(7):
            if _DP_E[j] != 0.0:
                err += (h * _DP_E[j]) * ks[j]
        scale = config.atol + config.rtol * max(
            float(np.max(np.abs(y))), float(np.max(np.abs(y_new))))
        err_norm = float(np.max(np.abs(err))) / scale
        if math.isfinite(err_norm) and err_norm <= 1.0:
            _check_finite(y_new, t + h)
            if dense is not None:
                dense.collect(t, h, y, y_new, ks[0], ks[6], direction)
            t = t + h
            y = y_new
            ks[0] = ks[6].copy()      # FSAL
            n_acc += 1
            if n_acc > config.max_steps:
                raise MaxStepsExceeded(
                    f"accepted-step budget {config.max_steps} exhausted at t={t}",
                    t=t, state=y)
        else:
            n_rej += 1
        if math.isfinite(err_norm) and err_norm > 0.0:
            factor = min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        elif err_norm == 0.0:
            factor = 5.0
        else:
            factor = 0.2
        h *= factor
        if abs(h) < min_step and direction * (t1 - t) > 0:
            raise MaxStepsExceeded(
                f"adaptive step collapsed below {min_step:g} at t={t}", t=t, state=y)
    return y, n_acc, n_rej


def _integrate_rk4(system, y0, t0, t1, config, dense):
    f = system.f
    span = abs(t1 - t0)
    n = max(1, math.ceil(span / config.step))
    if n > config.max_steps:
        raise MaxStepsExceeded(f"{n} fixed steps exceed max_steps={config.max_steps}")
    h = (t1 - t0) / n
    direction = 1.0 if t1 > t0 else -1.0
    t, y = t0, y0.copy()
    k1 = np.asarray(f(t, y), dtype=float)
    if k1.shape != y.shape:
        raise DimensionMismatch(f"f returned shape {k1.shape}, expected {y.shape}")
    for _ in range(n):
        k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(f(t + h, y + h * k3), dtype=float)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(y_new, t + h)
        k1_new = np.asarray(f(t + h, y_new), dtype=float)
        if dense is not None:
            dense.collect(t, h, y, y_new, k1, k1_new, direction)
        t += h
        y = y_new
        k1 = k1_new
    return y, n, 0


def integrate(system: OdeSystem, y0, t0: float, t1: float,
              config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate ``system`` from t0 to t1 (either order) starting at y0."""
    y0 = np.ascontiguousarray(y0, dtype=float)
    if y0.shape != (system.dim,):
        raise DimensionMismatch(
            f"y0 has shape {y0.shape}, system dim is {system.dim}")
    if t0 == t1:
        return Trajectory(times=np.array([t0]), states=y0[None, :].copy(),
                          endpoint=y0.copy(), n_accepted=0, n_rejected=0)

    if (config.dense_samples == 0 and system.kernel is not None
            and _backend.compiled_active()):
        endpoint, n_acc, n_rej = _backend.core().c_integrate(
            system.kernel, y0, t0, t1,
            config.rtol, config.atol, config.step, config.max_steps,
            config.method is IntegratorMethod.RK4_FIXED)
        return Trajectory(times=np.array([t0, t1]),
                          states=np.stack([y0, endpoint]),
                          endpoint=endpoint, n_accepted=n_acc, n_rejected=n_rej)

    dense = (_DenseCollector(t0, t1, config.dense_samples, y0)
             if config.dense_samples > 0 else None)
    if config.method is IntegratorMethod.RK4_FIXED:
        y, n_acc, n_rej = _integrate_rk4(system, y0, t0, t1, config, dense)
    else:
        y, n_acc, n_rej = _integrate_rk45(system, y0, t0, t1, config, dense)
    if dense is not None:
        dense.finish(y)
        times, states = dense.ts, dense.states
    else:
        times, states = np.array([t0, t1]), np.stack([y0, y])
    return Trajectory(times=times, states=states, endpoint=y,
                      n_accepted=n_acc, n_rejected=n_rej)


def reverse_check(system: OdeSystem, y0, t0: float, t1: float,
                  config: IntegratorConfig = IntegratorConfig()) -> float:
    """Round-trip t0 -> t1 -> t0 and report the max-abs coordinate drift."""
    y0 = np.asarray(y0, dtype=float)
    fwd = integrate(system, y0, t0, t1, config)
    back = integrate(system, fwd.endpoint, t1, t0, config)
    return float(np.max(np.abs(back.endpoint - y0)))
