"""Costate ("doubled") systems and gradient backpropagation through ODEs.

For a flow dy/dt = F(y) and a scalar objective seeded at one end of the
integration interval, the sensitivity sigma(t) of that objective with
respect to y(t) obeys d sigma/dt = -sigma . F'(y).  :func:`obp_system`
packages (y, sigma) as a single system of dimension 2D so that one solve
carries the state reconstruction and the sensitivity together.  The
returned system exposes analytic jvp/vjp built from the inner system's
contractions, which is what makes a second level of doubling (used by the
per-row Hessian) possible without ever needing third derivatives of F.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend as _backend
from .errors import DimensionMismatch
from .ode import IntegratorConfig, OdeSystem, integrate

__all__ = ["CostateState", "obp_system", "backprop_gradient"]


@dataclass(frozen=True)
class CostateState:
    """(reconstructed state, objective sensitivity) at one time point."""

    y: np.ndarray
    sigma: np.ndarray

    @staticmethod
    def split(flat: np.ndarray) -> "CostateState":
        if len(flat) % 2 != 0:
            raise DimensionMismatch(f"costate vector length {len(flat)} is odd")
        d = len(flat) // 2
        return CostateState(y=flat[:d].copy(), sigma=flat[d:].copy())

    def join(self) -> np.ndarray:
        return np.concatenate([self.y, self.sigma])


def obp_system(system: OdeSystem) -> OdeSystem:
    """Double ``system``: state (y, sigma), rate (F(y), -sigma . F'(y)).

    The doubled system's own vjp/jvp are assembled analytically from the
    inner jvp/vjp/sovjp, so the output can itself be doubled again.
    """
    d = system.dim
    f_in, jvp_in, vjp_in, sovjp_in = system.f, system.jvp, system.vjp, system.sovjp

    def f(t, Y):
        y, sig = Y[:d], Y[d:]
        return np.concatenate([f_in(t, y), -vjp_in(y, sig)])

    def vjp(Y, z):
        y, sig = Y[:d], Y[d:]
        zy, zs = z[:d], z[d:]
        return np.concatenate([
            vjp_in(y, zy) - sovjp_in(y, sig, zs),
            -jvp_in(y, zs),
        ])

    def jvp(Y, v):
        y, sig = Y[:d], Y[d:]
        vy, vs = v[:d], v[d:]
        return np.concatenate([
            jvp_in(y, vy),
            -vjp_in(y, vs) - sovjp_in(y, sig, vy),
        ])

    kern = None
    if system.kernel is not None and _backend.have_compiled():
        kern = _backend.core().make_obp(system.kernel)
    return OdeSystem(dim=2 * d, f=f, jvp=jvp, vjp=vjp, kernel=kern)


def backprop_gradient(system: OdeSystem, y_end, sigma_end, t_end: float,
                      t_start: float,
                      config: IntegratorConfig = IntegratorConfig()) -> CostateState:
    """Carry d(objective)/d(y(t_end)) back to t_start along the flow.

    ``sigma_end`` must be the gradient of the caller's scalar objective with
    respect to ``y_end``.  Returns the reconstructed state at ``t_start``
    together with the objective's gradient with respect to it.
    """
    y_end = np.asarray(y_end, dtype=float)
    sigma_end = np.asarray(sigma_end, dtype=float)
    if y_end.shape != (system.dim,) or sigma_end.shape != (system.dim,):
        raise DimensionMismatch("y_end / sigma_end must match the system dimension")
    doubled = obp_system(system)
    traj = integrate(doubled, np.concatenate([y_end, sigma_end]),
                     t_end, t_start, config)
    return CostateState.split(traj.endpoint)
