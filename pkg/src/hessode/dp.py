"""Joint backward evolution of state, gradient, and Hessian.

The "all in one solve" route: the Hessian coefficients h_ij ride along
with (y, sigma) in a single flattened state vector and evolve as

    dh/dt = -h F' - F'^T h - sigma_m d2F_m/dy dy

backward in time.  The last term couples the gradient to the curvature of
the rate function; it vanishes for linear systems and whenever sigma stays
zero (backpropagation from a critical point), and can be switched off to
reproduce that truncation deliberately.

For objectives of both endpoints an extra D x D block g with
dg/dt = -g F' is carried; it arrives at t0 as T01 . J (J the state
transition matrix), which is exactly the cross term the two-point Hessian
needs.
"""

from __future__ import annotations

import numpy as np

from . import backend as _backend
from .errors import DimensionMismatch
from .ode import IntegratorConfig, OdeSystem, integrate
from .twopoint import HessianResult, TwoPointLoss

__all__ = ["DpState", "dp_system", "dp_hessian_endpoint", "dp_hessian_two_point"]


class DpState:
    """Flattened layout concat(y, sigma, h row-major[, g row-major])."""

    def __init__(self, y, sigma, h, g=None):
        self.y = np.asarray(y, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.g = None if g is None else np.asarray(g, dtype=float)
        d = len(self.y)
        if self.sigma.shape != (d,) or self.h.shape != (d, d):
            raise DimensionMismatch("inconsistent DpState block shapes")
        if self.g is not None and self.g.shape != (d, d):
            raise DimensionMismatch("g block must be D x D")

    def flatten(self) -> np.ndarray:
        parts = [self.y, self.sigma, self.h.ravel()]
        if self.g is not None:
            parts.append(self.g.ravel())
        return np.concatenate(parts)

    @staticmethod
    def split(flat, dim, with_g=False) -> "DpState":
        expect = 2 * dim + dim * dim * (2 if with_g else 1)
        if len(flat) != expect:
            raise DimensionMismatch(f"flat length {len(flat)}, expected {expect}")
        y = flat[:dim]
        sigma = flat[dim:2 * dim]
        h = flat[2 * dim:2 * dim + dim * dim].reshape(dim, dim)
        g = None
        if with_g:
            g = flat[2 * dim + dim * dim:].reshape(dim, dim)
        return DpState(y, sigma, h, g)


def dp_system(system: OdeSystem, include_sigma_f_term: bool = True,
              with_g: bool = False) -> OdeSystem:
    """Joint (y, sigma, h[, g]) system; h-rate assembled via repeated vjp.

    Each h-rate evaluation makes D vjp calls for h.F', D for F'^T.h, and D
    sovjp calls for the sigma_m d2F_m term; the full Jacobian is never
    assembled here.
    """
    d = system.dim
    f_in, vjp_in, sovjp_in = system.f, system.vjp, system.sovjp

    def f(t, Y):
        y = Y[:d]
        sig = Y[d:2 * d]
        h = Y[2 * d:2 * d + d * d].reshape(d, d)
        dy = f_in(t, y)
        dsig = -vjp_in(y, sig)
        dh = np.empty((d, d))
        for j in range(d):
            dh[:, j] = -vjp_in(y, np.ascontiguousarray(h[:, j]))   # -(h F')_?j: h_mj F_m,i
        for i in range(d):
            dh[i, :] -= vjp_in(y, h[i, :])                          # -(F'^T h)^T: h_im F_m,j
        if include_sigma_f_term:
            e = np.zeros(d)
            for i in range(d):
                e[i] = 1.0
                dh[i, :] -= sovjp_in(y, sig, e)                     # sigma_m F_m,ij
                e[i] = 0.0
        parts = [dy, dsig, dh.ravel()]
        if with_g:
            g = Y[2 * d + d * d:].reshape(d, d)
            dg = np.empty((d, d))
            for i in range(d):
                dg[i, :] = -vjp_in(y, g[i, :])
            parts.append(dg.ravel())
        return np.concatenate(parts)

    kern = None
    if system.kernel is not None and _backend.have_compiled():
        kern = _backend.core().make_dp(system.kernel, include_sigma_f_term, with_g)
    dim = 2 * d + d * d * (2 if with_g else 1)
    return OdeSystem(dim=dim, f=f, kernel=kern)


def dp_hessian_endpoint(system: OdeSystem, y0, t0: float, t1: float,
                        loss_grad_end, loss_hess_end,
                        config: IntegratorConfig = IntegratorConfig(),
                        include_sigma_f_term: bool = True) -> HessianResult:
    """Gradient and Hessian of an endpoint-only loss with respect to y0.

    ``loss_grad_end`` / ``loss_hess_end`` are dL/dy and d2L/dy2 evaluated at
    y(t1) (callables of the endpoint, or constant arrays).
    """
    y0 = np.asarray(y0, dtype=float)
    fwd = integrate(system, y0, t0, t1, config)
    y_end = fwd.endpoint
    sig_end = loss_grad_end(y_end) if callable(loss_grad_end) else np.asarray(loss_grad_end, float)
    h_end = loss_hess_end(y_end) if callable(loss_hess_end) else np.asarray(loss_hess_end, float)
    joint = dp_system(system, include_sigma_f_term=include_sigma_f_term)
    state = DpState(y_end, sig_end, h_end)
    back = integrate(joint, state.flatten(), t1, t0, config)
    out = DpState.split(back.endpoint, system.dim)
    return HessianResult.from_raw(value=np.nan, gradient=out.sigma,
                                  hessian=out.h, method="dp")


def dp_hessian_two_point(system: OdeSystem, loss: TwoPointLoss, y0, T: float,
                         config: IntegratorConfig = IntegratorConfig(),
                         include_sigma_f_term: bool = True) -> HessianResult:
    """Gradient and Hessian of y0 -> T(y0, y(T)) via one joint backward solve.

    Terminal data (sigma, h, g) = (T1, T11, T01); the result combines as
    gradient = T0 + sigma(0) and Hessian = T00 + g(0) + g(0)^T + h(0).
    """
    y0 = np.asarray(y0, dtype=float)
    fwd = integrate(system, y0, 0.0, T, config)
    y_end = fwd.endpoint
    value = loss.value(y0, y_end)
    t0v = loss.t0_grad(y0, y_end)
    t1v = loss.t1_grad(y0, y_end)
    joint = dp_system(system, include_sigma_f_term=include_sigma_f_term, with_g=True)
    state = DpState(y_end, t1v, loss.t11(y0, y_end), loss.t01(y0, y_end))
    back = integrate(joint, state.flatten(), T, 0.0, config)
    out = DpState.split(back.endpoint, system.dim, with_g=True)
    gradient = t0v + out.sigma
    hessian = loss.t00(y0, y_end) + out.g + out.g.T + out.h
    return HessianResult.from_raw(value=value, gradient=gradient,
                                  hessian=hessian, method="dp")
