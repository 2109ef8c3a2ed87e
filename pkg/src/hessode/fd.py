"""Central-difference gradients and Hessians, plus a gradient guard.

This is the ground-truth generator for everything else in the package:
simple enough to trust, accurate enough to catch real mistakes.  Default
step sizes assume values and derivatives at scale ~1 and split binary64
precision between truncation and roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GradientMismatch, NonFiniteOutput

__all__ = ["FdConfig", "fd_grad", "fd_hessian", "verified_grad"]


@dataclass(frozen=True)
class FdConfig:
    eps_grad: float = 1e-7
    eps_hess: float = 1e-5
    rtol: float = 0.1
    atol: float = 1e-3

    def __post_init__(self):
        if min(self.eps_grad, self.eps_hess, self.rtol, self.atol) <= 0:
            raise ValueError("FdConfig fields must all be positive")


def fd_grad(f, x0, eps: float = 1e-7) -> np.ndarray:
    """Central-difference derivative of an array-valued f; appends one axis.

    The probe vector is restored after every coordinate, so f never sees a
    point differing from x0 in more than one coordinate.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise ValueError(f"need a 1-index position vector, got shape {x0.shape}")
    dim = x0.size
    f0 = np.asarray(f(x0), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise NonFiniteOutput("f(x0) is not finite")
    result = np.zeros(f0.shape + (dim,))
    xpos = x0.copy()
    for k in range(dim):
        xpos[k] = x0[k] + eps
        f_plus = np.asarray(f(xpos), dtype=float)
        xpos[k] = x0[k] - eps
        f_minus = np.asarray(f(xpos), dtype=float)
        xpos[k] = x0[k]
        result[..., k] = (f_plus - f_minus) / (2.0 * eps)
    if not np.all(np.isfinite(result)):
        raise NonFiniteOutput("finite-difference probe returned NaN/Inf")
    return result


def fd_hessian(f, x0, eps: float = 1e-5) -> np.ndarray:
    """Nested central differences of a scalar-valued f."""
    return fd_grad(lambda x: fd_grad(f, x, eps=eps), x0, eps=eps)


def verified_grad(f, analytic_grad, cfg: FdConfig = FdConfig()):
    """Wrap analytic_grad so every call is checked against fd_grad of f.

    The returned callable raises :class:`GradientMismatch` naming the worst
    offending component whenever |analytic - fd| > atol + rtol * |fd|.
    """

    def checked(x0):
        x0 = np.asarray(x0, dtype=float)
        g = np.asarray(analytic_grad(x0), dtype=float)
        ref = fd_grad(f, x0, eps=cfg.eps_grad)
        err = np.abs(g - ref) - (cfg.atol + cfg.rtol * np.abs(ref))
        worst = int(np.argmax(err))
        if err.flat[worst] > 0.0:
            idx = np.unravel_index(worst, err.shape)
            raise GradientMismatch(
                f"gradient mismatch at component {idx}: "
                f"analytic {g[idx]!r} vs finite-difference {ref[idx]!r}",
                index=idx, analytic=float(g[idx]), reference=float(ref[idx]))
        return g

    return checked
