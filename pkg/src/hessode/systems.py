"""Benchmark dynamical systems with analytic derivative contractions.

Three mechanical systems (all with unit masses/constants):

* ``ho3``    -- isotropic 3d harmonic oscillator, D = 6.
* ``kepler`` -- central inverse-square-force problem, D = 6.
* ``p3bp``   -- planar gravitational three-body problem, D = 12.

plus ``random_poly_system``: seeded random ODEs whose rate is a linear +
quadratic (optionally cubic) form in the state, with per-order variance
normalization.  All systems ship analytic jvp/vjp/sovjp, so the
finite-difference fallbacks on :class:`OdeSystem` stay test-only.
"""

from __future__ import annotations

import numpy as np

from . import backend as _backend
from .errors import SingularConfiguration
from .ode import OdeSystem

__all__ = [
    "ho3",
    "kepler",
    "p3bp",
    "random_poly_system",
    "energy",
    "system_by_tag",
    "SYSTEM_TAGS",
]


def _kernel(name, *args):
    if not _backend.have_compiled():
        return None
    return getattr(_backend.core(), name)(*args)


# --- 3d harmonic oscillator -------------------------------------------------

def ho3() -> OdeSystem:
    """dq/dt = p, dp/dt = -q.  Linear, so sovjp vanishes identically."""

    def f(t, y):
        return np.concatenate([y[3:], -y[:3]])

    def jvp(y, v):
        return np.concatenate([v[3:], -v[:3]])

    def vjp(y, s):
        # s . A for A = [[0, I], [-I, 0]]
        return np.concatenate([-s[3:], s[:3]])

    def sovjp(y, a, b):
        return np.zeros(6)

    return OdeSystem(dim=6, f=f, jvp=jvp, vjp=vjp, sovjp=sovjp,
                     kernel=_kernel("make_ho3"))


# --- Kepler problem ---------------------------------------------------------

_KEPLER_R_MIN = 1e-12


def _kepler_r(q):
    r2 = float(q @ q)
    if r2 < _KEPLER_R_MIN ** 2:
        raise SingularConfiguration(f"|q| = {np.sqrt(r2):.3e} below {_KEPLER_R_MIN}")
    return np.sqrt(r2)


def kepler() -> OdeSystem:
    """dq/dt = p, dp/dt = -q / |q|^3 (reduced two-body motion)."""

    def f(t, y):
        q, p = y[:3], y[3:]
        r = _kepler_r(q)
        return np.concatenate([p, -q / r ** 3])

    def _accel_jac(q):
        # d(-q r^-3)/dq = -r^-3 I + 3 r^-5 q q^T (symmetric)
        r = _kepler_r(q)
        return -np.eye(3) / r ** 3 + 3.0 * np.outer(q, q) / r ** 5

    def jvp(y, v):
        A = _accel_jac(y[:3])
        return np.concatenate([v[3:], A @ v[:3]])

    def vjp(y, s):
        A = _accel_jac(y[:3])
        return np.concatenate([A @ s[3:], s[:3]])

    def sovjp(y, a, b):
        # Only the acceleration block has curvature; with u = a_p, w = b_q:
        # out_q[j] = u_m w_i d2(accel_m)/dq_i dq_j
        q = y[:3]
        r = _kepler_r(q)
        u, w = a[3:], b[:3]
        uw, uq, wq = float(u @ w), float(u @ q), float(w @ q)
        out_q = (3.0 / r ** 5) * (uw * q + wq * u + uq * w) \
            - (15.0 / r ** 7) * uq * wq * q
        return np.concatenate([out_q, np.zeros(3)])

    return OdeSystem(dim=6, f=f, jvp=jvp, vjp=vjp, sovjp=sovjp,
                     kernel=_kernel("make_kepler"))


# --- planar three-body problem ----------------------------------------------

_P3BP_R_MIN = 1e-10


def _pair_data(q):
    """Pairwise separations d[i,j] = q_j - q_i and inverse powers."""
    pos = q.reshape(3, 2)
    d = pos[None, :, :] - pos[:, None, :]
    r2 = np.einsum("ija,ija->ij", d, d)
    np.fill_diagonal(r2, 1.0)
    if np.any(r2[~np.eye(3, dtype=bool)] < _P3BP_R_MIN ** 2):
        raise SingularConfiguration("three-body near-collision")
    r = np.sqrt(r2)
    return d, r


def p3bp() -> OdeSystem:
    """Planar three-body gravity, unit masses and unit coupling, D = 12."""

    def f(t, y):
        q, p = y[:6], y[6:]
        d, r = _pair_data(q)
        inv3 = r ** -3
        np.fill_diagonal(inv3, 0.0)
        acc = np.einsum("ija,ij->ia", d, inv3)   # sum over j of d_ij / r^3
        return np.concatenate([p, acc.ravel()])

    def _pair_kmat(d, r):
        # K_ij = d(u)/d(d) for u = d / |d|^3: r^-3 I - 3 r^-5 d d^T, per pair.
        inv3 = r ** -3
        inv5 = r ** -5
        K = inv3[:, :, None, None] * np.eye(2)[None, None] \
            - 3.0 * inv5[:, :, None, None] * np.einsum("ija,ijb->ijab", d, d)
        for i in range(3):
            K[i, i] = 0.0
        return K

    def _acc_jvp(q, w):
        # directional derivative of the acceleration along dq = w
        d, r = _pair_data(q)
        K = _pair_kmat(d, r)
        wv = w.reshape(3, 2)
        dw = wv[None, :, :] - wv[:, None, :]
        return np.einsum("ijab,ijb->ia", K, dw).ravel()

    def jvp(y, v):
        return np.concatenate([v[6:], _acc_jvp(y[:6], v[:6])])

    def vjp(y, s):
        # acceleration Jacobian is symmetric, so s_p . dacc/dq = _acc_jvp(q, s_p)
        return np.concatenate([_acc_jvp(y[:6], s[6:]), s[:6]])

    def sovjp(y, a, b):
        # q-block_j = a_m b_i d2F_m/dy_i dy_j; curvature sits in dacc/dq only.
        q = y[:6]
        d, r = _pair_data(q)
        u = a[6:].reshape(3, 2)    # contracts the acceleration index
        w = b[:6].reshape(3, 2)    # direction of differentiation
        du = u[None, :, :] - u[:, None, :]
        dwv = w[None, :, :] - w[:, None, :]
        inv5 = r ** -5
        inv7 = r ** -7
        dot_du = np.einsum("ija,ija->ij", d, du)
        out = np.zeros((3, 2))
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                dd, uu, ww = d[i, j], du[i, j], dwv[i, j]
                # directional derivative of K(d_ij) (u_j - u_i) along
                # delta d_ij = w_j - w_i
                g = (-3.0 * inv5[i, j] * (dd * float(uu @ ww)
                                          + uu * float(dd @ ww)
                                          + ww * dot_du[i, j])
                     + 15.0 * inv7[i, j] * dot_du[i, j] * float(dd @ ww) * dd)
                out[i] += g
        return np.concatenate([out.ravel(), np.zeros(6)])

    return OdeSystem(dim=12, f=f, jvp=jvp, vjp=vjp, sovjp=sovjp,
                     kernel=_kernel("make_p3bp"))


# --- random polynomial ODEs ---------------------------------------------------

def _poly_scales(dim, order):
    # Variance normalization so that the contraction of each symmetrized
    # order-k block with independent standard normals has unit expected
    # square per component.  Symmetrizing N(0,1) entries over the last k
    # indices leaves E[sum of squares] = prod_{r=1..k}(D+r-1)/r * k! / k!^2 ...
    # worked out in closed form below:
    #   k=1: D          (no symmetrization)
    #   k=2: D(D+1)/2   after last-two symmetrization
    #   k=3: D(D+1)(D+2)/6
    if order == 1:
        return np.sqrt(dim)
    if order == 2:
        return np.sqrt(dim * (dim + 1) / 2.0)
    return np.sqrt(dim * (dim + 1) * (dim + 2) / 6.0)


class _LastValueCache:
    """Memoizes one (key_array -> value) pair; hit when bytes match."""

    __slots__ = ("key", "value")

    def __init__(self):
        self.key = None
        self.value = None

    def get(self, arr, compute):
        kb = arr.tobytes()
        if kb != self.key:
            self.key = kb
            self.value = compute()
        return self.value


def random_poly_system(dim: int, max_order: int = 2, seed: int = 0) -> OdeSystem:
    """Seeded random ODE dy_i/dt = P1_ik y_k + 0.5 P2_ikl y_k y_l (+ cubic).

    P2 is symmetrized over its trailing two indices (P3 over three); each
    order block is scaled so its contraction with independent standard
    normal vectors has unit expected square per component.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if max_order not in (2, 3):
        raise ValueError("max_order must be 2 or 3")
    rng = np.random.default_rng(seed)
    p1 = rng.standard_normal((dim, dim)) / _poly_scales(dim, 1)
    p2 = rng.standard_normal((dim, dim, dim))
    p2 = 0.5 * (p2 + p2.transpose(0, 2, 1)) / _poly_scales(dim, 2)
    p3 = None
    if max_order == 3:
        c = rng.standard_normal((dim, dim, dim, dim))
        c = (c + c.transpose(0, 1, 3, 2) + c.transpose(0, 2, 1, 3)
             + c.transpose(0, 2, 3, 1) + c.transpose(0, 3, 1, 2)
             + c.transpose(0, 3, 2, 1)) / 6.0
        p3 = c / _poly_scales(dim, 3)

    jac_cache = _LastValueCache()

    def _jac(y):
        # F' = P1 + P2 . y (+ 0.5 (P3 . y) . y); one O(D^3) contraction,
        # reused across the D vjp calls a Hessian-rate evaluation makes.
        def compute():
            J = p1 + np.tensordot(p2, y, axes=([2], [0]))
            if p3 is not None:
                J = J + 0.5 * np.tensordot(
                    np.tensordot(p3, y, axes=([3], [0])), y, axes=([2], [0]))
            return J
        return jac_cache.get(y, compute)

    sig_cache = _LastValueCache()

    def _sigma_quad(a):
        # a_m F_m,ij for the quadratic part; cubic handled separately.
        return sig_cache.get(a, lambda: np.tensordot(p2, a, axes=([0], [0])))

    def f(t, y):
        out = p1 @ y + 0.5 * (np.tensordot(p2, y, axes=([2], [0])) @ y)
        if p3 is not None:
            out = out + (np.tensordot(np.tensordot(
                p3, y, axes=([3], [0])), y, axes=([2], [0])) @ y) / 6.0
        return out

    def jvp(y, v):
        return _jac(y) @ v

    def vjp(y, s):
        return s @ _jac(y)

    def sovjp(y, a, b):
        out = b @ _sigma_quad(a)
        if p3 is not None:
            out = out + b @ np.tensordot(
                np.tensordot(p3, a, axes=([0], [0])), y, axes=([2], [0]))
        return out

    kern = None
    if _backend.have_compiled() and p3 is None:
        kern = _backend.core().make_poly(
            np.ascontiguousarray(p1), np.ascontiguousarray(p2))
    sys_ = OdeSystem(dim=dim, f=f, jvp=jvp, vjp=vjp, sovjp=sovjp, kernel=kern)
    object.__setattr__(sys_, "coeffs", (p1, p2, p3))
    return sys_


# --- energies and the tag registry -------------------------------------------

def _energy_ho3(y):
    return 0.5 * float(y[:3] @ y[:3]) + 0.5 * float(y[3:] @ y[3:])


def _energy_kepler(y):
    q, p = y[:3], y[3:]
    r = _kepler_r(q)
    return 0.5 * float(p @ p) - 1.0 / r


def _energy_p3bp(y):
    q, p = y[:6], y[6:]
    _, r = _pair_data(q)
    pot = -sum(1.0 / r[i, j] for i in range(3) for j in range(i + 1, 3))
    return 0.5 * float(p @ p) + pot


_ENERGIES = {"ho3": _energy_ho3, "kepler": _energy_kepler, "p3bp": _energy_p3bp}

SYSTEM_TAGS = ("ho3", "kepler", "p3bp", "randpoly")


def energy(system_tag: str, y) -> float:
    """Hamiltonian of one of the mechanical systems at state y."""
    y = np.asarray(y, dtype=float)
    try:
        return _ENERGIES[system_tag](y)
    except KeyError:
        raise ValueError(f"no energy defined for system tag {system_tag!r}") from None


def system_by_tag(tag: str, dim: int = 10, max_order: int = 2, seed: int = 0) -> OdeSystem:
    if tag == "ho3":
        return ho3()
    if tag == "kepler":
        return kepler()
    if tag == "p3bp":
        return p3bp()
    if tag == "randpoly":
        return random_poly_system(dim, max_order=max_order, seed=seed)
    raise ValueError(f"unknown system tag {tag!r}")
