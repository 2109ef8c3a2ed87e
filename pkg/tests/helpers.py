"""Shared test utilities and reference configurations."""

import numpy as np

from hessode import IntegratorConfig, OdeSystem

TWO_PI = 6.28318530718

# Reference configurations for the three mechanical systems.
HO3_Y0 = np.array([50.0, 10.0, 50.0, -20.0, 10.0, -0.1])
HO3_Y0_DEFORMED = np.array([50.70710678, 10.0, 50.0, -20.0, 9.29289322, -0.1])
KEPLER_Y0_INIT = np.array([0.1, 0.2, -0.33, -0.2, 0.5, -0.1])
KEPLER_Y0_SOLUTION = np.array(
    [0.351, 0.706, -1.161, -0.238, 0.595, -0.12])     # rounded solution point
FIG8_Y0_INIT = np.array([
    -1.0, 0.0, 1.0, 0.0, 0.0, 0.0,
    0.347111, 0.532728, 0.347111, 0.532728, -0.694222, -1.065456])
FIG8_T = 6.324449

TIGHT = IntegratorConfig(rtol=1e-12, atol=1e-12)
STANDARD = IntegratorConfig(rtol=1e-10, atol=1e-10)


def expm_ref(a, terms=40):
    """Matrix exponential by scaling-and-squaring with a Taylor series.

    Independent reference for linear-system integration tests.
    """
    a = np.asarray(a, dtype=float)
    norm = np.max(np.sum(np.abs(a), axis=1))
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-16)))) + 1)
    b = a / (2.0 ** squarings)
    n = a.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, terms + 1):
        term = term @ b / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def linear_system(a) -> OdeSystem:
    """OdeSystem for dy/dt = A y with analytic contractions."""
    a = np.asarray(a, dtype=float)

    return OdeSystem(
        dim=a.shape[0],
        f=lambda t, y: a @ y,
        jvp=lambda y, v: a @ v,
        vjp=lambda y, s: s @ a,
        sovjp=lambda y, u, w: np.zeros(a.shape[0]),
    )


def transition_matrix(system, y0, t0, t1, config):
    """State transition matrix J = d y(t1) / d y(t0).

    Propagates the D tangent basis vectors jointly with the state using
    the system's jvp (independent of the costate machinery).
    """
    d = system.dim

    def f(t, z):
        y = z[:d]
        v = z[d:].reshape(d, d)
        dv = np.empty_like(v)
        for k in range(d):
            dv[:, k] = system.jvp(y, v[:, k])
        return np.concatenate([system.f(t, y), dv.ravel()])

    joint = OdeSystem(dim=d + d * d, f=f)
    z0 = np.concatenate([np.asarray(y0, dtype=float), np.eye(d).ravel()])
    from hessode import integrate
    out = integrate(joint, z0, t0, t1, config)
    return out.endpoint[d:].reshape(d, d)


def counting_system(system):
    """Wrap a system so calls to f/jvp/vjp/sovjp are counted."""
    counts = {"f": 0, "jvp": 0, "vjp": 0, "sovjp": 0}

    def wrap(name, fn):
        def inner(*args):
            counts[name] += 1
            return fn(*args)
        return inner

    wrapped = OdeSystem(
        dim=system.dim,
        f=wrap("f", system.f),
        jvp=wrap("jvp", system.jvp),
        vjp=wrap("vjp", system.vjp),
        sovjp=wrap("sovjp", system.sovjp),
    )
    return wrapped, counts
