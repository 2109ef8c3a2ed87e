import numpy as np
import pytest

from hessode import (FdConfig, IntegratorConfig, backprop_gradient, fd_grad,
                     ho3, integrate, kepler, obp_system, p3bp,
                     random_poly_system, verified_grad)
from hessode.adjoint import CostateState
from hessode.ode import _fd_vjp

from helpers import FIG8_T, FIG8_Y0_INIT, KEPLER_Y0_SOLUTION, TIGHT, counting_system


def test_obp_ho3_matches_hand_expansion():
    # For the linear oscillator, rate at (y, sigma) is (A y, -A^T sigma).
    a = np.zeros((6, 6))
    a[:3, 3:] = np.eye(3)
    a[3:, :3] = -np.eye(3)
    doubled = obp_system(ho3())
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = rng.standard_normal(6)
        sig = rng.standard_normal(6)
        rate = doubled.f(0.0, np.concatenate([y, sig]))
        assert np.allclose(rate[:6], a @ y, atol=1e-14)
        assert np.allclose(rate[6:], -a.T @ sig, atol=1e-14)


def test_obp_zero_sensitivity_stays_zero():
    doubled = obp_system(kepler())
    y = KEPLER_Y0_SOLUTION
    rate = doubled.f(0.0, np.concatenate([y, np.zeros(6)]))
    assert np.array_equal(rate[6:], np.zeros(6))


def test_obp_vjp_consistent_with_fd_of_its_rate():
    sys_q = random_poly_system(5, seed=13)
    doubled = obp_system(sys_q)
    fd_vjp = _fd_vjp(doubled.dim, doubled.jvp)   # via analytic jvp columns
    rng = np.random.default_rng(1)
    state = rng.standard_normal(10)
    z = rng.standard_normal(10)
    assert np.max(np.abs(doubled.vjp(state, z) - fd_vjp(state, z))) < 1e-5

    # and against brute-force differencing of f itself
    eps = 1e-7
    jac = np.empty((10, 10))
    for k in range(10):
        e = np.zeros(10)
        e[k] = eps
        jac[:, k] = (doubled.f(0.0, state + e) - doubled.f(0.0, state - e)) / (2 * eps)
    assert np.max(np.abs(doubled.vjp(state, z) - z @ jac)) < 1e-5


def test_backprop_empty_interval():
    out = backprop_gradient(ho3(), np.arange(6.0), np.ones(6), 1.0, 1.0)
    assert np.array_equal(out.y, np.arange(6.0))
    assert np.array_equal(out.sigma, np.ones(6))


def test_backprop_scalar_decay_gradient():
    from hessode import OdeSystem
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    end = integrate(sys1, [1.0], 0.0, 1.0, TIGHT).endpoint
    out = backprop_gradient(sys1, end, np.array([1.0]), 1.0, 0.0, TIGHT)
    assert abs(out.sigma[0] - np.exp(-1.0)) < 1e-9


@pytest.mark.parametrize("factory,point,T", [
    (ho3, np.array([5.0, 1.0, 5.0, -2.0, 1.0, -0.01]), 1.0),
    (kepler, KEPLER_Y0_SOLUTION, 1.0),
    (p3bp, FIG8_Y0_INIT, 1.0),
])
def test_gradient_vs_fd_endpoint_norm(factory, point, T):
    system = factory()
    cfg = TIGHT

    def loss_of_start(y0):
        end = integrate(system, y0, 0.0, T, cfg).endpoint
        return float(end @ end)

    def grad_of_start(y0):
        end = integrate(system, y0, 0.0, T, cfg).endpoint
        return backprop_gradient(system, end, 2.0 * end, T, 0.0, cfg).sigma

    checked = verified_grad(loss_of_start, grad_of_start, FdConfig())
    rng = np.random.default_rng(17)
    for _ in range(3):
        y0 = point + 0.01 * rng.standard_normal(system.dim)
        checked(y0)        # raises GradientMismatch on failure
        tight_ref = fd_grad(loss_of_start, y0, eps=1e-6)
        assert np.max(np.abs(grad_of_start(y0) - tight_ref)) < 1e-6 * max(
            1.0, float(np.max(np.abs(tight_ref))))


def test_backprop_linearity_in_sigma():
    system = random_poly_system(6, seed=19)
    rng = np.random.default_rng(2)
    y0 = rng.standard_normal(6)
    end = integrate(system, y0, 0.0, 0.2, TIGHT).endpoint
    u = rng.standard_normal(6)
    v = rng.standard_normal(6)
    a, b = 2.5, -1.25

    def back(sig):
        return backprop_gradient(system, end, sig, 0.2, 0.0, TIGHT).sigma

    combined = back(a * u + b * v)
    split = a * back(u) + b * back(v)
    assert np.max(np.abs(combined - split)) < 1e-9


def test_costate_rate_is_one_f_plus_one_vjp():
    # Structural contract: evaluating the doubled rate costs one rate call
    # and one vjp call of the base system -- never a full Jacobian build.
    wrapped, counts = counting_system(p3bp())
    doubled = obp_system(wrapped)
    state = np.concatenate([FIG8_Y0_INIT, np.ones(12)])
    doubled.f(0.0, state)
    assert counts == {"f": 1, "jvp": 0, "vjp": 1, "sovjp": 0}


def test_costate_state_split_join_roundtrip():
    flat = np.arange(10.0)
    st = CostateState.split(flat)
    assert np.array_equal(st.join(), flat)
