import numpy as np
import pytest

from hessode import (IntegratorConfig, bp2_hessian, dp_hessian_endpoint,
                     dp_hessian_two_point, fd_grad, fd_hessian, ho3, integrate,
                     kepler, nc_gradient, random_poly_system)
from hessode.dp import DpState, dp_system
from hessode.twopoint import TwoPointLoss, endpoint_loss, l2_loss

from helpers import (HO3_Y0, KEPLER_Y0_INIT, TWO_PI, TIGHT, STANDARD,
                     linear_system, transition_matrix)


def _rate_blocks(system, y, sig, h, include=True, g=None):
    joint = dp_system(system, include_sigma_f_term=include, with_g=g is not None)
    rate = joint.f(0.0, DpState(y, sig, h, g).flatten())
    return DpState.split(rate, system.dim, with_g=g is not None)


def test_linear_system_ablation_is_noop():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    sys_a = linear_system(a)
    y, sig = rng.standard_normal(4), rng.standard_normal(4)
    h = rng.standard_normal((4, 4))
    full = _rate_blocks(sys_a, y, sig, h, include=True)
    ablated = _rate_blocks(sys_a, y, sig, h, include=False)
    assert np.array_equal(full.h, ablated.h)


def test_zero_sigma_ablation_is_noop_even_for_quadratic():
    sys_q = random_poly_system(5, seed=1)
    rng = np.random.default_rng(2)
    y = rng.standard_normal(5)
    h = rng.standard_normal((5, 5))
    full = _rate_blocks(sys_q, y, np.zeros(5), h, include=True)
    ablated = _rate_blocks(sys_q, y, np.zeros(5), h, include=False)
    assert np.max(np.abs(full.h - ablated.h)) < 1e-14


def test_h_rate_matches_fd_assembly():
    # Independent assembly of -h J - J^T h - S with J and S from finite
    # differences of f and of sigma . f.
    sys_q = random_poly_system(5, seed=3)
    rng = np.random.default_rng(4)
    y = rng.standard_normal(5)
    sig = rng.standard_normal(5)
    h = rng.standard_normal((5, 5))
    jac = fd_grad(lambda x: sys_q.f(0.0, x), y)
    s_mat = fd_hessian(lambda x: float(sig @ sys_q.f(0.0, x)), y)
    expect = -h @ jac - jac.T @ h - s_mat
    got = _rate_blocks(sys_q, y, sig, h, include=True)
    assert np.max(np.abs(got.h - expect)) < 1e-4


def test_g_rate_is_minus_g_jac():
    sys_q = random_poly_system(4, seed=5)
    rng = np.random.default_rng(6)
    y, sig = rng.standard_normal(4), rng.standard_normal(4)
    h = rng.standard_normal((4, 4))
    g = rng.standard_normal((4, 4))
    jac = fd_grad(lambda x: sys_q.f(0.0, x), y)
    got = _rate_blocks(sys_q, y, sig, h, include=True, g=g)
    assert np.max(np.abs(got.g - (-g @ jac))) < 1e-5


def test_endpoint_zero_field_passthrough():
    from hessode import OdeSystem
    sys0 = OdeSystem(dim=3, f=lambda t, y: np.zeros(3))
    grad_end = np.array([1.0, -2.0, 0.5])
    hess_end = np.diag([1.0, 2.0, 3.0])
    out = dp_hessian_endpoint(sys0, np.zeros(3), 0.0, 2.0, grad_end, hess_end)
    assert np.array_equal(out.gradient, grad_end)
    assert np.array_equal(out.hessian_raw, hess_end)


def test_endpoint_scalar_decay():
    # y(1) = e^-1 y0, L = y^2 -> Hessian = 2 e^-2
    from hessode import OdeSystem
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    out = dp_hessian_endpoint(
        sys1, np.array([1.0]), 0.0, 1.0,
        lambda ye: 2.0 * ye, lambda ye: 2.0 * np.eye(1), TIGHT)
    assert abs(out.hessian_raw[0, 0] - 2.0 * np.exp(-2.0)) < 1e-9
    assert abs(out.gradient[0] - 2.0 * np.exp(-2.0)) < 1e-9


def test_endpoint_random_quadratic_triangle():
    sys_q = random_poly_system(6, seed=7)
    y0 = np.random.default_rng(8).standard_normal(6)

    out = dp_hessian_endpoint(
        sys_q, y0, 0.0, 0.2,
        lambda ye: 2.0 * ye, lambda ye: 2.0 * np.eye(6), STANDARD)

    def loss_of_start(x):
        end = integrate(sys_q, x, 0.0, 0.2, STANDARD).endpoint
        return float(end @ end)

    fd_h = fd_hessian(loss_of_start, y0)
    assert np.max(np.abs(out.hessian_sym - fd_h)) < 1e-3

    bp2 = bp2_hessian(sys_q, endpoint_loss(), y0, 0.2, STANDARD)
    assert np.max(np.abs(out.hessian_raw - bp2.hessian_raw)) < 1e-9


def test_two_point_start_only_loss_short_circuits():
    sys_q = random_poly_system(4, seed=9)
    y0 = np.random.default_rng(10).standard_normal(4)
    a = np.diag([1.0, 2.0, 3.0, 4.0])
    loss = TwoPointLoss(
        value=lambda p0, p1: 0.5 * float(p0 @ a @ p0),
        t0_grad=lambda p0, p1: a @ p0,
        t1_grad=lambda p0, p1: np.zeros(4),
        t00=lambda p0, p1: a.copy(),
        t01=lambda p0, p1: np.zeros((4, 4)),
        t11=lambda p0, p1: np.zeros((4, 4)),
    )
    out = dp_hessian_two_point(sys_q, loss, y0, 0.2, STANDARD)
    assert np.max(np.abs(out.gradient - a @ y0)) < 1e-12
    assert np.max(np.abs(out.hessian_raw - a)) < 1e-12


def test_two_point_ho3_flat():
    out = dp_hessian_two_point(ho3(), l2_loss(), HO3_Y0, TWO_PI, TIGHT)
    assert np.max(np.abs(np.linalg.eigvalsh(out.hessian_sym))) < 1e-8


def test_two_point_kepler_top_eigenvalue():
    from hessode import OrbitProblem, find_orbit
    prob = OrbitProblem(system=kepler(), T=TWO_PI, config=TIGHT)
    report = find_orbit(prob, KEPLER_Y0_INIT, gtol=1e-12)
    out = dp_hessian_two_point(kepler(), l2_loss(), report.y0, TWO_PI, TIGHT)
    lam_max = float(np.max(np.linalg.eigvalsh(out.hessian_sym)))
    assert lam_max == pytest.approx(331.2668, rel=1e-2)


def test_missing_term_ablation_observable():
    sys_q = random_poly_system(10, seed=1)
    y0 = np.random.default_rng(2).standard_normal(10)
    loss = endpoint_loss()
    full = dp_hessian_two_point(sys_q, loss, y0, 0.2, STANDARD,
                                include_sigma_f_term=True)
    ablated = dp_hessian_two_point(sys_q, loss, y0, 0.2, STANDARD,
                                   include_sigma_f_term=False)
    assert np.max(np.abs(full.hessian_raw - ablated.hessian_raw)) > 1e-3

    def loss_of_start(x):
        end = integrate(sys_q, x, 0.0, 0.2, STANDARD).endpoint
        return float(end @ end)

    fd_h = fd_hessian(loss_of_start, y0)
    assert np.max(np.abs(full.hessian_sym - fd_h)) < 1e-3
    assert np.max(np.abs(ablated.hessian_sym - fd_h)) > 1e-3


def test_critical_point_ablation_equivalence():
    sys_q = random_poly_system(6, seed=11)
    y0 = np.random.default_rng(12).standard_normal(6)
    hess_end = np.eye(6)
    full = dp_hessian_endpoint(sys_q, y0, 0.0, 0.2, np.zeros(6), hess_end,
                               STANDARD, include_sigma_f_term=True)
    ablated = dp_hessian_endpoint(sys_q, y0, 0.0, 0.2, np.zeros(6), hess_end,
                                  STANDARD, include_sigma_f_term=False)
    assert np.max(np.abs(full.hessian_raw - ablated.hessian_raw)) < 1e-10


def test_symmetry_drift_bounded():
    for system, y0, T in [
        (ho3(), HO3_Y0 / 10.0, TWO_PI),
        (random_poly_system(6, seed=13), np.random.default_rng(14).standard_normal(6), 0.2),
    ]:
        d = system.dim
        rng = np.random.default_rng(15)
        h0 = rng.standard_normal((d, d))
        h0 = h0 + h0.T
        sig = rng.standard_normal(d)
        end = integrate(system, y0, 0.0, T, STANDARD).endpoint
        joint = dp_system(system)
        back = integrate(joint, DpState(end, sig, h0).flatten(), T, 0.0, STANDARD)
        out = DpState.split(back.endpoint, d)
        assert np.max(np.abs(out.h - out.h.T)) < 100.0 * (STANDARD.rtol + STANDARD.atol)


def test_linear_flow_tangent_transform():
    # For linear F the backward h-evolution equals J^T h(T) J.
    rng = np.random.default_rng(16)
    a = rng.standard_normal((4, 4))
    sys_a = linear_system(a)
    y0 = rng.standard_normal(4)
    h_end = rng.standard_normal((4, 4))
    h_end = h_end + h_end.T
    end = integrate(sys_a, y0, 0.0, 0.7, TIGHT).endpoint
    joint = dp_system(sys_a)
    back = integrate(joint, DpState(end, np.zeros(4), h_end).flatten(),
                     0.7, 0.0, TIGHT)
    out = DpState.split(back.endpoint, 4)
    jmat = transition_matrix(sys_a, y0, 0.0, 0.7, TIGHT)
    assert np.max(np.abs(out.h - jmat.T @ h_end @ jmat)) < 1e-6


def test_dp_state_validation():
    from hessode.errors import DimensionMismatch
    with pytest.raises(DimensionMismatch):
        DpState(np.zeros(3), np.zeros(2), np.zeros((3, 3)))
    with pytest.raises(DimensionMismatch):
        DpState.split(np.zeros(10), 3)
