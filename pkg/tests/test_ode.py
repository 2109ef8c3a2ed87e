import numpy as np
import pytest

from hessode import (IntegratorConfig, IntegratorMethod, OdeSystem, integrate,
                     reverse_check, ho3, random_poly_system)
from hessode.errors import DimensionMismatch, MaxStepsExceeded, NonFiniteState

from helpers import HO3_Y0, TWO_PI, TIGHT, expm_ref, linear_system


def test_zero_field_endpoint_exact():
    sys0 = OdeSystem(dim=2, f=lambda t, y: np.zeros(2))
    traj = integrate(sys0, [3.0, -1.0], 0.0, 5.0)
    assert np.array_equal(traj.endpoint, [3.0, -1.0])


def test_empty_interval_returns_start_exactly():
    sys0 = OdeSystem(dim=2, f=lambda t, y: y)
    traj = integrate(sys0, [1.5, 2.5], 2.0, 2.0)
    assert np.array_equal(traj.endpoint, [1.5, 2.5])
    assert traj.n_accepted == 0


def test_exponential_decay_against_closed_form():
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    traj = integrate(sys1, [1.0], 0.0, 1.0, TIGHT)
    assert abs(traj.endpoint[0] - np.exp(-1.0)) < 1e-8


def test_ho3_period_return():
    traj = integrate(ho3(), HO3_Y0, 0.0, TWO_PI, TIGHT)
    assert float(np.sum((traj.endpoint - HO3_Y0) ** 2)) < 1e-16


def test_linear_system_matches_matrix_exponential():
    rng = np.random.default_rng(42)
    a = rng.standard_normal((5, 5))
    sys_a = linear_system(a)
    y0 = rng.standard_normal(5)
    traj = integrate(sys_a, y0, 0.0, 1.0, IntegratorConfig(rtol=1e-10, atol=1e-10))
    ref = expm_ref(a) @ y0
    assert np.max(np.abs(traj.endpoint - ref)) < 1e-8


def test_rk4_order_ratio():
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    exact = np.exp(-1.0)

    def err(step):
        cfg = IntegratorConfig(method=IntegratorMethod.RK4_FIXED, step=step)
        return abs(integrate(sys1, [1.0], 0.0, 1.0, cfg).endpoint[0] - exact)

    ratio = err(0.1) / err(0.05)
    assert 12.0 <= ratio <= 20.0


def test_backward_integration_direct():
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    traj = integrate(sys1, [np.exp(-1.0)], 1.0, 0.0, TIGHT)
    assert abs(traj.endpoint[0] - 1.0) < 1e-8


def test_reverse_check_zero_field():
    sys0 = OdeSystem(dim=3, f=lambda t, y: np.zeros(3))
    assert reverse_check(sys0, [1.0, 2.0, 3.0], 0.0, 4.0) == 0.0


def test_reverse_check_ho3():
    assert reverse_check(ho3(), HO3_Y0, 0.0, TWO_PI, TIGHT) < 1e-8


def test_reverse_check_random_quadratic():
    sys_q = random_poly_system(8, seed=3)
    y0 = np.random.default_rng(0).standard_normal(8)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-10)
    assert reverse_check(sys_q, y0, 0.0, 0.2, cfg) < 1e-7


def test_direction_symmetry_linear():
    rng = np.random.default_rng(7)
    skew = rng.standard_normal((4, 4))
    skew = skew - skew.T          # time-reversible rotation flow
    sys_a = linear_system(skew)
    y0 = rng.standard_normal(4)
    cfg = IntegratorConfig(rtol=1e-9, atol=1e-9)
    drift = reverse_check(sys_a, y0, 0.0, 3.0, cfg)
    bound = 10.0 * (cfg.rtol * float(np.max(np.abs(y0))) + cfg.atol)
    assert drift < bound


def test_dense_samples_cover_interval():
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-10, dense_samples=33)
    traj = integrate(sys1, [1.0], 0.0, 2.0, cfg)
    assert len(traj.times) == 33
    assert traj.times[0] == 0.0 and traj.times[-1] == 2.0
    # interpolated samples follow the analytic solution closely
    assert np.max(np.abs(traj.states[:, 0] - np.exp(-traj.times))) < 1e-7
    assert np.array_equal(traj.states[-1], traj.endpoint)


def test_dimension_mismatch():
    sys1 = OdeSystem(dim=2, f=lambda t, y: y)
    with pytest.raises(DimensionMismatch):
        integrate(sys1, [1.0], 0.0, 1.0)


def test_finite_time_blowup_raises_max_steps():
    sys_b = OdeSystem(dim=1, f=lambda t, y: y * y)
    with pytest.raises(MaxStepsExceeded):
        integrate(sys_b, [1.0], 0.0, 2.0, IntegratorConfig(rtol=1e-8, atol=1e-8))


def test_non_finite_rate_raises():
    sys_n = OdeSystem(dim=1, f=lambda t, y: np.array([np.nan]))
    with pytest.raises(NonFiniteState):
        integrate(sys_n, [1.0], 0.0, 1.0)


def test_max_steps_budget():
    sys1 = OdeSystem(dim=1, f=lambda t, y: -y)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-10, max_steps=3)
    with pytest.raises(MaxStepsExceeded):
        integrate(sys1, [1.0], 0.0, 100.0, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=2.0)
    with pytest.raises(ValueError):
        IntegratorConfig(atol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(step=-1.0)


def test_fd_fallbacks_installed():
    sys1 = OdeSystem(dim=2, f=lambda t, y: np.array([y[1] ** 2, -y[0]]))
    y = np.array([0.7, -0.3])
    v = np.array([0.2, 0.5])
    # analytic: J = [[0, 2 y1], [-1, 0]]
    jac = np.array([[0.0, 2 * y[1]], [-1.0, 0.0]])
    assert np.max(np.abs(sys1.jvp(y, v) - jac @ v)) < 1e-6
    assert np.max(np.abs(sys1.vjp(y, v) - v @ jac)) < 1e-6
    # sovjp: only F_0,11 = 2 nonzero
    a = np.array([1.0, 2.0])
    b = np.array([3.0, 4.0])
    expect = np.array([0.0, a[0] * b[1] * 2.0])
    assert np.max(np.abs(sys1.sovjp(y, a, b) - expect)) < 1e-4
