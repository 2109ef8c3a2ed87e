"""hessode: gradients and Hessians through time-reversible ODEs.

Three mutually cross-validating differentiation routes through ODE
integration (joint backward "differential programming" evolution,
per-row backprop-of-backprop, finite differencing), applied to
orbit-nonclosure problems for benchmark Hamiltonian systems, plus a
checker for the tensor-calculus dependency notation used to describe the
constructions.
"""

from . import backend
from .adjoint import CostateState, backprop_gradient, obp_system
from .bp2 import bp2_hessian, hessian_row, nc_gradient
from .dp import DpState, dp_hessian_endpoint, dp_hessian_two_point, dp_system
from .fd import FdConfig, fd_grad, fd_hessian, verified_grad
from .ode import (IntegratorConfig, IntegratorMethod, OdeSystem, Trajectory,
                  integrate, reverse_check)
from .orbit import (OrbitProblem, OrbitReport, deform_and_reconverge, eigh,
                    find_orbit, flat_directions)
from .systems import energy, ho3, kepler, p3bp, random_poly_system, system_by_tag
from .twopoint import HessianMethod, HessianResult, TwoPointLoss, endpoint_loss, l2_loss

__version__ = "0.1.0"

__all__ = [
    "backend",
    "CostateState", "backprop_gradient", "obp_system",
    "bp2_hessian", "hessian_row", "nc_gradient",
    "DpState", "dp_hessian_endpoint", "dp_hessian_two_point", "dp_system",
    "FdConfig", "fd_grad", "fd_hessian", "verified_grad",
    "IntegratorConfig", "IntegratorMethod", "OdeSystem", "Trajectory",
    "integrate", "reverse_check",
    "OrbitProblem", "OrbitReport", "deform_and_reconverge", "eigh",
    "find_orbit", "flat_directions",
    "energy", "ho3", "kepler", "p3bp", "random_poly_system", "system_by_tag",
    "HessianMethod", "HessianResult", "TwoPointLoss", "endpoint_loss", "l2_loss",
    "__version__",
]
