"""
Evaluators of the first-order and linear second-order master equations.
"""

from mfg_master.master.first_order import (
    FlatDerivative,
    LionsDerivative,
    d2u0_dm2,
    d2u_dm2,
    d2x0_u,
    delta_u0_delta_m,
    delta_u_delta_m,
    dx0_delta_u,
    dx0_u,
    dx0_u0,
    eval_u,
    eval_u0,
    lions_derivative,
    lipschitz_in_m_audit,
    master_residual_via_flow,
)
from mfg_master.master.linear_second import (
    LinearMasterFunctional,
    WrappedHeatKernel,
    dm_linear_master,
    eval_linear_master,
    heat_kernel,
    semigroup_check,
)

__all__ = [
    "FlatDerivative",
    "LionsDerivative",
    "eval_u",
    "eval_u0",
    "delta_u_delta_m",
    "delta_u0_delta_m",
    "dx0_u",
    "dx0_u0",
    "d2u_dm2",
    "d2u0_dm2",
    "d2x0_u",
    "dx0_delta_u",
    "lions_derivative",
    "master_residual_via_flow",
    "lipschitz_in_m_audit",
    "WrappedHeatKernel",
    "heat_kernel",
    "eval_linear_master",
    "dm_linear_master",
    "LinearMasterFunctional",
    "semigroup_check",
]
