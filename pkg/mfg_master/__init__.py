"""
MFG Master - splitting-method solvers for mean field game master equations.

This package solves the coupled MFG system on the one-dimensional torus,
evaluates the first-order and linear second-order master equations with
their measure derivatives, composes them with a splitting scheme into
approximations of the second-order master equation, handles the major-minor
player system, and audits the a-priori estimates numerically.

Example:
    from mfg_master.cli.scenarios import default_scenario
    from mfg_master.master import eval_u
    from mfg_master.splitting import build_scheme, eval_un
"""

__version__ = "0.1.0"
__author__ = "MFG Master Contributors"

# Re-export report types for convenient access
from mfg_master.types import (
    BernsteinAuditReport,
    CauchyRow,
    CauchyTable,
    DualityAuditReport,
    FPConvergenceRow,
    LipschitzAuditReport,
    MajorGrowthReport,
    MajorLipschitzReport,
    ResidualReport,
    SchemeCounters,
    StabilityAuditReport,
    StochasticReport,
)

__all__ = [
    "__version__",
    "__author__",
    "BernsteinAuditReport",
    "FPConvergenceRow",
    "StabilityAuditReport",
    "DualityAuditReport",
    "LipschitzAuditReport",
    "ResidualReport",
    "SchemeCounters",
    "CauchyRow",
    "CauchyTable",
    "StochasticReport",
    "MajorGrowthReport",
    "MajorLipschitzReport",
]
