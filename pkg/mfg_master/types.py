"""
MFG Master Type Definitions

This module provides TypedDict definitions for every report produced by the
audits, studies and CLI commands, so that the JSON artifacts have a checked
shape.
"""

import sys
from typing import Dict, List, Optional, TypedDict

# NotRequired is available in typing from Python 3.11+
if sys.version_info >= (3, 11):
    from typing import NotRequired
else:
    try:
        from typing_extensions import NotRequired
    except ImportError:
        NotRequired = Optional  # type: ignore


# =============================================================================
# Parabolic Audits
# =============================================================================

class BernsteinAuditReport(TypedDict):
    """Measured derivative bounds of an HJ trajectory against its terminal data."""
    horizon: float
    sup_lipschitz: float
    terminal_lipschitz: float
    fitted_constant: float
    gradient_cap: float
    order_norms: List[float]
    terminal_order_norms: List[float]
    order_constants: List[float]


class FPConvergenceRow(TypedDict):
    """Gaussian-spreading error of the Fokker-Planck solver at one grid size."""
    cells: int
    error: float
    max_mass_deviation: float
    max_mass_step_drift: float
    min_value: float
    order: NotRequired[Optional[float]]


# =============================================================================
# MFG Audits
# =============================================================================

class StabilityAuditReport(TypedDict):
    """Dependence of the MFG flow on its initial density and major state."""
    horizon: float
    initial_distance: float
    x0_gap: float
    sup_distance: float
    fitted_constant: float


class DualityAuditReport(TypedDict):
    """Growth of the first-order linearized density in the k = 1 dual norm."""
    horizon: float
    k: int
    initial_norm: float
    sup_norm: float
    source_norm: float
    fitted_constant: float


class LipschitzAuditReport(TypedDict):
    """Sampled Lipschitz-in-measure quotients of U against the sampled D_m U bound."""
    samples: int
    max_quotient: float
    derivative_bound: float
    holds: bool


class ResidualReport(TypedDict):
    """Term-by-term residual of the first-order master equation at one (t0, x0, m0)."""
    time_derivative: float
    diffusion: float
    hamiltonian: float
    nonlocal_diffusion: float
    nonlocal_drift: float
    total: float
    delta: float
    cells: int
    time_step: float


# =============================================================================
# Splitting and Major-Player Studies
# =============================================================================

class SchemeCounters(TypedDict):
    """Instrumentation of a scheme run."""
    evaluations: int
    mfg_solves: int
    cache_hits: int
    cache_misses: int
    cache_size: int


class CauchyRow(TypedDict):
    """Sup distance between the schemes of two consecutive N."""
    n_low: int
    n_high: int
    error: float
    order: NotRequired[Optional[float]]


class CauchyTable(TypedDict):
    """Cauchy table over a list of N."""
    rows: List[CauchyRow]
    samples: int
    complete: bool
    counters: Dict[str, SchemeCounters]


class StochasticReport(TypedDict):
    """Monte-Carlo consistency of a master evaluator along the common-noise flow."""
    mean_residual: float
    standard_error: float
    paths: int
    steps: int
    seed: int


class MajorGrowthReport(TypedDict):
    """Joint norm of the x0 HJ system solution at several durations."""
    durations: List[float]
    joint_norms: List[float]
    terminal_norm: float
    fitted_constant: float


class MajorLipschitzReport(TypedDict):
    """Sampled Lipschitz quotients of D_x0 U0 and D_x0 D_x U across (x0, m)."""
    samples: int
    x0_quotient: float
    measure_quotient: float
    mixed_quotient: float
