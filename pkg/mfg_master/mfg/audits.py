"""
MFG Audits Module

Report-only checks of the stability estimates of the MFG system and its
first-order linearization, and of the flow (dynamic programming) property of
the value function.
"""

from typing import Optional

import numpy as np

from mfg_master.measures.grid import GridDensity
from mfg_master.measures.transport import kantorovich_rows, wasserstein2
from mfg_master.mfg.linearized import NO_SOURCES, solve_linearized1
from mfg_master.mfg.scenario import Scenario
from mfg_master.mfg.sources import X0Sources
from mfg_master.mfg.system import MFGSolution, solve_mfg
from mfg_master.types import DualityAuditReport, StabilityAuditReport
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)


def flow_consistency_gap(solution: MFGSolution, k: int) -> float:
    """
    Sup-norm gap between u(t_k) and a fresh solve started from (t_k, m(t_k)).

    The fresh solve is run on the same mesh points, so the gap measures the
    fixed-point tolerance only.
    """
    mesh = solution.mesh
    if not 0 <= k < mesh.steps:
        raise ValueError(f"restart index must lie in [0, {mesh.steps}), got {k}")
    restart = solve_mfg(
        solution.scenario,
        float(mesh.times[k]),
        solution.density(k),
        solution.x0,
        solution.terminal,
        t1=mesh.t1,
    )
    return float(np.max(np.abs(restart.u.initial - solution.u.snapshots[k])))


def stability_audit(
    scenario: Scenario,
    m0_first: GridDensity,
    m0_second: GridDensity,
    x0_first: float = 0.0,
    x0_second: float = 0.0,
    t0: float = 0.0,
) -> StabilityAuditReport:
    """
    Compare two MFG flows started from different data.

    Fits the smallest C with
    sup_t d2(m1, m2) <= (1 + C T) d2(m0_1, m0_2) + C T |x0_1 - x0_2|.

    Returns:
        StabilityAuditReport: Measured distances and the fitted constant.
    """
    first = solve_mfg(scenario, t0, m0_first, x0_first)
    second = solve_mfg(scenario, t0, m0_second, x0_second)
    initial = wasserstein2(m0_first, m0_second)
    sup_distance = max(
        wasserstein2(first.density(k), second.density(k)) for k in range(first.mesh.steps + 1)
    )
    horizon = scenario.horizon - t0
    x0_gap = abs(x0_first - x0_second)
    denominator = horizon * (initial + x0_gap)
    fitted = max(0.0, (sup_distance - initial) / denominator) if denominator > 0.0 else 0.0
    logger.info(f"Stability audit: d2(m0) {initial:.3e}, sup_t d2 {sup_distance:.3e}, C {fitted:.3e}")
    return {
        "horizon": horizon,
        "initial_distance": initial,
        "x0_gap": x0_gap,
        "sup_distance": sup_distance,
        "fitted_constant": fitted,
    }


def duality_audit(
    around: MFGSolution,
    rho0: np.ndarray,
    sources: Optional[X0Sources] = None,
) -> DualityAuditReport:
    """
    Growth of the linearized density in the exact k = 1 dual norm.

    ``rho0`` must have zero mass. Fits the smallest C with
    sup_t ||rho(t)||_{-1} <= (1 + C T) ||rho0||_{-1} + C T (source size).

    Returns:
        DualityAuditReport: Measured norms and the fitted constant.
    """
    grid = around.m.grid
    linearized = solve_linearized1(around, rho0, sources.as_linearized() if sources else NO_SOURCES)
    norms = kantorovich_rows(linearized.rho.snapshots, grid.spacing)
    source_norm = 0.0
    if sources is not None:
        steps = range(around.mesh.steps + 1)
        source_norm = max(
            max(float(np.max(np.abs(sources.r1(k)))) for k in steps),
            max(float(np.max(np.abs(sources.r2_drift(k)))) for k in steps),
            float(np.max(np.abs(sources.r3))),
        )
    horizon = around.mesh.t1 - around.mesh.t0
    initial, sup_norm = float(norms[0]), float(np.max(norms))
    denominator = horizon * (initial + source_norm)
    fitted = max(0.0, (sup_norm - initial) / denominator) if denominator > 0.0 else 0.0
    return {
        "horizon": horizon,
        "k": 1,
        "initial_norm": initial,
        "sup_norm": sup_norm,
        "source_norm": source_norm,
        "fitted_constant": fitted,
    }
