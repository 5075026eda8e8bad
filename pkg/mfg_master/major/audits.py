"""
Major Audits Module

This module provides the report-only checks of the major-minor system: the
N-agreement of the major splitting scheme in the joint norm, the growth of
the joint norm of the x0 HJ system with the horizon, and the Lipschitz
quotients of the x0 gradients in x0 and in m.
"""

from itertools import combinations
from typing import Dict, List, Optional, Sequence

import numpy as np

from mfg_master.errors import BudgetExceededError
from mfg_master.major.derivatives import solve_major_system
from mfg_master.major.hj_system import terminal_pair
from mfg_master.major.scheme import MajorPair, MajorScheme, joint_norm
from mfg_master.measures.grid import GridDensity
from mfg_master.measures.transport import wasserstein1
from mfg_master.mfg.scenario import Scenario
from mfg_master.pde.operators import discrete_lipschitz, spectral_derivative
from mfg_master.splitting.studies import cauchy_rows
from mfg_master.types import CauchyTable, MajorGrowthReport, MajorLipschitzReport, SchemeCounters
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)


def pair_distance(first: MajorPair, second: MajorPair) -> float:
    """Joint norm of the difference of two pairs."""
    return joint_norm(first.u0 - second.u0, first.u - second.u)


def major_agreement(
    scenario: Scenario,
    ns: Sequence[int],
    samples: Sequence[GridDensity],
    budget: Optional[int] = None,
) -> CauchyTable:
    """
    Cauchy table of the major splitting pair at t = 0 in the joint norm.

    Args:
        scenario (Scenario): Model data.
        ns (Sequence[int]): Ascending values of N.
        samples (Sequence[GridDensity]): Sample densities.
        budget (Optional[int]): MFG-solve budget per N.

    Returns:
        CauchyTable: Rows, sample count, completeness flag and counters per N.
    """
    ns = [int(n) for n in ns]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError(f"agreement study needs at least two ascending N, got {ns}")
    pairs: List[List[MajorPair]] = []
    counters: Dict[str, SchemeCounters] = {}
    complete = True
    for n in ns:
        scheme = MajorScheme(scenario, n, budget)
        try:
            pairs.append([scheme.evaluate(0, m) for m in samples])
        except BudgetExceededError:
            complete = False
            counters[str(n)] = scheme.counters()
            break
        counters[str(n)] = scheme.counters()
        logger.info(f"Major scheme N={n}: {scheme.mfg_solves} MFG solves")
    errors = [
        max(pair_distance(a, b) for a, b in zip(coarse, fine))
        for coarse, fine in zip(pairs, pairs[1:])
    ]
    return {
        "rows": cauchy_rows(ns, errors),
        "samples": len(samples),
        "complete": complete,
        "counters": counters,
    }


def joint_norm_growth(scenario: Scenario, m: GridDensity, durations: Sequence[float]) -> MajorGrowthReport:
    """
    sup_t of the joint norm of (U0, U) on [0, tau] for several horizons tau.

    Fits the smallest C with sup_t |(U0, U)(t)| <= |(G0, G)| + C tau.

    Args:
        scenario (Scenario): Model data; the x0 HJ system runs with unit coefficients.
        m (GridDensity): Frozen density.
        durations (Sequence[float]): Horizons tau.

    Returns:
        MajorGrowthReport: Norm per horizon, terminal norm, fitted constant.
    """
    u0, u = terminal_pair(scenario, m)
    terminal_norm = joint_norm(u0, u)
    norms: List[float] = []
    constant = 0.0
    for tau in durations:
        solution = solve_major_system(scenario, m, 0.0, float(tau))
        sup = max(joint_norm(solution.u0.snapshots[k], solution.u[k]) for k in range(solution.mesh.steps + 1))
        norms.append(sup)
        constant = max(constant, (sup - terminal_norm) / float(tau))
    logger.info(f"Joint-norm growth over {len(norms)} horizons: fitted constant {constant:.3e}")
    return {
        "durations": [float(tau) for tau in durations],
        "joint_norms": norms,
        "terminal_norm": terminal_norm,
        "fitted_constant": max(constant, 0.0),
    }


def major_lipschitz_audit(scheme: MajorScheme, samples: Sequence[GridDensity]) -> MajorLipschitzReport:
    """
    Lipschitz quotients of D_x0 U0 and D_x0 U at t = 0.

    The x0 quotient is the largest neighbour slope of D_x0 U0 over the x0
    grid; the measure quotients divide sup differences by W1 over all sample
    pairs.

    Args:
        scheme (MajorScheme): Evaluator of the pair.
        samples (Sequence[GridDensity]): At least two distinct densities.

    Returns:
        MajorLipschitzReport: The three quotients.
    """
    if len(samples) < 2:
        raise ValueError(f"Lipschitz audit needs at least two densities, got {len(samples)}")
    grid0 = scheme.scenario.major_grid
    gradients0 = []
    mixed = []
    x0_quotient = 0.0
    for m in samples:
        pair = scheme.evaluate(0, m)
        du0 = spectral_derivative(pair.u0, grid0)
        gradients0.append(du0)
        mixed.append(spectral_derivative(pair.u.T, grid0))
        x0_quotient = max(x0_quotient, discrete_lipschitz(du0, grid0))
    measure_quotient = 0.0
    mixed_quotient = 0.0
    for i, j in combinations(range(len(samples)), 2):
        distance = wasserstein1(samples[i], samples[j])
        if distance <= 0.0:
            continue
        measure_quotient = max(measure_quotient, float(np.max(np.abs(gradients0[i] - gradients0[j]))) / distance)
        mixed_quotient = max(mixed_quotient, float(np.max(np.abs(mixed[i] - mixed[j]))) / distance)
    return {
        "samples": len(samples),
        "x0_quotient": x0_quotient,
        "measure_quotient": measure_quotient,
        "mixed_quotient": mixed_quotient,
    }
