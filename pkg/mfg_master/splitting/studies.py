"""
Splitting Studies Module

This module provides the N-convergence (Cauchy) study of the splitting
scheme and the Monte-Carlo consistency check of a master evaluator along
the common-noise McKean-Vlasov flow.
"""

import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from mfg_master.errors import BudgetExceededError
from mfg_master.measures.grid import GridDensity, pushforward_translate
from mfg_master.mfg.scenario import Scenario
from mfg_master.pde.fokker_planck import solve_fp_forward
from mfg_master.pde.mesh import TimeMesh, diffusion_values
from mfg_master.pde.operators import spectral_derivative
from mfg_master.splitting.scheme import SplittingScheme
from mfg_master.types import CauchyRow, CauchyTable, SchemeCounters, StochasticReport
from mfg_master.utils.logger import get_logger
from mfg_master.utils.rng import task_rng

logger = get_logger(__name__)

# U(t, m) over the x grid.
MasterEvaluator = Callable[[float, GridDensity], np.ndarray]


def cauchy_rows(ns: Sequence[int], errors: Sequence[float]) -> List[CauchyRow]:
    """One row per consecutive pair, with the observed order between successive rows."""
    rows: List[CauchyRow] = []
    for index, error in enumerate(errors):
        row: CauchyRow = {"n_low": int(ns[index]), "n_high": int(ns[index + 1]), "error": float(error)}
        if index > 0:
            previous = errors[index - 1]
            ratio = ns[index + 1] / ns[index]
            if previous > 0.0 and error > 0.0 and ratio > 1.0:
                row["order"] = math.log(previous / error) / math.log(ratio)
            else:
                row["order"] = None
        rows.append(row)
    return rows


def convergence_study(
    scenario: Scenario,
    ns: Sequence[int],
    samples: Sequence[GridDensity],
    x0: float = 0.0,
    budget: Optional[int] = None,
) -> CauchyTable:
    """
    Cauchy table of sup |U^{N_i}(0) - U^{N_{i+1}}(0)| over the sampled densities and the full x grid.

    Each N runs with its own cache and budget. When a budget is exhausted the
    table stops at the last complete row and is flagged incomplete.

    Args:
        scenario (Scenario): Model data.
        ns (Sequence[int]): Ascending values of N.
        samples (Sequence[GridDensity]): Sample densities.
        x0 (float, optional): Major state. Defaults to 0.0.
        budget (Optional[int]): MFG-solve budget per N.

    Returns:
        CauchyTable: Rows, sample count, completeness flag and counters per N.
    """
    ns = [int(n) for n in ns]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError(f"convergence study needs at least two ascending N, got {ns}")
    values: List[np.ndarray] = []
    counters: Dict[str, SchemeCounters] = {}
    complete = True
    for n in ns:
        scheme = SplittingScheme(scenario, n, budget)
        try:
            values.append(np.stack([scheme.evaluate(0, m, x0) for m in samples]))
        except BudgetExceededError:
            counters[str(n)] = scheme.counters()
            complete = False
            break
        counters[str(n)] = scheme.counters()
        logger.info(f"Splitting scheme N={n}: {scheme.mfg_solves} MFG solves, hit rate {scheme.cache.hit_rate():.2f}")
    errors = [float(np.max(np.abs(b - a))) for a, b in zip(values, values[1:])]
    return {
        "rows": cauchy_rows(ns, errors),
        "samples": len(samples),
        "complete": complete,
        "counters": counters,
    }


def _common_noise_gradient(master: MasterEvaluator, t: float, m: GridDensity) -> np.ndarray:
    """d/dz U(t, x, (id + z)# m) at z = 0 by central differences over one cell."""
    h = m.grid.spacing
    ahead = master(t, pushforward_translate(m, -h))
    behind = master(t, pushforward_translate(m, h))
    return (ahead - behind) / (2.0 * h)


def stochastic_consistency(
    scenario: Scenario,
    master: MasterEvaluator,
    m0: GridDensity,
    path_count: int,
    seed: int,
    times: Optional[Sequence[float]] = None,
    x0: float = 0.0,
) -> StochasticReport:
    """
    Monte-Carlo check of the backward stochastic HJ equation along the common-noise flow.

    Each path runs the McKean-Vlasov flow by Euler steps: one Fokker-Planck
    step with drift H_p(x0, x, U_x(t, x, m_t), m_t), then a common translation
    by sqrt(2 a0) dW. Along the path u_t = U(t, ., m_t) must satisfy

        du = [-(a + a0) u_xx + H(x0, x, u_x, m_t) - sqrt(2 a0) v_x] dt + v dW,

    with v = sqrt(2 a0) d/dz U(t, ., (id + z)# m_t) at z = 0. The report gives
    the sup over x of the sample mean of the accumulated residual and its
    Monte-Carlo standard error.

    Args:
        scenario (Scenario): Model data (a0 is the scenario's common noise).
        master (MasterEvaluator): U(t, m) over the x grid.
        m0 (GridDensity): Initial density.
        path_count (int): Number of common-noise paths.
        seed (int): Master seed; path p draws from the stream "paths/p".
        times (Optional[Sequence[float]]): Time grid (defaults to the scenario mesh of [0, T]).
        x0 (float, optional): Major state. Defaults to 0.0.

    Returns:
        StochasticReport: Mean residual, standard error, path and step counts, seed.
    """
    if path_count < 1:
        raise ValueError(f"path count must be positive, got {path_count}")
    grid = scenario.grid
    times = np.asarray(scenario.mesh(0.0).times if times is None else times, dtype=float)
    a0 = scenario.common_noise
    sigma = math.sqrt(2.0 * a0)
    residuals = np.empty((path_count, grid.cells))
    for path in range(path_count):
        rng = task_rng(seed, f"paths/{path}")
        m = m0
        u = master(float(times[0]), m)
        accumulated = np.zeros(grid.cells)
        for k in range(len(times) - 1):
            t, t_next = float(times[k]), float(times[k + 1])
            dt = t_next - t
            frozen = scenario.hamiltonian.frozen(m, grid.nodes, x0)
            u_x = spectral_derivative(u, grid)
            v = sigma * _common_noise_gradient(master, t, m) if a0 > 0.0 else np.zeros(grid.cells)
            a_values = diffusion_values(scenario.diffusion, t, grid)
            drift_term = (
                -(a_values + a0) * spectral_derivative(u, grid, order=2)
                + frozen.value(u_x)
                - sigma * spectral_derivative(v, grid)
            )
            dw = float(rng.normal(0.0, math.sqrt(dt)))
            step = solve_fp_forward(
                scenario.diffusion,
                lambda _: frozen.dp(u_x),
                m,
                TimeMesh(t, t_next, 1),
                scenario.cfl_limit,
            )
            m = step.density_at(1)
            if a0 > 0.0:
                m = pushforward_translate(m, -sigma * dw)
            u_next = master(t_next, m)
            accumulated += u_next - u - dt * drift_term - v * dw
            u = u_next
        residuals[path] = accumulated
    mean = residuals.mean(axis=0)
    spread = residuals.std(axis=0, ddof=1) if path_count > 1 else np.zeros(grid.cells)
    report: StochasticReport = {
        "mean_residual": float(np.max(np.abs(mean))),
        "standard_error": float(np.max(spread) / math.sqrt(path_count)),
        "paths": path_count,
        "steps": len(times) - 1,
        "seed": int(seed),
    }
    logger.info(
        f"Stochastic consistency over {path_count} paths: mean residual {report['mean_residual']:.3e}, "
        f"standard error {report['standard_error']:.3e}"
    )
    return report
