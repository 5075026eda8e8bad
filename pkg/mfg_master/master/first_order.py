"""
First-Order Master Evaluators Module

This module provides on-demand evaluation of the solution U(t0, x0, x, m0)
of the first-order master equation and of the scalar U0(t0, x0, m0), with
all their measure and x0 derivatives, through the MFG system and its
linearizations started at (t0, m0). Nothing is stored as a function on
measure space: every call solves the characteristics it needs.

Measure directions are split as rho0 = (rho0 - c m0) + c m0 with c the
mass of rho0; the linearized systems run on the zero-mass part and the
subtracted mass c is recorded, which enforces int dU/dm(x, m, y) m(dy) = 0.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from mfg_master.measures.grid import (
    GridDensity,
    GridFunction,
    GridSignedMeasure,
    dirac_direction,
    zero_mass_part,
)
from mfg_master.measures.transport import wasserstein1
from mfg_master.mfg.functionals import MeasureFunctional, ScalarMeasureFunctional
from mfg_master.mfg.linearized import LinearizedSolution, solve_linearized1, solve_linearized2
from mfg_master.mfg.scenario import Scenario
from mfg_master.mfg.sources import (
    build_mixed_tilde_sources,
    build_x0_sources,
    build_x0x0_tilde_sources,
)
from mfg_master.mfg.system import MFGSolution, solve_mfg
from mfg_master.pde.mesh import diffusion_values
from mfg_master.pde.operators import spectral_derivative
from mfg_master.types import LipschitzAuditReport, ResidualReport
from mfg_master.utils.config import get_config_value
from mfg_master.utils.logger import get_logger
from mfg_master.utils.parallel import ordered_map

logger = get_logger(__name__)

# Default residual step as a fraction of the horizon.
RESIDUAL_STEP_FRACTION = 1e-3

# Relative slack of the Lipschitz audit for the y differencing of D_mU.
LIPSCHITZ_SLACK = 1.05


@dataclass(frozen=True, eq=False)
class FlatDerivative:
    """
    dU/dm(t0, x0, ., m0)(rho0) with the bookkeeping of the zero-mass split.

    Attributes:
        function (GridFunction): The normalized flat derivative over x.
        mass (float): Mass c subtracted from the direction (c m0 contributes nothing).
        linearized (Optional[LinearizedSolution]): The solve that produced it
            (None at the horizon, where the terminal is differentiated directly).
    """

    function: GridFunction
    mass: float
    linearized: Optional[LinearizedSolution] = None

    @property
    def values(self) -> np.ndarray:
        return self.function.values


@dataclass(frozen=True)
class LionsDerivative:
    """
    The kernel K[i, j] = dU/dm(t0, x0, x_i, m0, y_j) over a full y sweep.

    Attributes:
        kernel (np.ndarray): Shape (cells, cells), x along axis 0, y along axis 1.
        spacing (float): Grid spacing used for the y differences.
    """

    kernel: np.ndarray
    spacing: float

    def d_m(self) -> np.ndarray:
        """D_m U(x_i, y_j) by central differences in y."""
        k = self.kernel
        return (np.roll(k, -1, axis=1) - np.roll(k, 1, axis=1)) / (2.0 * self.spacing)

    def d_m_dy(self) -> np.ndarray:
        """d/dy D_m U(x_i, y_j) by second central differences in y."""
        k = self.kernel
        return (np.roll(k, -1, axis=1) - 2.0 * k + np.roll(k, 1, axis=1)) / self.spacing**2


def _at_horizon(scenario: Scenario, t0: float) -> bool:
    if t0 < 0.0 or t0 > scenario.horizon * (1.0 + 1e-12):
        raise ValueError(f"t0 must lie in [0, {scenario.horizon}], got {t0}")
    return abs(scenario.horizon - t0) <= 1e-12 * max(1.0, scenario.horizon)


def _require_before_horizon(scenario: Scenario, t0: float) -> None:
    if _at_horizon(scenario, t0):
        raise ValueError(f"t0 must lie in [0, {scenario.horizon}) for this derivative, got {t0}")


def reference_solution(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    terminal: Optional[MeasureFunctional] = None,
    around: Optional[MFGSolution] = None,
) -> MFGSolution:
    """The MFG solve at (t0, x0, m0), reusing ``around`` when given."""
    if around is not None:
        return around
    _require_before_horizon(scenario, t0)
    return solve_mfg(scenario, t0, m0, x0, terminal)


def _zero_mass(m0: GridDensity, rho0: np.ndarray) -> Tuple[np.ndarray, float]:
    part, mass = zero_mass_part(GridSignedMeasure(m0.grid, rho0), m0)
    return np.array(part.values), mass


def eval_u(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    terminal: Optional[MeasureFunctional] = None,
) -> GridFunction:
    """
    U(t0, x0, ., m0) as the value function at t0 of the MFG system started from (t0, m0).

    Args:
        scenario (Scenario): Model data.
        t0 (float): Evaluation time in [0, T].
        x0 (float): Major state.
        m0 (GridDensity): Population density.
        terminal (Optional[MeasureFunctional]): Terminal G (defaults to the scenario's).

    Returns:
        GridFunction: U over the x grid.
    """
    terminal = terminal if terminal is not None else scenario.terminal
    if _at_horizon(scenario, t0):
        return terminal.as_function(m0, x0)
    return solve_mfg(scenario, t0, m0, x0, terminal).initial_value()


def eval_u0(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    major_terminal: Optional[ScalarMeasureFunctional] = None,
    terminal: Optional[MeasureFunctional] = None,
    around: Optional[MFGSolution] = None,
) -> float:
    """U0(t0, x0, m0) = G0(x0, m(T)) with m from the MFG solve at (t0, m0)."""
    major_terminal = major_terminal if major_terminal is not None else scenario.major_terminal
    if around is None and _at_horizon(scenario, t0):
        return major_terminal.value(m0, x0)
    solution = reference_solution(scenario, t0, x0, m0, terminal, around)
    return major_terminal.value(solution.terminal_density(), x0)


def delta_u_delta_m(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    rho0: np.ndarray,
    terminal: Optional[MeasureFunctional] = None,
    around: Optional[MFGSolution] = None,
) -> FlatDerivative:
    """
    Normalized flat derivative dU/dm(t0, x0, ., m0)(rho0).

    Solves the first-order linearized system without sources, started from the
    zero-mass part of rho0, and returns v(t0, .).

    Raises:
        MissingDerivativeError: If the terminal has no flat derivative.
        ConvergenceError: If a fixed point does not converge.
    """
    direction, mass = _zero_mass(m0, rho0)
    if around is None and _at_horizon(scenario, t0):
        terminal = terminal if terminal is not None else scenario.terminal
        return FlatDerivative(GridFunction(m0.grid, terminal.flat_derivative(m0, direction, x0)), mass)
    solution = reference_solution(scenario, t0, x0, m0, terminal, around)
    linearized = solve_linearized1(solution, direction)
    return FlatDerivative(linearized.v.function_at(0), mass, linearized)


def delta_u0_delta_m(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    rho0: np.ndarray,
    around: Optional[MFGSolution] = None,
) -> float:
    """dU0/dm(t0, x0, m0)(rho0) = dG0/dm(x0, m(T))(rho(T))."""
    major = scenario.major_terminal
    direction, _ = _zero_mass(m0, rho0)
    x0_points = np.array([x0])
    if around is None and _at_horizon(scenario, t0):
        return float(major.flat_derivative(m0, direction, x0_points)[0])
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    rho = solve_linearized1(solution, direction).rho.final
    return float(major.flat_derivative(solution.terminal_density(), rho, x0_points)[0])


def _x0_direction(solution: MFGSolution) -> LinearizedSolution:
    sources = build_x0_sources(solution, 1.0)
    return solve_linearized1(solution, np.zeros(solution.m.grid.cells), sources.as_linearized())


def dx0_u(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    around: Optional[MFGSolution] = None,
) -> GridFunction:
    """D_x0 U(t0, x0, ., m0): v(t0) of the linearized system with the x0 sources and rho0 = 0."""
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    return _x0_direction(solution).v.function_at(0)


def dx0_u0(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    around: Optional[MFGSolution] = None,
) -> float:
    """D_x0 U0 = D_x0 G0(x0, m(T)) + dG0/dm(x0, m(T))(rho(T)) with rho from the x0 direction."""
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    major = scenario.major_terminal
    final = solution.terminal_density()
    x0_points = np.array([x0])
    rho = _x0_direction(solution).rho.final
    return float(major.x0_derivative(final, x0_points)[0] + major.flat_derivative(final, rho, x0_points)[0])


def _second_measure_solution(
    solution: MFGSolution, m0: GridDensity, rho0: np.ndarray, rho0b: np.ndarray
) -> Tuple[LinearizedSolution, LinearizedSolution, LinearizedSolution]:
    first = solve_linearized1(solution, _zero_mass(m0, rho0)[0])
    second = solve_linearized1(solution, _zero_mass(m0, rho0b)[0])
    return first, second, solve_linearized2(first, second)


def d2u_dm2(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    rho0: np.ndarray,
    rho0b: np.ndarray,
    around: Optional[MFGSolution] = None,
) -> GridFunction:
    """
    Second flat derivative d2U/dm2(t0, x0, ., m0)(rho0, rho0b).

    Both directions are reduced to their zero-mass parts before the two
    first-order solves; w(t0) of the second-order system is returned.
    """
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    return _second_measure_solution(solution, m0, rho0, rho0b)[2].v.function_at(0)


def d2u0_dm2(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    rho0: np.ndarray,
    rho0b: np.ndarray,
    around: Optional[MFGSolution] = None,
) -> float:
    """d2G0/dm2(rho(T), rho'(T)) + dG0/dm(mu(T)) along the MFG flow."""
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    first, second, mixed = _second_measure_solution(solution, m0, rho0, rho0b)
    major = scenario.major_terminal
    final = solution.terminal_density()
    x0_points = np.array([x0])
    value = major.second_flat_derivative(final, first.rho.final, second.rho.final, x0_points)
    value = value + major.flat_derivative(final, mixed.rho.final, x0_points)
    return float(value[0])


def d2x0_u(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    around: Optional[MFGSolution] = None,
) -> GridFunction:
    """D2_x0 U(t0, x0, ., m0) from the second-order system with the x0-x0 sources."""
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    direction = _x0_direction(solution)
    tilde = build_x0x0_tilde_sources(direction, direction)
    return solve_linearized2(direction, direction, tilde).v.function_at(0)


def dx0_delta_u(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    rho0: np.ndarray,
    around: Optional[MFGSolution] = None,
) -> GridFunction:
    """D_x0 dU/dm(t0, x0, ., m0)(rho0) from the second-order system with the mixed sources."""
    solution = reference_solution(scenario, t0, x0, m0, around=around)
    x0_direction = _x0_direction(solution)
    measure_direction = solve_linearized1(solution, _zero_mass(m0, rho0)[0])
    tilde = build_mixed_tilde_sources(x0_direction, measure_direction)
    return solve_linearized2(x0_direction, measure_direction, tilde).v.function_at(0)


def lions_derivative(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    terminal: Optional[MeasureFunctional] = None,
    around: Optional[MFGSolution] = None,
) -> LionsDerivative:
    """
    Sweep dU/dm over single-cell directions delta_{y_j} for every grid node y_j.

    Costs one linearized solve per cell; the sweep is dispatched through the
    configured thread pool.
    """
    solution = reference_solution(scenario, t0, x0, m0, terminal, around)
    grid = m0.grid

    def column(j: int) -> np.ndarray:
        direction, _ = _zero_mass(m0, dirac_direction(grid, j).values)
        return solve_linearized1(solution, direction).v.initial

    columns = ordered_map(column, range(grid.cells))
    return LionsDerivative(kernel=np.stack(columns, axis=1), spacing=grid.spacing)


def _snapped_step(scenario: Scenario, delta: Optional[float]) -> float:
    requested = RESIDUAL_STEP_FRACTION * scenario.horizon if delta is None else float(delta)
    multiple = max(1, int(round(requested / scenario.time_step)))
    return multiple * scenario.time_step


def master_residual_via_flow(
    scenario: Scenario,
    t0: float,
    x0: float,
    m0: GridDensity,
    delta: Optional[float] = None,
) -> ResidualReport:
    """
    Term-by-term residual of the first-order master equation at (t0, x0, m0).

    The terms are

        -d_t U,  -a U_xx,  H(x0, x, U_x, m0),
        -int a(y) d_y D_mU(x, m0, y) m0(dy),
        +int H_p(x0, y, U_y(y), m0) D_mU(x, m0, y) m0(dy),

    with d_t U from forward differences at delta and 2 delta combined by
    Richardson extrapolation, and D_mU from a full y sweep. Magnitudes are
    sup-norms over x; ``total`` is the sup-norm of their pointwise sum.

    Args:
        scenario (Scenario): Model data.
        t0 (float): Time in [0, T).
        x0 (float): Major state.
        m0 (GridDensity): Population density.
        delta (Optional[float]): Time-difference step; snapped to a multiple of
            the scenario time step. Defaults to 1e-3 T.

    Returns:
        ResidualReport: Term magnitudes, total and discretization parameters.
    """
    _require_before_horizon(scenario, t0)
    grid = scenario.grid
    limit = int(get_config_value("residual_max_cells", 32))
    if grid.cells > limit:
        logger.warning(
            f"Master residual on {grid.cells} cells costs {grid.cells} linearized solves "
            f"(configured comfort limit {limit})"
        )
    step = _snapped_step(scenario, delta)
    if t0 + step > scenario.horizon * (1.0 + 1e-12):
        raise ValueError(f"residual step {step:.3e} overshoots the horizon from t0={t0}")

    solution = solve_mfg(scenario, t0, m0, x0)
    u0 = solution.u.initial
    first = (eval_u(scenario, t0 + step, x0, m0).values - u0) / step
    if t0 + 2.0 * step <= scenario.horizon * (1.0 + 1e-12):
        second = (eval_u(scenario, t0 + 2.0 * step, x0, m0).values - u0) / (2.0 * step)
        time_derivative = 2.0 * first - second
    else:
        time_derivative = first

    a_values = diffusion_values(scenario.diffusion, t0, grid)
    u_x = spectral_derivative(u0, grid)
    frozen = solution.frozen(0)
    lions = lions_derivative(scenario, t0, x0, m0, around=solution)
    weights = grid.spacing * m0.values

    terms = {
        "time_derivative": -time_derivative,
        "diffusion": -a_values * spectral_derivative(u0, grid, order=2),
        "hamiltonian": frozen.value(u_x),
        "nonlocal_diffusion": -lions.d_m_dy() @ (a_values * weights),
        "nonlocal_drift": lions.d_m() @ (frozen.dp(u_x) * weights),
    }
    total = sum(terms.values())
    report: ResidualReport = {
        "time_derivative": float(np.max(np.abs(terms["time_derivative"]))),
        "diffusion": float(np.max(np.abs(terms["diffusion"]))),
        "hamiltonian": float(np.max(np.abs(terms["hamiltonian"]))),
        "nonlocal_diffusion": float(np.max(np.abs(terms["nonlocal_diffusion"]))),
        "nonlocal_drift": float(np.max(np.abs(terms["nonlocal_drift"]))),
        "total": float(np.max(np.abs(total))),
        "delta": step,
        "cells": grid.cells,
        "time_step": solution.mesh.dt,
    }
    logger.info(f"Master residual at t0={t0:.4f}: total {report['total']:.3e}")
    return report


def lipschitz_in_m_audit(
    scenario: Scenario,
    t0: float,
    x0: float,
    pairs: Sequence[Tuple[GridDensity, GridDensity]],
) -> LipschitzAuditReport:
    """
    Compare |U(m1) - U(m2)| / d1(m1, m2) with sup |D_mU| sampled along each segment.

    D_mU is swept at both endpoints and the midpoint of every pair.
    """
    quotients: List[float] = []
    bound = 0.0
    for m1, m2 in pairs:
        distance = wasserstein1(m1, m2)
        if distance <= 0.0:
            continue
        u1 = eval_u(scenario, t0, x0, m1).values
        u2 = eval_u(scenario, t0, x0, m2).values
        quotients.append(float(np.max(np.abs(u1 - u2))) / distance)
        for mu in (m1, m1.mix(m2, 0.5), m2):
            lions = lions_derivative(scenario, t0, x0, mu)
            bound = max(bound, float(np.max(np.abs(lions.d_m()))))
    max_quotient = max(quotients) if quotients else 0.0
    return {
        "samples": len(quotients),
        "max_quotient": max_quotient,
        "derivative_bound": bound,
        "holds": bool(max_quotient <= LIPSCHITZ_SLACK * bound + 1e-12),
    }
