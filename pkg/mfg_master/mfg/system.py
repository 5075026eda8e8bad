"""
MFG System Module

This module provides the damped Picard solver of the coupled system

    -d_t u - a u_xx + H(x0, x, u_x, m(t)) = 0,   u(T) = G(x0, x, m(T)),
     d_t m - (a m)_xx - (H_p(x0, x, u_x, m(t)) m)_x = 0,   m(t0) = m0,

alternating a backward HJ solve given the current density iterate and a
forward Fokker-Planck solve with the resulting drift.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

from mfg_master.errors import ConvergenceError, IncompatibleGridError
from mfg_master.measures.grid import GridDensity, GridFunction, TorusGrid
from mfg_master.measures.transport import kantorovich_rows, wasserstein1
from mfg_master.mfg.functionals import FixedTerminal, MeasureFunctional
from mfg_master.mfg.scenario import Scenario
from mfg_master.pde.fokker_planck import solve_fp_forward
from mfg_master.pde.hamiltonian import CatalogHamiltonian, FrozenHamiltonian
from mfg_master.pde.hj import solve_hj_backward
from mfg_master.pde.mesh import ParabolicTrajectory, TimeMesh
from mfg_master.pde.operators import spectral_derivative
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)


class FlowHamiltonian:
    """
    HJ closure of the catalog Hamiltonian along a density flow.

    Args:
        catalog (CatalogHamiltonian): The Hamiltonian.
        densities (np.ndarray): Density values per mesh step, shape (steps + 1, cells).
        grid (TorusGrid): Grid of the densities (and of the evaluation points).
        x0 (float): Major state.
    """

    def __init__(
        self, catalog: CatalogHamiltonian, densities: np.ndarray, grid: TorusGrid, x0: float
    ):
        self.catalog = catalog
        self.densities = densities
        self.grid = grid
        self.x0 = x0
        self._frozen: Dict[int, FrozenHamiltonian] = {}

    def frozen(self, k: int) -> FrozenHamiltonian:
        if k not in self._frozen:
            density = GridDensity.normalized(self.grid, np.maximum(self.densities[k], 0.0))
            self._frozen[k] = self.catalog.frozen(density, self.grid.nodes, self.x0)
        return self._frozen[k]

    def __call__(self, k: int, p: np.ndarray) -> np.ndarray:
        return self.frozen(k).value(p)

    def gradient(self, k: int, p: np.ndarray) -> np.ndarray:
        return self.frozen(k).dp(p)


@dataclass(frozen=True, eq=False)
class MFGSolution:
    """
    Converged solution of the MFG system.

    Attributes:
        u (ParabolicTrajectory): Value function at every mesh time.
        m (ParabolicTrajectory): Densities at every mesh time.
        x0 (float): Major state.
        iterations (int): Picard iterations used.
        final_gap (float): sup_t W1 between the last two density iterates.
        gaps (Tuple[float, ...]): Gap history.
        scenario (Scenario): The scenario solved.
        terminal (MeasureFunctional): Terminal functional used.
        terminal_target (Optional[GridDensity]): Density the terminal functional was last
            evaluated at, when it differs from the terminal density by less than tol.
    """

    u: ParabolicTrajectory
    m: ParabolicTrajectory
    x0: float
    iterations: int
    final_gap: float
    gaps: Tuple[float, ...]
    scenario: Scenario
    terminal: MeasureFunctional
    hamiltonian: FlowHamiltonian = field(repr=False)
    terminal_target: Optional[GridDensity] = field(default=None, repr=False)

    @property
    def mesh(self) -> TimeMesh:
        return self.u.mesh

    @cached_property
    def gradients(self) -> np.ndarray:
        """u_x at every mesh time."""
        return spectral_derivative(self.u.snapshots, self.u.grid)

    def frozen(self, k: int) -> FrozenHamiltonian:
        return self.hamiltonian.frozen(k)

    def drift(self, k: int) -> np.ndarray:
        """FP drift H_p(x0, x, u_x(t_k), m(t_k))."""
        return self.frozen(k).dp(self.gradients[k])

    def density(self, k: int) -> GridDensity:
        return GridDensity.normalized(self.m.grid, np.maximum(self.m.snapshots[k], 0.0))

    def initial_value(self) -> GridFunction:
        return self.u.function_at(0)

    def terminal_density(self) -> GridDensity:
        return self.density(self.mesh.steps)


def _hj_pass(
    scenario: Scenario,
    terminal: MeasureFunctional,
    densities: np.ndarray,
    mesh: TimeMesh,
    x0: float,
) -> Tuple[ParabolicTrajectory, FlowHamiltonian]:
    grid = scenario.grid
    ham = FlowHamiltonian(scenario.hamiltonian, densities, grid, x0)
    final = GridDensity.normalized(grid, np.maximum(densities[-1], 0.0))
    g = GridFunction(grid, terminal.evaluate(final, x0))
    u = solve_hj_backward(scenario.diffusion, ham, g, mesh, scenario.gradient, scenario.cfl_limit)
    return u, ham


def solve_mfg(
    scenario: Scenario,
    t0: float,
    m0: GridDensity,
    x0: float = 0.0,
    terminal: Optional[MeasureFunctional] = None,
    t1: Optional[float] = None,
    initial_flow: Optional[np.ndarray] = None,
) -> MFGSolution:
    """
    Solve the MFG system on [t0, t1] by damped Picard iteration.

    Each iteration solves HJ backward given the density iterate, then FP
    forward with drift H_p(x0, x, u_x, m^i(t)), and relaxes
    m^{i+1} = (1 - theta) m^i + theta FP(m^i). The value function is finally
    recomputed from the converged densities, so u(T) = G(x0, ., m(T)) exactly.

    Args:
        scenario (Scenario): Model data.
        t0 (float): Initial time.
        m0 (GridDensity): Initial density.
        x0 (float, optional): Major state. Defaults to 0.0.
        terminal (Optional[MeasureFunctional]): Terminal functional (defaults to the scenario's G).
        t1 (Optional[float]): Final time (defaults to the horizon).
        initial_flow (Optional[np.ndarray]): First density iterate, shape (steps + 1, cells);
            the constant flow m0 by default.

    Returns:
        MFGSolution: The converged solution.

    Raises:
        ConvergenceError: If the gap stays above tol after max_iter iterations.
        CFLViolationError: If the drift violates the step restriction.
    """
    terminal = terminal if terminal is not None else scenario.terminal
    config = scenario.fixed_point
    mesh = scenario.mesh(t0, t1)
    grid = scenario.grid
    grid.require_same(m0.grid, "scenario and initial density")
    if initial_flow is None:
        densities = np.tile(m0.values, (mesh.steps + 1, 1))
    else:
        densities = np.array(initial_flow, dtype=float)
        if densities.shape != (mesh.steps + 1, grid.cells):
            raise IncompatibleGridError(
                f"initial flow has shape {densities.shape}, expected {(mesh.steps + 1, grid.cells)}"
            )
        densities[0] = m0.values
    gaps = []
    for iteration in range(1, config.max_iter + 1):
        u, ham = _hj_pass(scenario, terminal, densities, mesh, x0)
        gradients = spectral_derivative(u.snapshots, grid)
        m_hat = solve_fp_forward(
            scenario.diffusion,
            lambda k: ham.gradient(k, gradients[k]),
            m0,
            mesh,
            scenario.cfl_limit,
        )
        relaxed = (1.0 - config.damping) * densities + config.damping * m_hat.snapshots
        gap = float(np.max(kantorovich_rows(relaxed - densities, grid.spacing)))
        densities = relaxed
        gaps.append(gap)
        logger.debug(f"MFG Picard iteration {iteration}: gap {gap:.3e}")
        if gap < config.tol:
            break
    else:
        raise ConvergenceError("MFG fixed point", config.max_iter, gaps[-1], config.tol)

    u, ham = _hj_pass(scenario, terminal, densities, mesh, x0)
    m = ParabolicTrajectory(mesh, grid, densities, kind="density")
    logger.debug(f"MFG solve on [{mesh.t0:.4f}, {mesh.t1:.4f}] converged in {len(gaps)} iterations")
    return MFGSolution(
        u=u,
        m=m,
        x0=float(x0),
        iterations=len(gaps),
        final_gap=gaps[-1],
        gaps=tuple(gaps),
        scenario=scenario,
        terminal=terminal,
        hamiltonian=ham,
    )


def solve_mfg_nested(
    scenario: Scenario,
    t0: float,
    m0: GridDensity,
    x0: float = 0.0,
    terminal: Optional[MeasureFunctional] = None,
    t1: Optional[float] = None,
) -> MFGSolution:
    """
    Solve the MFG system when the terminal functional is expensive to evaluate.

    The terminal functional is only evaluated at terminal densities of
    converged solves. With g_j = G(x0, ., mu_j) frozen, the system is solved
    by :func:`solve_mfg`, warm-started from the previous flow, and its terminal
    density becomes mu_{j+1}. The outer loop stops once W1(mu_{j+1}, mu_j) < tol,
    which is the fixed point :func:`solve_mfg` reaches directly. The step on mu
    starts undamped and is halved whenever the gap grows.

    Args:
        scenario (Scenario): Model data.
        t0 (float): Initial time.
        m0 (GridDensity): Initial density.
        x0 (float, optional): Major state. Defaults to 0.0.
        terminal (Optional[MeasureFunctional]): Terminal functional (defaults to the scenario's G).
        t1 (Optional[float]): Final time (defaults to the horizon).

    Returns:
        MFGSolution: The converged solution; ``gaps`` holds the outer W1 gaps.

    Raises:
        ConvergenceError: If the outer loop or an inner solve does not converge.
    """
    terminal = terminal if terminal is not None else scenario.terminal
    config = scenario.fixed_point
    grid = scenario.grid
    target = m0
    flow: Optional[np.ndarray] = None
    step = 1.0
    gaps = []
    for iteration in range(1, config.max_iter + 1):
        frozen = FixedTerminal(grid, terminal.evaluate(target, x0))
        solution = solve_mfg(scenario, t0, m0, x0, frozen, t1=t1, initial_flow=flow)
        flow = solution.m.snapshots
        reached = solution.terminal_density()
        gap = wasserstein1(reached, target)
        logger.debug(f"Terminal iteration {iteration}: gap {gap:.3e} after {solution.iterations} Picard passes")
        if gaps and gap > gaps[-1]:
            step *= 0.5
        gaps.append(gap)
        if gap < config.tol:
            break
        target = GridDensity.normalized(grid, (1.0 - step) * target.values + step * reached.values)
    else:
        raise ConvergenceError("MFG terminal iteration", config.max_iter, gaps[-1], config.tol)

    return replace(
        solution,
        iterations=len(gaps),
        final_gap=gaps[-1],
        gaps=tuple(gaps),
        terminal=terminal,
        terminal_target=target,
    )
