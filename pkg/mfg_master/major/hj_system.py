"""
Major HJ System Module

This module provides the solver of the HJ system in the major state x0 for
a fixed population density m:

    -d_t U0 - c U0_x0x0 + c H0(x0, D U0, m) = 0,
    -d_t U  - c U_x0x0  + c H0_p(x0, D U0, m) D U = 0,

with U0(t1) and U(t1, ., x) given for every minor node x, and c the
coefficient factor (2 inside the splitting scheme, 1 otherwise). U is a
family of linear equations, one per x, solved as one stack.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from mfg_master.measures.grid import GridDensity, GridFunction, TorusGrid
from mfg_master.mfg.scenario import Scenario
from mfg_master.pde.hamiltonian import FrozenHamiltonian
from mfg_master.pde.hj import solve_hj_backward
from mfg_master.pde.linear import solve_linear_stack
from mfg_master.pde.mesh import DiffusionField, ParabolicTrajectory, TimeMesh
from mfg_master.pde.operators import spectral_derivative


class MajorHamiltonian:
    """HJ closure of c H0(x0, p, m) on the x0 grid, with m frozen."""

    def __init__(self, frozen: FrozenHamiltonian, factor: float = 1.0):
        self.frozen = frozen
        self.factor = factor

    def __call__(self, k: int, p: np.ndarray) -> np.ndarray:
        return self.factor * self.frozen.value(p)

    def gradient(self, k: int, p: np.ndarray) -> np.ndarray:
        return self.factor * self.frozen.dp(p)


def freeze_major(scenario: Scenario, m: GridDensity) -> FrozenHamiltonian:
    """H0(x0, ., m) at the nodes of the major grid."""
    return scenario.major_hamiltonian.frozen(m, scenario.major_grid.nodes)


@dataclass(frozen=True, eq=False)
class MajorHJSolution:
    """
    Solution of the x0 HJ system.

    Attributes:
        u0 (ParabolicTrajectory): U0 over the x0 grid.
        u (np.ndarray): U of shape (steps + 1, x0 cells, x cells).
        density (GridDensity): The frozen population density.
        frozen (FrozenHamiltonian): H0 with m frozen.
        factor (float): Coefficient factor used.
    """

    u0: ParabolicTrajectory
    u: np.ndarray
    density: GridDensity
    frozen: FrozenHamiltonian
    factor: float = 1.0

    @property
    def mesh(self) -> TimeMesh:
        return self.u0.mesh

    @property
    def major_grid(self) -> TorusGrid:
        return self.u0.grid

    @cached_property
    def u0_gradients(self) -> np.ndarray:
        """D_x0 U0 at every mesh time."""
        return spectral_derivative(self.u0.snapshots, self.major_grid)

    @cached_property
    def u_gradients(self) -> np.ndarray:
        """D_x0 U at every mesh time, shape (steps + 1, x cells, x0 cells)."""
        return spectral_derivative(np.transpose(self.u, (0, 2, 1)), self.major_grid)

    def drift(self, k: int) -> np.ndarray:
        """c H0_p(x0, D U0(t_k), m)."""
        return self.factor * self.frozen.dp(self.u0_gradients[k])

    def initial_pair(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.u0.initial, self.u[0]


def solve_hj_system_x0(
    scenario: Scenario,
    m: GridDensity,
    terminal_u0: np.ndarray,
    terminal_u: np.ndarray,
    t0: float,
    t1: float,
    factor: float = 1.0,
) -> MajorHJSolution:
    """
    Solve the x0 HJ system on [t0, t1] for a fixed density.

    Args:
        scenario (Scenario): Model data (major grid, H0, time step, CFL limit).
        m (GridDensity): Frozen population density.
        terminal_u0 (np.ndarray): U0(t1) over the x0 grid.
        terminal_u (np.ndarray): U(t1) of shape (x0 cells, x cells).
        t0 (float): Initial time.
        t1 (float): Final time.
        factor (float, optional): Coefficient factor c. Defaults to 1.0.

    Returns:
        MajorHJSolution: U0 and U at every mesh time.

    Raises:
        CFLViolationError: If the x0 drift violates the step restriction.
    """
    major_grid = scenario.major_grid
    terminal_u = np.asarray(terminal_u, dtype=float)
    if terminal_u.shape != (major_grid.cells, scenario.grid.cells):
        raise ValueError(
            f"terminal U must have shape {(major_grid.cells, scenario.grid.cells)}, got {terminal_u.shape}"
        )
    mesh = TimeMesh.covering(t0, t1, scenario.time_step)
    frozen = freeze_major(scenario, m)
    diffusion = DiffusionField(factor)
    u0 = solve_hj_backward(
        diffusion,
        MajorHamiltonian(frozen, factor),
        GridFunction(major_grid, terminal_u0),
        mesh,
        "spectral",
        scenario.cfl_limit,
    )
    drift_values = factor * frozen.dp(spectral_derivative(u0.snapshots, major_grid))
    stack = solve_linear_stack(
        diffusion,
        lambda k: drift_values[k],
        terminal_u.T,
        mesh,
        major_grid,
        cfl_limit=scenario.cfl_limit,
    )
    return MajorHJSolution(
        u0=u0,
        u=np.transpose(stack, (0, 2, 1)),
        density=m,
        frozen=frozen,
        factor=factor,
    )


def terminal_pair(scenario: Scenario, m: GridDensity) -> Tuple[np.ndarray, np.ndarray]:
    """(G0(x0_j, m), G(x0_j, x_i, m)) over the x0 grid."""
    nodes = scenario.major_grid.nodes
    u0 = scenario.major_terminal.values(m, nodes)
    u = np.stack([scenario.terminal.evaluate(m, float(x0)) for x0 in nodes])
    return np.asarray(u0, dtype=float), u
