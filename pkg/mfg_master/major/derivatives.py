"""
Major Measure Derivatives Module

This module provides the first and second flat derivatives in m of the pair
(U0, U) solving the x0 HJ system with terminal (G0, G). They solve linear
systems on the x0 grid sharing the drift H0_p(x0, D U0, m):

    -d_t v0 - v0_x0x0 + H0_p D v0 + dH0/dm(rho) = 0,
    -d_t v  - v_x0x0  + H0_p D v + D U (dH0_p/dm(rho) + H0_pp D v0) = 0,

with terminals dG0/dm(rho) and dG/dm(rho). The term D U H0_pp D v0 couples
every v(., x) to the leader v0. Both systems are exact derivatives of the
discrete x0 HJ solver.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from mfg_master.major.hj_system import MajorHJSolution, solve_hj_system_x0, terminal_pair
from mfg_master.measures.grid import GridDensity
from mfg_master.mfg.functionals import zero_mass_values
from mfg_master.mfg.scenario import Scenario
from mfg_master.pde.linear import solve_linear_stack
from mfg_master.pde.mesh import DiffusionField
from mfg_master.pde.operators import spectral_derivative


@dataclass(frozen=True, eq=False)
class MajorDerivative:
    """
    A measure derivative of (U0, U) along the x0 HJ system.

    Attributes:
        v0 (np.ndarray): Derivative of U0, shape (steps + 1, x0 cells).
        v (np.ndarray): Derivative of U, shape (steps + 1, x0 cells, x cells).
    """

    v0: np.ndarray
    v: np.ndarray

    @property
    def initial_v0(self) -> np.ndarray:
        return self.v0[0]

    @property
    def initial_v(self) -> np.ndarray:
        return self.v[0]

    def v0_gradients(self, grid) -> np.ndarray:
        return spectral_derivative(self.v0, grid)

    def v_gradients(self, grid) -> np.ndarray:
        """D_x0 v, shape (steps + 1, x cells, x0 cells)."""
        return spectral_derivative(np.transpose(self.v, (0, 2, 1)), grid)


def solve_major_system(
    scenario: Scenario,
    m: GridDensity,
    t0: float = 0.0,
    t1: Optional[float] = None,
) -> MajorHJSolution:
    """The x0 HJ system on [t0, t1] with unit coefficients and terminal (G0, G)(m)."""
    end = scenario.horizon if t1 is None else t1
    u0, u = terminal_pair(scenario, m)
    return solve_hj_system_x0(scenario, m, u0, u, t0, end)


def _stacked(v0: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Terminal data of shape (1 + x cells, x0 cells)."""
    return np.vstack([np.asarray(v0, dtype=float)[None, :], np.asarray(v, dtype=float).T])


def _unstacked(stack: np.ndarray) -> MajorDerivative:
    return MajorDerivative(v0=np.array(stack[:, 0, :]), v=np.transpose(stack[:, 1:, :], (0, 2, 1)))


def _solve(context: MajorHJSolution, terminals: np.ndarray, sources, scenario: Scenario) -> MajorDerivative:
    """Shared drift and leader coupling H0_pp D U over the context's mesh."""
    frozen = context.frozen
    du0 = context.u0_gradients
    du = context.u_gradients
    factor = context.factor

    def coupling(k: int) -> np.ndarray:
        return factor * frozen.dpp(du0[k]) * du[k]

    stack = solve_linear_stack(
        DiffusionField(factor),
        context.drift,
        terminals,
        context.mesh,
        context.major_grid,
        sources=sources,
        leader_coupling=coupling,
        cfl_limit=scenario.cfl_limit,
    )
    return _unstacked(stack)


def deriv_major_dm(scenario: Scenario, context: MajorHJSolution, rho: np.ndarray) -> MajorDerivative:
    """
    (dU0/dm, dU/dm)(rho) along a solved x0 HJ system with terminal (G0, G).

    Args:
        scenario (Scenario): Model data (G0, G and the CFL limit).
        context (MajorHJSolution): Solution around which to linearize.
        rho (np.ndarray): Direction; only its zero-mass part rho - rho(1) m acts.

    Returns:
        MajorDerivative: v0 and v at every mesh time.

    Raises:
        MissingDerivativeError: If G0 or G has no flat derivative.
    """
    m = context.density
    rho = zero_mass_values(m, rho)
    nodes = context.major_grid.nodes
    frozen = context.frozen
    du0 = context.u0_gradients
    du = context.u_gradients
    factor = context.factor
    delta_h_p = frozen.flat_dp(rho)

    def sources(k: int) -> np.ndarray:
        out = np.empty((1 + du.shape[1], nodes.size))
        out[0] = factor * frozen.flat(du0[k], rho)
        out[1:] = factor * du[k] * delta_h_p
        return out

    terminal_v0 = scenario.major_terminal.flat_derivative(m, rho, nodes)
    terminal_v = np.stack([scenario.terminal.flat_derivative(m, rho, float(x0)) for x0 in nodes])
    return _solve(context, _stacked(terminal_v0, terminal_v), sources, scenario)


def deriv2_major_dm(
    scenario: Scenario,
    context: MajorHJSolution,
    first: MajorDerivative,
    second: MajorDerivative,
    rho: np.ndarray,
    rho2: np.ndarray,
) -> MajorDerivative:
    """
    (d2U0/dm2, d2U/dm2)(rho, rho2) from the two first derivatives.

    Args:
        scenario (Scenario): Model data.
        context (MajorHJSolution): Solution around which to linearize.
        first (MajorDerivative): Derivative in direction rho.
        second (MajorDerivative): Derivative in direction rho2.
        rho (np.ndarray): First direction.
        rho2 (np.ndarray): Second direction.

    Returns:
        MajorDerivative: w0 and w at every mesh time.

    Raises:
        MissingDerivativeError: If G0 or G has no second flat derivative.
    """
    m = context.density
    rho = zero_mass_values(m, rho)
    rho2 = zero_mass_values(m, rho2)
    grid0 = context.major_grid
    nodes = grid0.nodes
    frozen = context.frozen
    factor = context.factor
    du0 = context.u0_gradients
    du = context.u_gradients
    dv0, dv = first.v0_gradients(grid0), first.v_gradients(grid0)
    dw0, dw = second.v0_gradients(grid0), second.v_gradients(grid0)
    hp_rho, hp_rho2 = frozen.flat_dp(rho), frozen.flat_dp(rho2)
    hpp_rho, hpp_rho2 = frozen.flat_dpp(rho), frozen.flat_dpp(rho2)
    h2 = frozen.flat2(rho, rho2)
    h2_p = frozen.flat2_dp(rho, rho2)

    def sources(k: int) -> np.ndarray:
        hpp = frozen.dpp(du0[k])
        hppp = frozen.dppp(du0[k])
        out = np.empty((1 + du.shape[1], nodes.size))
        out[0] = h2 + hpp * dv0[k] * dw0[k] + hp_rho * dw0[k] + hp_rho2 * dv0[k]
        out[1:] = (
            dv[k] * (hp_rho2 + hpp * dw0[k])
            + dw[k] * (hp_rho + hpp * dv0[k])
            + du[k] * (hpp_rho * dw0[k] + h2_p + hppp * dv0[k] * dw0[k] + hpp_rho2 * dv0[k])
        )
        return factor * out

    terminal_w0 = scenario.major_terminal.second_flat_derivative(m, rho, rho2, nodes)
    terminal_w = np.stack([scenario.terminal.second_flat_derivative(m, rho, rho2, float(x0)) for x0 in nodes])
    return _solve(context, _stacked(terminal_w0, terminal_w), sources, scenario)
