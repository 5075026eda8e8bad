"""
Linearized MFG Systems Module

This module provides the first- and second-order linearizations of the MFG
system around a converged solution (u, m):

    -d_t v - a v_xx + H_p v_x + dH/dm(rho) + f = 0,       v(T) = dG/dm(rho(T)) + r,
     d_t rho - (a rho)_xx - (H_p rho)_x - (m db)_x = 0,    rho(t0) = rho0,

with db = H_pp v_x + dH_p/dm(rho) + s, where f, s, r and extra divergence
sources encode the direction being differentiated. Both orders share one
damped Picard core on rho. All drift perturbations enter the density
equation through the exact flux derivatives of the discrete scheme.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from mfg_master.errors import ConvergenceError
from mfg_master.measures.grid import GridSignedMeasure
from mfg_master.measures.transport import kantorovich_rows
from mfg_master.mfg.system import MFGSolution
from mfg_master.pde.fokker_planck import (
    DriftCurvature,
    DriftVariation,
    FluxSource,
    SourceField,
    solve_fp_signed_forward,
)
from mfg_master.pde.linear import solve_linear_stack
from mfg_master.pde.mesh import ParabolicTrajectory, TimeField
from mfg_master.pde.operators import spectral_derivative
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

# Linear solves iterate to this relative tolerance at least.
LINEAR_TOL = 1e-11


@dataclass(frozen=True)
class LinearizedSources:
    """
    Direction-specific data of a linearized solve.

    Attributes:
        running (Optional[TimeField]): Added to the v-equation source f.
        drift_shift (Optional[TimeField]): Drift perturbation s carried by m.
        flux (Optional[SourceField]): Extra divergence sources of the rho-equation.
        terminal (Optional[np.ndarray]): Added to the terminal of v.
        xi (float): Displacement of x0 this direction carries (0 for measure directions).
    """

    running: Optional[TimeField] = None
    drift_shift: Optional[TimeField] = None
    flux: Optional[SourceField] = None
    terminal: Optional[np.ndarray] = None
    xi: float = 0.0


NO_SOURCES = LinearizedSources()


@dataclass(frozen=True, eq=False)
class LinearizedSolution:
    """
    Solution (v, rho) of a linearized system; (w, mu) for the second order.

    Attributes:
        v (ParabolicTrajectory): Value perturbation.
        rho (ParabolicTrajectory): Signed density perturbation.
        around (MFGSolution): Reference solution.
        sources (LinearizedSources): Direction data used.
        drift_variations (np.ndarray): Full db at every mesh time, shape (steps + 1, cells).
        iterations (int): Picard iterations.
        final_gap (float): Last sup-in-time gap.
    """

    v: ParabolicTrajectory
    rho: ParabolicTrajectory
    around: MFGSolution
    sources: LinearizedSources = field(repr=False)
    drift_variations: np.ndarray = field(repr=False)
    iterations: int = 0
    final_gap: float = 0.0

    @property
    def xi(self) -> float:
        return self.sources.xi

    @property
    def gradients(self) -> np.ndarray:
        return spectral_derivative(self.v.snapshots, self.v.grid)

    def initial_value(self) -> np.ndarray:
        return self.v.initial


def _value_pass(around: MFGSolution, rho: np.ndarray, sources: LinearizedSources) -> np.ndarray:
    """Backward v-equation given a rho trajectory."""
    scenario = around.scenario
    grid = scenario.grid
    p = around.gradients
    steps = around.mesh.steps

    def running(k: int) -> np.ndarray:
        out = around.frozen(k).flat(p[k], rho[k])
        if sources.running is not None:
            out = out + sources.running(k)
        return out[None, :]

    terminal = around.terminal.flat_derivative(around.terminal_density(), rho[steps], around.x0)
    if sources.terminal is not None:
        terminal = terminal + sources.terminal
    stack = solve_linear_stack(
        scenario.diffusion,
        around.drift,
        terminal[None, :],
        around.mesh,
        grid,
        sources=running,
        cfl_limit=scenario.cfl_limit,
    )
    return stack[:, 0, :]


def _drift_variations(around: MFGSolution, v: np.ndarray, rho: np.ndarray, sources: LinearizedSources) -> np.ndarray:
    p = around.gradients
    dv = spectral_derivative(v, around.u.grid)
    out = np.empty_like(v)
    for k in range(v.shape[0]):
        frozen = around.frozen(k)
        out[k] = frozen.dpp(p[k]) * dv[k] + frozen.flat_dp(rho[k])
        if sources.drift_shift is not None:
            out[k] += sources.drift_shift(k)
    return out


def _density_pass(
    around: MFGSolution, rho0: np.ndarray, db: np.ndarray, sources: LinearizedSources
) -> np.ndarray:
    m = around.m.snapshots

    def flux(k: int) -> List[FluxSource]:
        items: List[FluxSource] = [DriftVariation(m[k], db[k])]
        if sources.flux is not None:
            items.extend(sources.flux(k))
        return items

    rho = solve_fp_signed_forward(
        around.scenario.diffusion,
        around.drift,
        GridSignedMeasure(around.m.grid, rho0),
        around.mesh,
        flux,
        around.scenario.cfl_limit,
    )
    return rho.snapshots


def _initial_guess(around: MFGSolution, rho0: np.ndarray) -> np.ndarray:
    """rho0 transported by the reference flow, without sources."""
    return solve_fp_signed_forward(
        around.scenario.diffusion,
        around.drift,
        GridSignedMeasure(around.m.grid, rho0),
        around.mesh,
        None,
        around.scenario.cfl_limit,
    ).snapshots


def solve_linearized(
    around: MFGSolution,
    rho0: np.ndarray,
    sources: LinearizedSources = NO_SOURCES,
    label: str = "first-order linearized system",
) -> LinearizedSolution:
    """
    Damped Picard on rho for a linearized system around ``around``.

    Args:
        around (MFGSolution): Converged reference solution.
        rho0 (np.ndarray): Initial perturbation values.
        sources (LinearizedSources, optional): Direction data. Defaults to none.
        label (str, optional): Name used in convergence errors.

    Returns:
        LinearizedSolution: The converged perturbation.

    Raises:
        ConvergenceError: If the iteration budget is exhausted.
        MissingDerivativeError: If the terminal has no flat derivative.
    """
    config = around.scenario.fixed_point
    grid = around.m.grid
    rho0 = np.asarray(rho0, dtype=float)
    rho = _initial_guess(around, rho0)
    tol = min(config.tol, LINEAR_TOL)
    gaps: List[float] = []
    for iteration in range(1, config.max_iter + 1):
        v = _value_pass(around, rho, sources)
        db = _drift_variations(around, v, rho, sources)
        rho_hat = _density_pass(around, rho0, db, sources)
        relaxed = (1.0 - config.damping) * rho + config.damping * rho_hat
        scale = max(1.0, float(np.max(grid.spacing * np.sum(np.abs(relaxed), axis=1))))
        gap = float(np.max(kantorovich_rows(relaxed - rho, grid.spacing)))
        rho = relaxed
        gaps.append(gap)
        logger.debug(f"{label} iteration {iteration}: gap {gap:.3e}")
        if gap <= tol * scale:
            break
    else:
        raise ConvergenceError(label, config.max_iter, gaps[-1], tol)

    v = _value_pass(around, rho, sources)
    db = _drift_variations(around, v, rho, sources)
    return LinearizedSolution(
        v=ParabolicTrajectory(around.mesh, grid, v),
        rho=ParabolicTrajectory(around.mesh, grid, rho, kind="signed"),
        around=around,
        sources=sources,
        drift_variations=db,
        iterations=len(gaps),
        final_gap=gaps[-1],
    )


def solve_linearized1(
    around: MFGSolution,
    rho0: np.ndarray,
    sources: LinearizedSources = NO_SOURCES,
) -> LinearizedSolution:
    """First-order linearized system (v, rho) with initial perturbation rho0."""
    return solve_linearized(around, rho0, sources, "first-order linearized system")


def second_order_terms(first: LinearizedSolution, second: LinearizedSolution) -> LinearizedSources:
    """
    The mu-independent terms of the second-order system built from two first-order solutions.

    HJ source:  H_pp v_x v'_x + dH_p/dm(rho) v'_x + dH_p/dm(rho') v_x + d2H/dm2(rho, rho').
    Drift:      H_ppp v_x v'_x + dH_pp/dm(rho) v'_x + dH_pp/dm(rho') v_x + d2H_p/dm2(rho, rho').
    Fluxes:     flux variations of rho' along db, of rho along db', and the
                flux curvature of m along (db, db').
    Terminal:   d2G/dm2(rho(T), rho'(T)).
    """
    around = first.around
    p = around.gradients
    dv, dv2 = first.gradients, second.gradients
    rho, rho2 = first.rho.snapshots, second.rho.snapshots
    db, db2 = first.drift_variations, second.drift_variations
    m = around.m.snapshots
    steps = around.mesh.steps

    def running(k: int) -> np.ndarray:
        frozen = around.frozen(k)
        return (
            frozen.dpp(p[k]) * dv[k] * dv2[k]
            + frozen.flat_dp(rho[k]) * dv2[k]
            + frozen.flat_dp(rho2[k]) * dv[k]
            + frozen.flat2(rho[k], rho2[k])
        )

    def drift_shift(k: int) -> np.ndarray:
        frozen = around.frozen(k)
        return (
            frozen.dppp(p[k]) * dv[k] * dv2[k]
            + frozen.flat_dpp(rho[k]) * dv2[k]
            + frozen.flat_dpp(rho2[k]) * dv[k]
            + frozen.flat2_dp(rho[k], rho2[k])
        )

    def flux(k: int) -> Sequence[FluxSource]:
        return [
            DriftVariation(rho2[k], db[k]),
            DriftVariation(rho[k], db2[k]),
            DriftCurvature(m[k], db[k], db2[k]),
        ]

    terminal = around.terminal.second_flat_derivative(
        around.terminal_density(), rho[steps], rho2[steps], around.x0
    )
    return LinearizedSources(running=running, drift_shift=drift_shift, flux=flux, terminal=terminal)


def combine_sources(*parts: LinearizedSources) -> LinearizedSources:
    """Sum of several source records; the result carries no x0 displacement."""

    def summed(getters: List[Callable[[int], np.ndarray]]) -> Optional[TimeField]:
        if not getters:
            return None
        return lambda k: sum(g(k) for g in getters)

    fluxes = [p.flux for p in parts if p.flux is not None]
    terminals = [p.terminal for p in parts if p.terminal is not None]
    return LinearizedSources(
        running=summed([p.running for p in parts if p.running is not None]),
        drift_shift=summed([p.drift_shift for p in parts if p.drift_shift is not None]),
        flux=(lambda k: [item for f in fluxes for item in f(k)]) if fluxes else None,
        terminal=np.sum(terminals, axis=0) if terminals else None,
        xi=0.0,
    )


def solve_linearized2(
    first: LinearizedSolution,
    second: LinearizedSolution,
    tilde: Optional[LinearizedSources] = None,
) -> LinearizedSolution:
    """
    Second-order linearized system (w, mu) with mu(t0) = 0.

    Args:
        first (LinearizedSolution): First-order solution in the direction (xi, rho0).
        second (LinearizedSolution): First-order solution in the direction (xi', rho0').
        tilde (Optional[LinearizedSources]): Extra sources of x0 directions.

    Returns:
        LinearizedSolution: (w, mu) stored as (v, rho).
    """
    if first.around is not second.around:
        raise ValueError("both first-order solutions must share the reference MFG solution")
    terms = second_order_terms(first, second)
    if tilde is not None:
        terms = combine_sources(terms, tilde)
    zero = np.zeros(first.around.m.grid.cells)
    return solve_linearized(first.around, zero, terms, "second-order linearized system")
