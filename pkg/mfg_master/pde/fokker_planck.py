"""
Fokker-Planck Solver Module

Forward solvers for d_t m - (a m)_xx - (b m)_x = 0 with the exponentially
fitted finite-volume flux, for probability densities and for signed measures
with divergence-form sources. Sources are face fluxes; three kinds are
understood:

- a cell field R, entering as -(R)_x (face flux -(R_i + R_{i+1})/2);
- a :class:`DriftVariation`, the exact flux derivative of the scheme when the
  drift of a density r moves in the direction db;
- a :class:`DriftCurvature`, the exact mixed second drift derivative.

Because the latter two differentiate the discrete flux exactly, linearized
systems built on them are the derivatives of the discrete MFG scheme.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from mfg_master.measures.grid import GridDensity, GridSignedMeasure
from mfg_master.pde.hj import DEFAULT_CFL, check_cfl
from mfg_master.pde.mesh import (
    Diffusion,
    ParabolicTrajectory,
    TimeField,
    TimeMesh,
    as_diffusion,
    diffusion_values,
)
from mfg_master.pde.operators import FittedFluxOperator, face_average, face_divergence
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

# Round-off negatives of the implicit solve are clipped below this magnitude.
_NEGATIVE_CLIP = 1e-14


@dataclass(frozen=True)
class DriftVariation:
    """Flux of density values ``density`` under the drift perturbation ``delta_b``."""

    density: np.ndarray
    delta_b: np.ndarray


@dataclass(frozen=True)
class DriftCurvature:
    """Mixed second flux variation of ``density`` in the drift directions ``delta_b`` and ``delta_b2``."""

    density: np.ndarray
    delta_b: np.ndarray
    delta_b2: np.ndarray


FluxSource = Union[np.ndarray, DriftVariation, DriftCurvature]

# Sources active at step k (evaluated at t_{k}, used in the step ending at k).
SourceField = Callable[[int], Sequence[FluxSource]]


def source_flux(operator: FittedFluxOperator, source: FluxSource) -> np.ndarray:
    """Face flux contributed by one source under the operator of the current step."""
    if isinstance(source, DriftVariation):
        return operator.variation_flux(source.density, source.delta_b)
    if isinstance(source, DriftCurvature):
        return operator.curvature_flux(source.density, source.delta_b, source.delta_b2)
    return -face_average(np.asarray(source, dtype=float))


def _operator(a_values: np.ndarray, drift: np.ndarray, mesh: TimeMesh, m_grid, cfl_limit: Optional[float]) -> FittedFluxOperator:
    if cfl_limit is not None:
        check_cfl(float(np.max(np.abs(drift))), m_grid, mesh, cfl_limit, "Fokker-Planck solver")
    return FittedFluxOperator(m_grid, a_values, drift, mesh.dt)


def solve_fp_forward(
    a: Diffusion,
    drift: TimeField,
    m0: GridDensity,
    mesh: TimeMesh,
    cfl_limit: Optional[float] = DEFAULT_CFL,
) -> ParabolicTrajectory:
    """
    Evolve a density forward with the fitted implicit scheme.

    The drift and diffusion of the step from t_k to t_{k+1} are taken at t_{k+1}.

    Args:
        a (Diffusion): Diffusion coefficient.
        drift (TimeField): Drift b at step k.
        m0 (GridDensity): Initial density.
        mesh (TimeMesh): Time mesh.
        cfl_limit (Optional[float]): Courant limit checked on b, None to skip. Defaults to 1.0.

    Returns:
        ParabolicTrajectory: Densities at every mesh time (kind "density").

    Raises:
        CFLViolationError: If dt max|b| exceeds cfl_limit * spacing.
    """
    field = as_diffusion(a)
    grid = m0.grid
    snapshots = np.empty((mesh.steps + 1, grid.cells))
    snapshots[0] = m0.values
    for k in range(mesh.steps):
        a_values = diffusion_values(field, float(mesh.times[k + 1]), grid)
        operator = _operator(a_values, np.asarray(drift(k + 1), dtype=float), mesh, grid, cfl_limit)
        step = operator.solve(snapshots[k])
        step[(step < 0.0) & (step > -_NEGATIVE_CLIP)] = 0.0
        snapshots[k + 1] = step
    return ParabolicTrajectory(mesh, grid, snapshots, kind="density")


def solve_fp_signed_forward(
    a: Diffusion,
    drift: TimeField,
    rho0: GridSignedMeasure,
    mesh: TimeMesh,
    sources: Optional[SourceField] = None,
    cfl_limit: Optional[float] = DEFAULT_CFL,
) -> ParabolicTrajectory:
    """
    Evolve a signed measure: rho^{k+1} = A^{-1} [rho^k - dt div F^{k+1}].

    F is the sum of the face fluxes of the sources of step k + 1; the total
    mass of rho is preserved exactly since every source is a divergence.

    Args:
        a (Diffusion): Diffusion coefficient.
        drift (TimeField): Drift b at step k.
        rho0 (GridSignedMeasure): Initial measure.
        mesh (TimeMesh): Time mesh.
        sources (Optional[SourceField]): Sources at step k.
        cfl_limit (Optional[float]): Courant limit checked on b. Defaults to 1.0.

    Returns:
        ParabolicTrajectory: Signed measures at every mesh time (kind "signed").
    """
    field = as_diffusion(a)
    grid = rho0.grid
    snapshots = np.empty((mesh.steps + 1, grid.cells))
    snapshots[0] = rho0.values
    for k in range(mesh.steps):
        a_values = diffusion_values(field, float(mesh.times[k + 1]), grid)
        operator = _operator(a_values, np.asarray(drift(k + 1), dtype=float), mesh, grid, cfl_limit)
        rhs = snapshots[k].copy()
        if sources is not None:
            items = sources(k + 1)
            if items:
                flux = np.zeros(grid.cells)
                for source in items:
                    flux += source_flux(operator, source)
                rhs -= mesh.dt * face_divergence(flux, grid)
        snapshots[k + 1] = operator.solve(rhs)
    return ParabolicTrajectory(mesh, grid, snapshots, kind="signed")
