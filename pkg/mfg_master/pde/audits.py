"""
Parabolic Audits Module

Report-only checks of the a-priori bounds of the parabolic solvers: the
Bernstein-type derivative growth of HJ trajectories, the Gaussian spreading
of the Fokker-Planck scheme under grid refinement and the discrete weak form
of the Fokker-Planck equation.
"""

import math
from typing import List, Optional, Sequence

import numpy as np

from mfg_master.measures.grid import GridDensity, GridFunction, TorusGrid
from mfg_master.pde.fokker_planck import solve_fp_forward
from mfg_master.pde.mesh import Diffusion, ParabolicTrajectory, TimeField, TimeMesh, as_diffusion
from mfg_master.pde.operators import spectral_derivative
from mfg_master.types import BernsteinAuditReport, FPConvergenceRow
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

# Largest change of total mass admitted between consecutive Fokker-Planck steps.
STEP_MASS_TOLERANCE = 1e-12


def step_mass_drift(spacing: float, snapshots: np.ndarray) -> float:
    """Largest change of total mass between consecutive snapshots of a trajectory."""
    masses = spacing * np.sum(np.atleast_2d(snapshots), axis=1)
    if masses.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(masses))))


def _affine_constant(sup_norms: np.ndarray, terminal: float, horizons: np.ndarray) -> float:
    """Smallest C with sup_{s >= t} N(s) <= terminal + C (t1 - t) for every mesh time t."""
    running = np.maximum.accumulate(sup_norms[::-1])[::-1]
    active = horizons > 0.0
    if not np.any(active):
        return 0.0
    return float(max(0.0, np.max((running[active] - terminal) / horizons[active])))


def bernstein_audit(traj: ParabolicTrajectory, g: GridFunction, max_order: int = 1) -> BernsteinAuditReport:
    """
    Measure sup_t ||D^r u(t)|| for r <= max_order and fit the affine-in-horizon bound.

    The constant reported for order r is the smallest C with
    sup_{[t, t1]} ||D^r u|| <= ||D^r g|| + C (t1 - t) over all mesh times.

    Args:
        traj (ParabolicTrajectory): Backward trajectory ending at g.
        g (GridFunction): Terminal data.
        max_order (int, optional): Highest derivative order. Defaults to 1.

    Returns:
        BernsteinAuditReport: Measured norms and fitted constants.
    """
    grid = traj.grid
    max_order = max(1, max_order)
    horizons = traj.mesh.t1 - traj.mesh.times
    order_norms: List[float] = []
    terminal_norms: List[float] = []
    constants: List[float] = []
    for r in range(max_order + 1):
        derivative = spectral_derivative(traj.snapshots, grid, order=r)
        per_time = np.max(np.abs(derivative), axis=1)
        terminal = float(np.max(np.abs(spectral_derivative(g.values, grid, order=r))))
        order_norms.append(float(np.max(per_time)))
        terminal_norms.append(terminal)
        constants.append(_affine_constant(per_time, terminal, horizons))

    lipschitz, terminal_lipschitz, fitted = order_norms[1], terminal_norms[1], constants[1]
    report: BernsteinAuditReport = {
        "horizon": float(traj.mesh.t1 - traj.mesh.t0),
        "sup_lipschitz": lipschitz,
        "terminal_lipschitz": terminal_lipschitz,
        "fitted_constant": fitted,
        "gradient_cap": lipschitz,
        "order_norms": order_norms,
        "terminal_order_norms": terminal_norms,
        "order_constants": constants,
    }
    logger.debug(f"Bernstein audit: sup Lip {lipschitz:.4e}, terminal {terminal_lipschitz:.4e}, C {fitted:.4e}")
    return report


def gaussian_spreading_study(
    cells: Sequence[int],
    duration: float = 0.1,
    variance: float = 0.05,
    length: float = 2.0 * math.pi,
) -> List[FPConvergenceRow]:
    """
    Heat flow of a wrapped Gaussian under the Fokker-Planck solver with a = 1, b = 0.

    The exact density at time t is the wrapped Gaussian of variance
    variance + 2 t; dt is tied to spacing^2 so that the spatial order shows.

    Args:
        cells (Sequence[int]): Grid sizes, ascending.
        duration (float, optional): Final time. Defaults to 0.1.
        variance (float, optional): Initial variance. Defaults to 0.05.
        length (float, optional): Torus length. Defaults to 2 pi.

    Returns:
        List[FPConvergenceRow]: One row per grid size; ``order`` compares with the previous row.
    """
    rows: List[FPConvergenceRow] = []
    previous: Optional[FPConvergenceRow] = None
    for n in cells:
        grid = TorusGrid(length, int(n))
        center = 0.5 * length
        m0 = GridDensity.wrapped_gaussian(grid, center, variance)
        steps = max(1, math.ceil(duration / (0.5 * grid.spacing**2)))
        mesh = TimeMesh(0.0, duration, steps)
        zero = np.zeros(grid.cells)
        traj = solve_fp_forward(1.0, lambda k: zero, m0, mesh)
        exact = GridDensity.wrapped_gaussian(grid, center, variance + 2.0 * duration)
        masses = grid.spacing * np.sum(traj.snapshots, axis=1)
        row: FPConvergenceRow = {
            "cells": int(n),
            "error": float(np.max(np.abs(traj.final - exact.values))),
            "max_mass_deviation": float(np.max(np.abs(masses - 1.0))),
            "max_mass_step_drift": step_mass_drift(grid.spacing, traj.snapshots),
            "min_value": float(np.min(traj.snapshots)),
        }
        if previous is not None and row["error"] > 0.0:
            row["order"] = math.log(previous["error"] / row["error"]) / math.log(n / previous["cells"])
        rows.append(row)
        previous = row
        logger.info(f"FP refinement n={n}: error {row['error']:.3e}")
    return rows


def weak_form_defect(
    traj: ParabolicTrajectory,
    a: Diffusion,
    drift: TimeField,
    phi: np.ndarray,
) -> float:
    """
    Largest deviation of the discrete weak form over the steps of ``traj``.

    Compares (int phi m^{k+1} - int phi m^k) / dt with int (a phi_xx - b phi_x) m^{k+1};
    for smooth phi the deviation is O(dt + spacing).
    """
    grid = traj.grid
    field = as_diffusion(a)
    phi = np.asarray(phi, dtype=float)
    phi_x = spectral_derivative(phi, grid)
    phi_xx = spectral_derivative(phi, grid, order=2)
    worst = 0.0
    for k in range(traj.mesh.steps):
        m_next = traj.snapshots[k + 1]
        lhs = grid.spacing * float(np.dot(phi, m_next - traj.snapshots[k])) / traj.mesh.dt
        a_values = field.values(float(traj.mesh.times[k + 1]), grid)
        b_values = np.asarray(drift(k + 1), dtype=float)
        rhs = grid.spacing * float(np.dot(a_values * phi_xx - b_values * phi_x, m_next))
        worst = max(worst, abs(lhs - rhs))
    return worst
