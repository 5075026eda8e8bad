"""
Scenario Module

This module provides the Scenario: every model datum of a run (grids,
horizon, diffusions, Hamiltonians, terminal costs, initial density) plus the
numerical settings of the fixed-point solves.
"""

from dataclasses import dataclass, replace
from typing import Optional

from mfg_master.measures.grid import GridDensity, TorusGrid
from mfg_master.mfg.functionals import MeasureFunctional, ScalarMeasureFunctional
from mfg_master.pde.hamiltonian import CatalogHamiltonian
from mfg_master.pde.mesh import DiffusionField, TimeMesh


@dataclass(frozen=True)
class FixedPointConfig:
    """
    Damped Picard settings.

    Attributes:
        damping (float): Relaxation weight theta in (0, 1].
        tol (float): Stopping tolerance on the sup-in-time gap.
        max_iter (int): Iteration budget.
    """

    damping: float = 0.5
    tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Model data and numerical settings.

    Attributes:
        grid (TorusGrid): Torus of the minor state x.
        horizon (float): Final time T.
        time_step (float): Largest time step; every sub-interval mesh is the finest uniform one below it.
        diffusion (DiffusionField): a(t, x).
        common_noise (float): Constant common-noise coefficient a0 >= 0.
        major_grid (TorusGrid): Torus of the major state x0.
        hamiltonian (CatalogHamiltonian): H(x0, x, p, m).
        major_hamiltonian (CatalogHamiltonian): H0(x0, p, m).
        terminal (MeasureFunctional): G(x0, x, m).
        major_terminal (ScalarMeasureFunctional): G0(x0, m).
        initial_density (GridDensity): Default m0.
        fixed_point (FixedPointConfig): Picard settings.
        gradient (str): "spectral" or "upwind" HJ gradients.
        cfl_limit (float): Admissible Courant number.
        name (str): Label used in reports.
    """

    grid: TorusGrid
    horizon: float
    time_step: float
    diffusion: DiffusionField
    common_noise: float
    major_grid: TorusGrid
    hamiltonian: CatalogHamiltonian
    major_hamiltonian: CatalogHamiltonian
    terminal: MeasureFunctional
    major_terminal: ScalarMeasureFunctional
    initial_density: GridDensity
    fixed_point: FixedPointConfig = FixedPointConfig()
    gradient: str = "spectral"
    cfl_limit: float = 1.0
    name: str = "scenario"

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not self.time_step > 0.0:
            raise ValueError(f"time step must be positive, got {self.time_step}")
        if not self.common_noise >= 0.0:
            raise ValueError(f"common noise a0 must be nonnegative, got {self.common_noise}")
        self.grid.require_same(self.initial_density.grid, "scenario grid and initial density")

    def mesh(self, t0: float, t1: Optional[float] = None) -> TimeMesh:
        """Uniform mesh of [t0, t1] (t1 defaults to the horizon) with dt <= time_step."""
        return TimeMesh.covering(t0, self.horizon if t1 is None else t1, self.time_step)

    def scaled(self, factor: float) -> "Scenario":
        """Scenario with a, a0, H and H0 multiplied by ``factor``."""
        return replace(
            self,
            diffusion=self.diffusion.scaled(factor),
            common_noise=factor * self.common_noise,
            hamiltonian=self.hamiltonian.scaled(factor),
            major_hamiltonian=self.major_hamiltonian.scaled(factor),
        )

    def with_horizon(self, horizon: float) -> "Scenario":
        return replace(self, horizon=horizon)

    def with_terminal(self, terminal: MeasureFunctional) -> "Scenario":
        return replace(self, terminal=terminal)

    def with_fixed_point(self, **changes) -> "Scenario":
        return replace(self, fixed_point=replace(self.fixed_point, **changes))

    def with_unit_diffusions(self) -> "Scenario":
        """Unit diffusion in x and x0, no common noise (major-player runs)."""
        return replace(self, diffusion=DiffusionField(1.0), common_noise=0.0)
