"""
Schemas Module

This module defines the pydantic models of scenario files and of the run
configuration built by the command line.
"""

import math
from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

CATALOG_KIND = "quadratic-convolution"

COMMANDS = (
    "solve-mfg",
    "master-first",
    "master-linear",
    "split",
    "major",
    "audit",
    "convergence",
    "stochastic",
)

Command = Literal[
    "solve-mfg",
    "master-first",
    "master-linear",
    "split",
    "major",
    "audit",
    "convergence",
    "stochastic",
]

# (frequency, cosine coefficient, sine coefficient)
FourierTerm = Tuple[int, float, float]


class StrictModel(BaseModel):
    """Base schema: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class GridModel(StrictModel):
    """
    Schema for a torus.

    A grid entry defines the number of cells and the period of the torus.
    """

    cells: int = Field(64, ge=8)
    length: float = Field(2.0 * math.pi, gt=0.0)


class DiffusionModel(StrictModel):
    """
    Schema for the diffusion a(x) = base + amplitude cos(frequency x).

    The coefficient must stay bounded away from zero (uniform ellipticity).
    """

    base: float = 1.0
    amplitude: float = 0.0
    frequency: int = Field(1, ge=0)

    @model_validator(mode="after")
    def _uniformly_elliptic(self) -> "DiffusionModel":
        if self.base - abs(self.amplitude) <= 0.0:
            raise ValueError(
                f"uniform ellipticity requires base - |amplitude| > 0, got base={self.base}, "
                f"amplitude={self.amplitude}"
            )
        return self


class HamiltonianModel(StrictModel):
    """
    Schema for the quadratic-convolution Hamiltonian.

    Kernels are lists of (frequency, cosine, sine) triples.
    """

    kind: Literal["quadratic-convolution"] = CATALOG_KIND
    kappa: float = Field(1.0, gt=0.0)
    beta: float = 0.0
    c0: float = 0.0
    c2: float = 0.0
    alpha: float = 0.0
    psi: List[FourierTerm] = []
    phi: List[FourierTerm] = []
    growth_c0: float = Field(1.0, ge=0.0)
    growth_gamma: float = Field(1.0, ge=0.0)


class TerminalModel(StrictModel):
    """
    Schema for the quadratic-convolution terminal cost.

    ``base`` holds g(x) as Fourier triples; the remaining fields weight the
    x0 cosine, the convolution Psi, the moment M and the x0 pairing.
    """

    kind: Literal["quadratic-convolution"] = CATALOG_KIND
    base: List[FourierTerm] = []
    gamma: float = 0.0
    a: float = 0.0
    b: float = 0.0
    psi: List[FourierTerm] = []
    e: float = 0.0
    q: float = 0.0
    eta: List[FourierTerm] = []
    delta: float = 0.0


class DensityModel(StrictModel):
    """Schema for the default initial density."""

    kind: Literal["uniform", "von_mises", "wrapped_gaussian"] = "von_mises"
    center: float = 0.0
    concentration: float = Field(1.0, ge=0.0)
    variance: float = Field(0.1, gt=0.0)


class FixedPointModel(StrictModel):
    """Schema for the damped Picard settings."""

    damping: float = Field(0.5, gt=0.0, le=1.0)
    tol: float = Field(1e-9, gt=0.0)
    max_iter: int = Field(200, ge=1)


class ScenarioModel(StrictModel):
    """
    Schema for a scenario file.

    Every section is optional; a minimal file yields the default catalog
    scenario.
    """

    name: str = "default"
    grid: GridModel = GridModel()
    horizon: float = 0.25
    time_steps: int = Field(32, ge=1)
    diffusion: DiffusionModel = DiffusionModel()
    common_noise: float = 0.0
    major_grid: GridModel = GridModel(cells=16)
    hamiltonian: HamiltonianModel = HamiltonianModel(c0=0.5, psi=[(1, 1.0, 0.0)])
    major_hamiltonian: HamiltonianModel = HamiltonianModel()
    terminal: TerminalModel = TerminalModel(base=[(1, 0.0, 1.0)], a=0.5, psi=[(1, 1.0, 0.0)])
    major_terminal: TerminalModel = TerminalModel(base=[(1, 1.0, 0.0)], e=0.5, eta=[(1, 0.0, 1.0)])
    initial_density: DensityModel = DensityModel()
    fixed_point: FixedPointModel = FixedPointModel()
    gradient: Literal["spectral", "upwind"] = "spectral"
    cfl_limit: float = Field(1.0, gt=0.0)

    @field_validator("horizon")
    @classmethod
    def _positive_horizon(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError(f"the horizon T must be positive, got {value}")
        return value

    @field_validator("common_noise", mode="before")
    @classmethod
    def _constant_common_noise(cls, value: Any) -> Any:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(
                f"the common noise a0 must be a constant number (space-dependent common noise "
                f"is not supported), got {value!r}"
            )
        if value < 0.0:
            raise ValueError(f"the common noise a0 must be nonnegative, got {value}")
        return float(value)


class RunConfig(StrictModel):
    """
    Schema for one command-line run.

    Attributes:
        command (Command): Sub-command to run.
        scenario (Optional[Path]): Scenario file (None for the default scenario).
        ns (List[int]): Values of N for scheme runs.
        grids (List[int]): Grid sizes for refinement studies.
        tol (Optional[float]): Picard tolerance override.
        budget (Optional[int]): Evaluation budget (MFG solves per scheme run).
        seed (int): Master seed.
        out (Path): Output directory.
    """

    command: Command
    scenario: Optional[Path] = None
    ns: List[int] = [1, 2]
    grids: List[int] = [64, 128]
    tol: Optional[float] = Field(None, gt=0.0)
    budget: Optional[int] = Field(None, ge=1)
    seed: int = 0
    out: Path = Path("runs")
    samples: int = Field(3, ge=1)
    paths: int = Field(64, ge=2)

    @field_validator("ns", "grids")
    @classmethod
    def _ascending(cls, values: List[int]) -> List[int]:
        if any(v < 1 for v in values):
            raise ValueError(f"values must be positive, got {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"values must be strictly ascending, got {values}")
        return values
