"""
Time Mesh Module

Time meshes, diffusion coefficients and the trajectory container shared by
all parabolic solvers.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from mfg_master.errors import NonEllipticError
from mfg_master.measures.grid import (
    GridDensity,
    GridFunction,
    GridSignedMeasure,
    TorusGrid,
    _frozen,
)

# Maps a mesh step index k to values on the grid at mesh.times[k].
TimeField = Callable[[int], np.ndarray]


@dataclass(frozen=True)
class TimeMesh:
    """
    Uniform mesh of the interval [t0, t1].

    Attributes:
        t0 (float): Initial time.
        t1 (float): Final time.
        steps (int): Number of steps.
    """

    t0: float
    t1: float
    steps: int

    def __post_init__(self) -> None:
        if not self.t1 > self.t0:
            raise ValueError(f"time mesh needs t0 < t1, got [{self.t0}, {self.t1}]")
        if self.steps < 1:
            raise ValueError(f"time mesh needs at least one step, got {self.steps}")

    @classmethod
    def covering(cls, t0: float, t1: float, max_dt: float) -> "TimeMesh":
        """Finest-needed uniform mesh with dt <= max_dt."""
        steps = max(1, math.ceil((t1 - t0) / max_dt - 1e-9))
        return cls(t0, t1, steps)

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @cached_property
    def times(self) -> np.ndarray:
        return _frozen(np.linspace(self.t0, self.t1, self.steps + 1))


@dataclass(frozen=True)
class DiffusionField:
    """
    Diffusion coefficient a(t, x).

    The catalog form is scale * (base + amplitude * cos(frequency * 2 pi x / L));
    an arbitrary vectorized ``func(t, x)`` may replace it.
    """

    base: float = 1.0
    amplitude: float = 0.0
    frequency: int = 1
    scale: float = 1.0
    func: Optional[Callable[[float, np.ndarray], np.ndarray]] = None

    def values(self, t: float, grid: TorusGrid) -> np.ndarray:
        if self.func is not None:
            raw = np.broadcast_to(np.asarray(self.func(t, grid.nodes), dtype=float), (grid.cells,))
            return self.scale * np.array(raw)
        phase = 2.0 * math.pi * self.frequency * grid.nodes / grid.length
        return self.scale * (self.base + self.amplitude * np.cos(phase))

    def scaled(self, factor: float) -> "DiffusionField":
        return DiffusionField(self.base, self.amplitude, self.frequency, self.scale * factor, self.func)

    def lower_bound(self) -> float:
        """Ellipticity constant of the catalog form (not available for ``func``)."""
        return self.scale * (self.base - abs(self.amplitude))


Diffusion = Union[float, DiffusionField, Callable[[float, np.ndarray], np.ndarray]]


def as_diffusion(a: Diffusion) -> DiffusionField:
    """Normalize the accepted diffusion specifications."""
    if isinstance(a, DiffusionField):
        return a
    if callable(a):
        return DiffusionField(func=a)
    return DiffusionField(base=float(a))


def diffusion_values(a: DiffusionField, t: float, grid: TorusGrid) -> np.ndarray:
    """
    Diffusion at time t, checked for uniform ellipticity.

    Raises:
        NonEllipticError: If a is not positive everywhere on the grid.
    """
    values = a.values(t, grid)
    lowest = float(np.min(values))
    if not lowest > 0.0:
        raise NonEllipticError(
            f"diffusion must be uniformly elliptic (a >= 1/C0 > 0), found min a = {lowest:.3e} at t={t:.4f}"
        )
    return values


@dataclass(frozen=True)
class ParabolicTrajectory:
    """
    Snapshots of a solution at every mesh time.

    Attributes:
        mesh (TimeMesh): The time mesh.
        grid (TorusGrid): The spatial grid.
        snapshots (np.ndarray): Array of shape (steps + 1, cells).
        kind (str): "function", "density" or "signed".
    """

    mesh: TimeMesh
    grid: TorusGrid
    snapshots: np.ndarray
    kind: str = "function"

    def __post_init__(self) -> None:
        snapshots = _frozen(self.snapshots)
        if snapshots.shape != (self.mesh.steps + 1, self.grid.cells):
            raise ValueError(
                f"trajectory needs {self.mesh.steps + 1} snapshots of {self.grid.cells} cells, got {snapshots.shape}"
            )
        object.__setattr__(self, "snapshots", snapshots)

    def __len__(self) -> int:
        return self.snapshots.shape[0]

    def values_at(self, k: int) -> np.ndarray:
        return self.snapshots[k]

    @property
    def initial(self) -> np.ndarray:
        return self.snapshots[0]

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def function_at(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.snapshots[k])

    def density_at(self, k: int) -> GridDensity:
        return GridDensity(self.grid, self.snapshots[k])

    def measure_at(self, k: int) -> GridSignedMeasure:
        return GridSignedMeasure(self.grid, self.snapshots[k])

    def field(self) -> TimeField:
        """This trajectory as a time-indexed field."""
        return lambda k: self.snapshots[k]
