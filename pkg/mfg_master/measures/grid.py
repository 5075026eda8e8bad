"""
Torus Grid Module

This module provides the uniform periodic mesh and the immutable grid objects
that live on it: probability densities, signed measures and functions. All
values are cell values on the nodes x_i = i * spacing.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Tuple, Union

import numpy as np

from mfg_master.errors import IncompatibleGridError

# Construction tolerance on the unit mass. Cache keys round every cell to
# 1e-12, which moves the total by up to length * 5e-13.
MASS_TOLERANCE = 1e-10

MIN_CELLS = 8


def _frozen(values: np.ndarray) -> np.ndarray:
    """Return a read-only float64 copy of ``values``."""
    array = np.array(values, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TorusGrid:
    """
    Uniform mesh of the one-dimensional torus [0, length).

    Attributes:
        length (float): Period of the domain.
        cells (int): Number of cells n (at least 8).
    """

    length: float = 2.0 * math.pi
    cells: int = 64

    def __post_init__(self) -> None:
        if not self.length > 0.0:
            raise ValueError(f"torus length must be positive, got {self.length}")
        if int(self.cells) != self.cells or self.cells < MIN_CELLS:
            raise ValueError(f"torus needs an integer number of cells >= {MIN_CELLS}, got {self.cells}")

    @property
    def spacing(self) -> float:
        return self.length / self.cells

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen(np.arange(self.cells) * self.spacing)

    @cached_property
    def signed_nodes(self) -> np.ndarray:
        """Node offsets reduced to (-length/2, length/2]."""
        index = np.arange(self.cells)
        index = np.where(index > self.cells // 2, index - self.cells, index)
        return _frozen(index * self.spacing)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT modes."""
        return _frozen(2.0 * math.pi / self.length * np.arange(self.cells // 2 + 1))

    def require_same(self, other: "TorusGrid", what: str = "operands") -> None:
        """
        Check that ``other`` is the same torus.

        Raises:
            IncompatibleGridError: If the grids differ.
        """
        if self != other:
            raise IncompatibleGridError(
                f"{what} live on different tori: {self} vs {other}"
            )

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Evaluate a vectorized function at the nodes."""
        return np.broadcast_to(np.asarray(func(self.nodes), dtype=float), (self.cells,)).copy()


@dataclass(frozen=True)
class GridFunction:
    """A real function sampled at the grid nodes."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != (self.grid.cells,):
            raise ValueError(f"expected {self.grid.cells} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: TorusGrid, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(grid, grid.sample(func))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class GridSignedMeasure:
    """
    A signed measure with density ``values`` with respect to Lebesgue measure.

    The total mass is cached at construction.
    """

    grid: TorusGrid
    values: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != (self.grid.cells,):
            raise ValueError(f"expected {self.grid.cells} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("signed measure has non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "total_mass", float(self.grid.spacing * np.sum(values)))

    @classmethod
    def zero(cls, grid: TorusGrid) -> "GridSignedMeasure":
        return cls(grid, np.zeros(grid.cells))

    def __add__(self, other: "GridSignedMeasure") -> "GridSignedMeasure":
        self.grid.require_same(other.grid)
        return GridSignedMeasure(self.grid, self.values + other.values)

    def __sub__(self, other: "GridSignedMeasure") -> "GridSignedMeasure":
        self.grid.require_same(other.grid)
        return GridSignedMeasure(self.grid, self.values - other.values)

    def scaled(self, factor: float) -> "GridSignedMeasure":
        return GridSignedMeasure(self.grid, factor * self.values)


@dataclass(frozen=True)
class GridDensity:
    """
    A probability density on the torus (nonnegative, unit mass).

    Raises:
        ValueError: If values are negative or the mass differs from 1.
    """

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != (self.grid.cells,):
            raise ValueError(f"expected {self.grid.cells} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("density values must be finite and nonnegative")
        mass = self.grid.spacing * float(np.sum(values))
        if abs(mass - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"density has mass {mass!r}, expected 1")
        object.__setattr__(self, "values", values)

    @classmethod
    def normalized(cls, grid: TorusGrid, values: np.ndarray) -> "GridDensity":
        """Build a density from nonnegative weights by rescaling to unit mass."""
        weights = np.asarray(values, dtype=float)
        if np.any(weights < 0.0):
            raise ValueError("density weights must be nonnegative")
        total = grid.spacing * float(np.sum(weights))
        if not total > 0.0:
            raise ValueError("density weights have zero mass")
        return cls(grid, weights / total)

    @classmethod
    def uniform(cls, grid: TorusGrid) -> "GridDensity":
        return cls(grid, np.full(grid.cells, 1.0 / grid.length))

    @classmethod
    def single_cell(cls, grid: TorusGrid, index: int) -> "GridDensity":
        """Unit mass concentrated on one cell (the grid stand-in for a Dirac mass)."""
        values = np.zeros(grid.cells)
        values[index % grid.cells] = 1.0 / grid.spacing
        return cls(grid, values)

    @classmethod
    def von_mises(cls, grid: TorusGrid, center: float = 0.0, concentration: float = 1.0) -> "GridDensity":
        phase = 2.0 * math.pi * (grid.nodes - center) / grid.length
        return cls.normalized(grid, np.exp(concentration * (np.cos(phase) - 1.0)))

    @classmethod
    def wrapped_gaussian(
        cls, grid: TorusGrid, center: float = 0.0, variance: float = 0.1, wraps: int = 8
    ) -> "GridDensity":
        offsets = grid.nodes - center
        total = np.zeros(grid.cells)
        for j in range(-wraps, wraps + 1):
            total += np.exp(-((offsets + j * grid.length) ** 2) / (2.0 * variance))
        return cls.normalized(grid, total)

    def as_signed(self) -> GridSignedMeasure:
        return GridSignedMeasure(self.grid, self.values)

    def mix(self, other: "GridDensity", weight: float) -> "GridDensity":
        """Convex combination (1 - weight) * self + weight * other."""
        self.grid.require_same(other.grid)
        return GridDensity.normalized(self.grid, (1.0 - weight) * self.values + weight * other.values)

    def perturbed(self, direction: GridSignedMeasure, step: float) -> "GridDensity":
        """
        The density m + step * direction for a zero-mass direction.

        Raises:
            ValueError: If the perturbation leaves the probability simplex.
        """
        self.grid.require_same(direction.grid)
        return GridDensity(self.grid, self.values + step * direction.values)


Measure = Union[GridDensity, GridSignedMeasure]


def smooth_random_density(grid: TorusGrid, rng: np.random.Generator, modes: int = 3, amplitude: float = 0.6) -> GridDensity:
    """
    Draw a smooth positive density: uniform plus a few random Fourier modes.

    Args:
        grid (TorusGrid): Target grid.
        rng (np.random.Generator): Random stream.
        modes (int, optional): Highest frequency used. Defaults to 3.
        amplitude (float, optional): Total relative amplitude (< 1 keeps positivity). Defaults to 0.6.

    Returns:
        GridDensity: The sampled density.
    """
    phase = 2.0 * math.pi * grid.nodes / grid.length
    coefficients = rng.uniform(-1.0, 1.0, size=(modes, 2))
    coefficients *= amplitude / max(np.sum(np.abs(coefficients)), 1e-300)
    profile = np.ones(grid.cells)
    for k in range(modes):
        profile += coefficients[k, 0] * np.cos((k + 1) * phase) + coefficients[k, 1] * np.sin((k + 1) * phase)
    return GridDensity.normalized(grid, profile)


def integrate_against(measure: Measure, f: Union[GridFunction, np.ndarray]) -> float:
    """
    Integrate a grid function against a density or signed measure.

    Args:
        measure (Measure): The measure.
        f (Union[GridFunction, np.ndarray]): Function values on the same grid.

    Returns:
        float: spacing * sum(f * values).
    """
    if isinstance(f, GridFunction):
        measure.grid.require_same(f.grid, "measure and function")
        values = f.values
    else:
        values = np.asarray(f, dtype=float)
        if values.shape != (measure.grid.cells,):
            raise IncompatibleGridError(
                f"function has shape {values.shape}, measure has {measure.grid.cells} cells"
            )
    return float(measure.grid.spacing * np.dot(values, measure.values))


def moment2(m: GridDensity) -> float:
    """
    Periodic second moment about the origin.

    Diagnostic only: on the torus the distance to 0 is min(x, length - x).
    """
    distance = np.abs(m.grid.signed_nodes)
    return float(math.sqrt(m.grid.spacing * np.dot(distance**2, m.values)))


def translate_values(values: np.ndarray, grid: TorusGrid, z: float) -> np.ndarray:
    """
    Values of the push-forward by x -> x - z, with linear interpolation between cells.

    new[i] = values at x_i + z; exact rotation when z is a multiple of the spacing.
    """
    shift = (z % grid.length) / grid.spacing
    nearest = round(shift)
    if abs(shift - nearest) < 1e-9:
        return np.roll(values, -(int(nearest) % grid.cells))
    base = math.floor(shift)
    frac = shift - base
    return (1.0 - frac) * np.roll(values, -base) + frac * np.roll(values, -(base + 1))


def pushforward_translate(m: GridDensity, z: float) -> GridDensity:
    """
    Image of ``m`` under x -> x - z.

    Args:
        m (GridDensity): Density to transport.
        z (float): Shift, reduced modulo the torus length.

    Returns:
        GridDensity: The translated density (mass preserving).
    """
    return GridDensity(m.grid, translate_values(m.values, m.grid, z))


def translate_signed(rho: GridSignedMeasure, z: float) -> GridSignedMeasure:
    """Signed-measure analogue of :func:`pushforward_translate`."""
    return GridSignedMeasure(rho.grid, translate_values(rho.values, rho.grid, z))


def zero_mass_part(rho: GridSignedMeasure, m: GridDensity) -> Tuple[GridSignedMeasure, float]:
    """
    Split ``rho`` as (rho - c m) + c m with c the total mass of ``rho``.

    Returns:
        Tuple[GridSignedMeasure, float]: The zero-mass part and c.
    """
    rho.grid.require_same(m.grid)
    mass = rho.total_mass
    return GridSignedMeasure(rho.grid, rho.values - mass * m.values), mass


def dirac_direction(grid: TorusGrid, index: int) -> GridSignedMeasure:
    """Single-cell unit mass as a signed measure."""
    return GridDensity.single_cell(grid, index).as_signed()
