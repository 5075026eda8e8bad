"""
Linear Second-Order Master Module

This module provides the exact grid evaluator of the linear second-order
master equation with constant common noise a0,

    U(t, x, m) = int G(x - z, (id - z)#m) Gamma(t, z) dz,

where Gamma is the wrapped heat kernel of a0. The z-quadrature is the full
spatial grid, so every shift is a whole number of cells: translated measures
are exact rotations and the semigroup identity holds up to the kernel
sampling error only.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from mfg_master.measures.grid import GridDensity, GridFunction, TorusGrid, _frozen
from mfg_master.mfg.functionals import MeasureFunctional
from mfg_master.utils.logger import get_logger
from mfg_master.utils.parallel import ordered_map

logger = get_logger(__name__)

# Periodic images summed on each side.
WRAPS = 8

DEFAULT_KERNEL_CUTOFF = 1e-14


@dataclass(frozen=True)
class WrappedHeatKernel:
    """
    Grid samples of the periodic heat kernel of d_t - a0 d_xx after ``duration``.

    Attributes:
        grid (TorusGrid): Grid of the offsets z_j = j * spacing.
        duration (float): Elapsed time t.
        a0 (float): Diffusion coefficient.
        weights (np.ndarray): Kernel values with spacing * sum(weights) = 1.
    """

    grid: TorusGrid
    duration: float
    a0: float
    weights: np.ndarray

    def active(self, cutoff: Optional[float] = None) -> List[Tuple[int, float]]:
        """(offset index, weight) pairs above ``cutoff`` times the largest weight."""
        threshold = 0.0 if cutoff is None else cutoff * float(np.max(self.weights))
        return [(j, float(w)) for j, w in enumerate(self.weights) if w > threshold]


def heat_kernel(grid: TorusGrid, duration: float, a0: float) -> WrappedHeatKernel:
    """
    Build the wrapped Gaussian kernel with periodic images |j| <= 8, renormalized to unit mass.

    A vanishing product duration * a0 gives the single-cell identity kernel.

    Raises:
        ValueError: If duration or a0 is negative.
    """
    if duration < 0.0 or a0 < 0.0:
        raise ValueError(f"heat kernel needs duration >= 0 and a0 >= 0, got {duration} and {a0}")
    weights = np.zeros(grid.cells)
    if duration * a0 <= 0.0:
        weights[0] = 1.0 / grid.spacing
        return WrappedHeatKernel(grid, duration, a0, _frozen(weights))
    spread = 4.0 * a0 * duration
    for j in range(-WRAPS, WRAPS + 1):
        weights += np.exp(-((grid.nodes + j * grid.length) ** 2) / spread)
    weights /= math.sqrt(math.pi * spread)
    weights /= grid.spacing * float(np.sum(weights))
    return WrappedHeatKernel(grid, duration, a0, _frozen(weights))


def _shifted(values: np.ndarray, j: int) -> np.ndarray:
    """The measure (id - z_j)# m as values."""
    return np.roll(values, -j)


def convolve_functional(
    evaluate: Callable[[GridDensity], np.ndarray],
    kernel: WrappedHeatKernel,
    m: GridDensity,
    cutoff: Optional[float] = None,
) -> np.ndarray:
    """
    spacing * sum_j w_j * F(x - z_j, (id - z_j)# m) for F given by ``evaluate(m_j)``.

    Args:
        evaluate (Callable[[GridDensity], np.ndarray]): Density to values over the x grid.
        kernel (WrappedHeatKernel): Quadrature weights.
        m (GridDensity): Density argument.
        cutoff (Optional[float]): Relative weight below which offsets are skipped.

    Returns:
        np.ndarray: The convolution over the x grid.
    """
    # shifted evaluations may run concurrently; the sum keeps offset order
    grid = kernel.grid
    offsets = kernel.active(cutoff)

    def shifted_value(offset: Tuple[int, float]) -> np.ndarray:
        return evaluate(GridDensity(grid, _shifted(m.values, offset[0])))

    values = ordered_map(shifted_value, offsets)
    total = np.zeros(grid.cells)
    for (j, weight), value in zip(offsets, values):
        total += weight * np.roll(value, j)
    return grid.spacing * total


def eval_linear_master(
    terminal: MeasureFunctional,
    duration: float,
    m: GridDensity,
    a0: float,
    x0: float = 0.0,
    kernel_cutoff: Optional[float] = None,
) -> GridFunction:
    """
    U(duration, ., m) for the linear second-order master equation with terminal G.

    Args:
        terminal (MeasureFunctional): G(x0, x, m).
        duration (float): Elapsed time (0 returns G itself).
        m (GridDensity): Density argument.
        a0 (float): Common-noise coefficient.
        x0 (float, optional): Major state passed through to G. Defaults to 0.0.
        kernel_cutoff (Optional[float]): Relative weight cutoff; None uses the full grid.

    Returns:
        GridFunction: U over the x grid.
    """
    terminal.grid.require_same(m.grid, "terminal and measure")
    if duration == 0.0:
        return terminal.as_function(m, x0)
    kernel = heat_kernel(m.grid, duration, a0)
    values = convolve_functional(lambda mu: terminal.evaluate(mu, x0), kernel, m, kernel_cutoff)
    return GridFunction(m.grid, values)


def dm_linear_master(
    terminal: MeasureFunctional,
    duration: float,
    m: GridDensity,
    rho: np.ndarray,
    a0: float,
    x0: float = 0.0,
) -> GridFunction:
    """
    dU/dm(duration, ., m)(rho): the flat derivative of G convolved with jointly translated (x, m, rho).

    Raises:
        MissingDerivativeError: If G has no flat derivative.
    """
    rho = np.asarray(rho, dtype=float)
    if duration == 0.0:
        return GridFunction(m.grid, terminal.flat_derivative(m, rho, x0))
    kernel = heat_kernel(m.grid, duration, a0)
    grid = m.grid
    total = np.zeros(grid.cells)
    for j, weight in kernel.active():
        shifted = GridDensity(grid, _shifted(m.values, j))
        total += weight * np.roll(terminal.flat_derivative(shifted, _shifted(rho, j), x0), j)
    return GridFunction(grid, grid.spacing * total)


class LinearMasterFunctional(MeasureFunctional):
    """U(duration, ., .) of the linear master equation, usable as a terminal in turn."""

    name = "linear master value"

    def __init__(self, terminal: MeasureFunctional, duration: float, a0: float, kernel_cutoff: Optional[float] = None):
        self.grid = terminal.grid
        self.terminal = terminal
        self.duration = duration
        self.a0 = a0
        self.kernel_cutoff = kernel_cutoff

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return eval_linear_master(self.terminal, self.duration, m, self.a0, x0, self.kernel_cutoff).values

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        return dm_linear_master(self.terminal, self.duration, m, rho, self.a0, x0).values


def semigroup_check(
    terminal: MeasureFunctional,
    first: float,
    second: float,
    a0: float,
    samples: Sequence[GridDensity],
    x0: float = 0.0,
) -> float:
    """
    Largest deviation between U(first) applied after U(second) and U(first + second).

    Args:
        terminal (MeasureFunctional): G.
        first (float): Outer duration s.
        second (float): Inner duration t.
        a0 (float): Common-noise coefficient.
        samples (Sequence[GridDensity]): Densities at which both sides are compared.
        x0 (float, optional): Major state. Defaults to 0.0.

    Returns:
        float: sup over samples and x of the deviation.
    """
    inner = LinearMasterFunctional(terminal, second, a0)
    deviation = 0.0
    for m in samples:
        composed = eval_linear_master(inner, first, m, a0, x0).values
        direct = eval_linear_master(terminal, first + second, m, a0, x0).values
        deviation = max(deviation, float(np.max(np.abs(composed - direct))))
    logger.debug(f"Semigroup check s={first}, t={second}: deviation {deviation:.3e}")
    return deviation
