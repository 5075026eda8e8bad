"""
Measure Functionals Module

This module provides the interface of functionals G(x0, x, m) and
G0(x0, m) used as terminal conditions and as master-equation values, and the
quadratic-convolution catalog terminal

    G(x0, x, m) = g(x) + gamma cos(w(x - x0)) + a Psi(x) + (b/2) Psi(x)^2
                  + e M + (q/2) M^2 + delta int cos(w(y - x0)) m(dy),

with Psi = psi * m and M = int eta dm.

Flat derivatives are normalized, dG/dm(m)(rho) = raw(rho - rho(1) m), so that
dG/dm(m)(m) = 0. Second flat derivatives act on the zero-mass parts of both
directions. Capabilities a functional lacks raise MissingDerivativeError.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from mfg_master.errors import IncompatibleGridError, MissingDerivativeError
from mfg_master.measures.grid import GridDensity, GridFunction, TorusGrid
from mfg_master.pde.hamiltonian import FourierKernel

Points = Union[float, np.ndarray]


class MeasureFunctional(ABC):
    """
    A functional x -> G(x0, x, m) sampled on a grid.

    Measure directions ``rho`` are value arrays on the grid of ``m``.
    """

    grid: TorusGrid
    name: str = "functional"

    @abstractmethod
    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        """Values G(x0, x_i, m) at the grid nodes."""

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        """dG/dm(x0, x_i, m)(rho), normalized."""
        raise MissingDerivativeError(self.name, "flat_derivative")

    def second_flat_derivative(
        self, m: GridDensity, rho: np.ndarray, rho2: np.ndarray, x0: float = 0.0
    ) -> np.ndarray:
        raise MissingDerivativeError(self.name, "second_flat_derivative")

    def x0_derivative(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        raise MissingDerivativeError(self.name, "x0_derivative")

    def x0_second_derivative(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        raise MissingDerivativeError(self.name, "x0_second_derivative")

    def x0_flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        raise MissingDerivativeError(self.name, "x0_flat_derivative")

    def as_function(self, m: GridDensity, x0: float = 0.0) -> GridFunction:
        return GridFunction(self.grid, self.evaluate(m, x0))


class ScalarMeasureFunctional(ABC):
    """A functional (x0, m) -> G0(x0, m), vectorized over x0 points."""

    name: str = "scalar functional"

    @abstractmethod
    def values(self, m: GridDensity, x0_points: np.ndarray) -> np.ndarray:
        """G0(x0_j, m) for every point."""

    def value(self, m: GridDensity, x0: float) -> float:
        return float(self.values(m, np.array([x0]))[0])

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0_points: np.ndarray) -> np.ndarray:
        raise MissingDerivativeError(self.name, "flat_derivative")

    def second_flat_derivative(
        self, m: GridDensity, rho: np.ndarray, rho2: np.ndarray, x0_points: np.ndarray
    ) -> np.ndarray:
        raise MissingDerivativeError(self.name, "second_flat_derivative")

    def x0_derivative(self, m: GridDensity, x0_points: np.ndarray) -> np.ndarray:
        raise MissingDerivativeError(self.name, "x0_derivative")


def zero_mass_values(m: GridDensity, rho: np.ndarray) -> np.ndarray:
    """rho - rho(1) m as values."""
    rho = np.asarray(rho, dtype=float)
    return rho - m.grid.spacing * float(np.sum(rho)) * m.values


@dataclass(frozen=True)
class CatalogTerminalForm:
    """
    Coefficients of the catalog terminal, evaluated at arbitrary points.

    Attributes:
        base (FourierKernel): g(x) as a trigonometric polynomial.
        gamma (float): Amplitude of cos(w(x - x0)).
        a (float): Linear strength of Psi.
        b (float): Quadratic strength of Psi.
        psi (FourierKernel): Convolution kernel.
        e (float): Linear strength of M.
        q (float): Quadratic strength of M.
        eta (FourierKernel): Moment function eta(y).
        delta (float): Strength of int cos(w(y - x0)) dm.
        length (float): Period used for the phases.
    """

    base: FourierKernel = FourierKernel()
    gamma: float = 0.0
    a: float = 0.0
    b: float = 0.0
    psi: FourierKernel = FourierKernel()
    e: float = 0.0
    q: float = 0.0
    eta: FourierKernel = FourierKernel()
    delta: float = 0.0
    length: float = 2.0 * math.pi

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.length

    def _psi(self, points: np.ndarray, values: np.ndarray, grid: TorusGrid) -> np.ndarray:
        moments = self.psi.moments(values, grid.nodes, grid.spacing, self.omega)
        return self.psi.convolve(points, moments, self.omega)

    def _psi_dx(self, points: np.ndarray, values: np.ndarray, grid: TorusGrid) -> np.ndarray:
        moments = self.psi.moments(values, grid.nodes, grid.spacing, self.omega)
        return self.psi.convolve_derivative(points, moments, self.omega)

    def _moment(self, values: np.ndarray, grid: TorusGrid) -> float:
        return grid.spacing * float(np.dot(self.eta.values(grid.nodes, self.omega), values))

    def _pairing(
        self, values: np.ndarray, grid: TorusGrid, x0: Points
    ) -> Tuple[np.ndarray, np.ndarray]:
        """int cos(w(y - x0)) dm and int sin(w(y - x0)) dm."""
        phase = self.omega * grid.nodes
        c = grid.spacing * float(np.dot(np.cos(phase), values))
        s = grid.spacing * float(np.dot(np.sin(phase), values))
        wx0 = self.omega * np.asarray(x0, dtype=float)
        return c * np.cos(wx0) + s * np.sin(wx0), s * np.cos(wx0) - c * np.sin(wx0)

    def value(self, points: np.ndarray, m: GridDensity, x0: Points = 0.0) -> np.ndarray:
        grid = m.grid
        psi_m = self._psi(points, m.values, grid)
        big_m = self._moment(m.values, grid)
        total = (
            self.base.values(points, self.omega)
            + self.a * psi_m
            + 0.5 * self.b * psi_m**2
            + self.e * big_m
            + 0.5 * self.q * big_m**2
        )
        if self.gamma != 0.0:
            total = total + self.gamma * np.cos(self.omega * (points - x0))
        if self.delta != 0.0:
            total = total + self.delta * self._pairing(m.values, grid, x0)[0]
        return total

    def space_derivative(self, points: np.ndarray, m: GridDensity, x0: Points = 0.0) -> np.ndarray:
        """d/dx G at the points."""
        grid = m.grid
        psi_m = self._psi(points, m.values, grid)
        total = self.base.derivative(points, self.omega) + (self.a + self.b * psi_m) * self._psi_dx(
            points, m.values, grid
        )
        if self.gamma != 0.0:
            total = total - self.gamma * self.omega * np.sin(self.omega * (points - x0))
        return total

    def flat(self, points: np.ndarray, m: GridDensity, rho: np.ndarray, x0: Points = 0.0) -> np.ndarray:
        grid = m.grid
        direction = zero_mass_values(m, rho)
        psi_m = self._psi(points, m.values, grid)
        psi_rho = self._psi(points, direction, grid)
        big_m = self._moment(m.values, grid)
        m_rho = self._moment(direction, grid)
        total = (self.a + self.b * psi_m) * psi_rho + (self.e + self.q * big_m) * m_rho
        if self.delta != 0.0:
            total = total + self.delta * self._pairing(direction, grid, x0)[0]
        return total

    def flat2(self, points: np.ndarray, m: GridDensity, rho: np.ndarray, rho2: np.ndarray) -> np.ndarray:
        grid = m.grid
        first, second = zero_mass_values(m, rho), zero_mass_values(m, rho2)
        psi_1 = self._psi(points, first, grid)
        psi_2 = self._psi(points, second, grid)
        return self.b * psi_1 * psi_2 + self.q * self._moment(first, grid) * self._moment(second, grid)

    def x0_derivative(self, points: np.ndarray, m: GridDensity, x0: Points) -> np.ndarray:
        """d/dx0 G; the pairing term gives delta w int sin(w(y - x0)) dm."""
        total = self.gamma * self.omega * np.sin(self.omega * (points - x0))
        if self.delta != 0.0:
            total = total + self.delta * self.omega * self._pairing(m.values, m.grid, x0)[1]
        return total

    def x0_second_derivative(self, points: np.ndarray, m: GridDensity, x0: Points) -> np.ndarray:
        total = -self.gamma * self.omega**2 * np.cos(self.omega * (points - x0))
        if self.delta != 0.0:
            total = total - self.delta * self.omega**2 * self._pairing(m.values, m.grid, x0)[0]
        return total

    def x0_flat(self, points: np.ndarray, m: GridDensity, rho: np.ndarray, x0: Points) -> np.ndarray:
        direction = zero_mass_values(m, rho)
        pairing_dx0 = self._pairing(direction, m.grid, x0)[1]
        return np.zeros(np.shape(points)) + self.delta * self.omega * pairing_dx0


class CatalogTerminal(MeasureFunctional):
    """
    The catalog terminal G(x0, x, m) on the nodes of ``grid``.

    Args:
        grid (TorusGrid): Spatial grid (also the grid of the measures).
        form (CatalogTerminalForm): Coefficients.
    """

    name = "catalog terminal"

    def __init__(self, grid: TorusGrid, form: CatalogTerminalForm):
        self.grid = grid
        self.form = form

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        self.grid.require_same(m.grid, "terminal and measure")
        return self.form.value(self.grid.nodes, m, x0)

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        return self.form.flat(self.grid.nodes, m, rho, x0)

    def second_flat_derivative(
        self, m: GridDensity, rho: np.ndarray, rho2: np.ndarray, x0: float = 0.0
    ) -> np.ndarray:
        return self.form.flat2(self.grid.nodes, m, rho, rho2)

    def x0_derivative(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return self.form.x0_derivative(self.grid.nodes, m, x0)

    def x0_second_derivative(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return self.form.x0_second_derivative(self.grid.nodes, m, x0)

    def x0_flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        return self.form.x0_flat(self.grid.nodes, m, rho, x0)


class CatalogScalarTerminal(ScalarMeasureFunctional):
    """
    The major terminal G0(x0, m): the catalog form with x read as x0.

    The x0-coupling terms (gamma, delta) of the form are ignored.
    """

    name = "catalog major terminal"

    def __init__(self, form: CatalogTerminalForm):
        self.form = form

    def values(self, m: GridDensity, x0_points: np.ndarray) -> np.ndarray:
        return self._plain().value(np.asarray(x0_points, dtype=float), m)

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0_points: np.ndarray) -> np.ndarray:
        return self._plain().flat(np.asarray(x0_points, dtype=float), m, rho)

    def second_flat_derivative(
        self, m: GridDensity, rho: np.ndarray, rho2: np.ndarray, x0_points: np.ndarray
    ) -> np.ndarray:
        return self._plain().flat2(np.asarray(x0_points, dtype=float), m, rho, rho2)

    def x0_derivative(self, m: GridDensity, x0_points: np.ndarray) -> np.ndarray:
        return self._plain().space_derivative(np.asarray(x0_points, dtype=float), m)

    def _plain(self) -> CatalogTerminalForm:
        form = self.form
        if form.gamma == 0.0 and form.delta == 0.0:
            return form
        return CatalogTerminalForm(
            base=form.base, a=form.a, b=form.b, psi=form.psi, e=form.e, q=form.q, eta=form.eta, length=form.length
        )


class FunctionValuedTerminal(MeasureFunctional):
    """
    Terminal built from plain callables, for library use and tests.

    Args:
        grid (TorusGrid): Spatial grid.
        func (Callable): (x0, m) -> values at the nodes.
        flat (Optional[Callable]): (x0, m, rho) -> normalized flat derivative.
    """

    name = "function-valued terminal"

    def __init__(
        self,
        grid: TorusGrid,
        func: Callable[[float, GridDensity], np.ndarray],
        flat: Optional[Callable[[float, GridDensity, np.ndarray], np.ndarray]] = None,
    ):
        self.grid = grid
        self._func = func
        self._flat = flat

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return np.broadcast_to(np.asarray(self._func(x0, m), dtype=float), (self.grid.cells,)).copy()

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        if self._flat is None:
            return super().flat_derivative(m, rho, x0)
        return np.broadcast_to(np.asarray(self._flat(x0, m, rho), dtype=float), (self.grid.cells,)).copy()


class FixedTerminal(MeasureFunctional):
    """
    Terminal values frozen at one measure; ``evaluate`` ignores its argument.

    Args:
        grid (TorusGrid): Spatial grid.
        values (np.ndarray): Values at the nodes.
    """

    name = "fixed terminal"

    def __init__(self, grid: TorusGrid, values: np.ndarray):
        self.grid = grid
        self.values = _frozen_values(values, grid)

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return np.array(self.values)

    def flat_derivative(self, m: GridDensity, rho: np.ndarray, x0: float = 0.0) -> np.ndarray:
        return np.zeros(self.grid.cells)


def _frozen_values(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.shape != (grid.cells,):
        raise IncompatibleGridError(f"terminal values have shape {array.shape}, grid has {grid.cells} cells")
    array.setflags(write=False)
    return array
