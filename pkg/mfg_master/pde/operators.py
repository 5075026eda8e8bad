"""
Discrete Operators Module

This module provides the periodic difference operators used by every solver:
spectral and one-sided derivatives, the implicit diffusion factorization and
the exponentially fitted drift-diffusion flux of the Fokker-Planck scheme,
together with its exact first and second drift derivatives.
"""

from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from mfg_master.measures.grid import TorusGrid

# Series expansions of the Bernoulli function are used below this magnitude.
_SERIES_RADIUS = 0.1

# Peclet numbers are clipped here; the fitted flux is fully upwinded long before.
_PECLET_CLIP = 60.0


def spectral_derivative(values: np.ndarray, grid: TorusGrid, order: int = 1) -> np.ndarray:
    """
    Spectral derivative along the last axis.

    The Nyquist mode is dropped for odd orders so that real data stay real.

    Args:
        values (np.ndarray): Samples of shape (..., cells).
        grid (TorusGrid): The grid.
        order (int, optional): Derivative order. Defaults to 1.

    Returns:
        np.ndarray: D^order of the trigonometric interpolant at the nodes.
    """
    if order == 0:
        return np.array(values, dtype=float)
    coefficients = np.fft.rfft(np.asarray(values, dtype=float), axis=-1)
    multiplier = (1j * grid.wavenumbers) ** order
    if grid.cells % 2 == 0 and order % 2 == 1:
        multiplier[-1] = 0.0
    return np.fft.irfft(coefficients * multiplier, n=grid.cells, axis=-1)


def forward_difference(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return (np.roll(values, -1, axis=-1) - values) / grid.spacing


def backward_difference(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return (values - np.roll(values, 1, axis=-1)) / grid.spacing


def face_average(values: np.ndarray) -> np.ndarray:
    """Average onto the faces i + 1/2 (index i)."""
    return 0.5 * (values + np.roll(values, -1, axis=-1))


def face_divergence(flux: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Cell divergence (F_{i+1/2} - F_{i-1/2}) / h of a face flux."""
    return (flux - np.roll(flux, 1, axis=-1)) / grid.spacing


def discrete_lipschitz(values: np.ndarray, grid: TorusGrid) -> float:
    """Largest slope between neighbouring nodes."""
    return float(np.max(np.abs(forward_difference(values, grid))))


def _periodic_matrix(diagonal: np.ndarray, upper: np.ndarray, lower: np.ndarray) -> sp.csc_matrix:
    """Sparse matrix with row i holding diagonal[i], upper[i] at i+1 and lower[i] at i-1 (periodic)."""
    n = diagonal.size
    index = np.arange(n)
    rows = np.concatenate((index, index, index))
    cols = np.concatenate((index, (index + 1) % n, (index - 1) % n))
    data = np.concatenate((diagonal, upper, lower))
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsc()


class ImplicitDiffusion:
    """
    LU factorization of I - dt * diag(a) * D2 with the periodic three-point Laplacian.

    ``solve`` accepts one right-hand side of shape (cells,) or several stacked
    as (components, cells).
    """

    def __init__(self, grid: TorusGrid, a_values: np.ndarray, dt: float):
        self.grid = grid
        self.a_values = np.array(a_values, dtype=float)
        self.dt = dt
        ratio = dt * self.a_values / grid.spacing**2
        matrix = _periodic_matrix(1.0 + 2.0 * ratio, -ratio, -ratio)
        self._lu = splu(matrix)

    def matches(self, a_values: np.ndarray, dt: float) -> bool:
        return dt == self.dt and np.array_equal(a_values, self.a_values)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 1:
            return self._lu.solve(rhs)
        return self._lu.solve(np.ascontiguousarray(rhs.T)).T


def bernoulli(x: np.ndarray) -> np.ndarray:
    """B(x) = x / (exp(x) - 1), with B(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_RADIUS
    safe = np.where(small, 1.0, x)
    series = 1.0 - x / 2.0 + x**2 / 12.0 - x**4 / 720.0 + x**6 / 30240.0
    return np.where(small, series, safe / np.expm1(safe))


def bernoulli_prime(x: np.ndarray) -> np.ndarray:
    """First derivative of :func:`bernoulli`."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_RADIUS
    safe = np.where(small, 1.0, x)
    series = -0.5 + x / 6.0 - x**3 / 180.0 + x**5 / 5040.0
    closed = (safe / np.expm1(safe)) * (1.0 / safe + 1.0 / np.expm1(-safe))
    return np.where(small, series, closed)


def bernoulli_second(x: np.ndarray) -> np.ndarray:
    """Second derivative of :func:`bernoulli`."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_RADIUS
    safe = np.where(small, 1.0, x)
    series = 1.0 / 6.0 - x**2 / 60.0 + x**4 / 1008.0 - x**6 / 21600.0
    value = safe / np.expm1(safe)
    slope_factor = 1.0 / safe + 1.0 / np.expm1(-safe)
    slope_factor_prime = -1.0 / safe**2 + np.exp(-safe) / np.expm1(-safe) ** 2
    closed = value * slope_factor**2 + value * slope_factor_prime
    return np.where(small, series, closed)


class FittedFluxOperator:
    """
    Exponentially fitted flux for d_t m - (a m)_xx - (b m)_x = 0.

    With w = a m and the face Peclet number P = -b_f h / a_f the face flux is
    J_{i+1/2} = (B(-P) w_i - B(P) w_{i+1}) / h, so that d_t m + div J = 0.
    One implicit step solves (I + dt div J) m^{k+1} = rhs; the matrix is an
    M-matrix with unit column sums, which gives positivity and exact mass.

    Args:
        grid (TorusGrid): The grid.
        a_values (np.ndarray): Diffusion at the nodes.
        b_values (np.ndarray): Drift coefficient b at the nodes.
        dt (float): Time step.
    """

    def __init__(self, grid: TorusGrid, a_values: np.ndarray, b_values: np.ndarray, dt: float):
        self.grid = grid
        self.dt = dt
        self.a_values = np.asarray(a_values, dtype=float)
        self.a_face = face_average(self.a_values)
        b_face = face_average(np.asarray(b_values, dtype=float))
        self.peclet = np.clip(-b_face * grid.spacing / self.a_face, -_PECLET_CLIP, _PECLET_CLIP)
        h = grid.spacing
        # J_f = left_f * m_i - right_f * m_{i+1}
        self.left = bernoulli(-self.peclet) * self.a_values / h
        self.right = bernoulli(self.peclet) * np.roll(self.a_values, -1) / h
        ratio = dt / h
        matrix = _periodic_matrix(
            1.0 + ratio * (self.left + np.roll(self.right, 1)),
            -ratio * self.right,
            -ratio * np.roll(self.left, 1),
        )
        self._lu = splu(matrix)

    def flux(self, density: np.ndarray) -> np.ndarray:
        return self.left * density - self.right * np.roll(density, -1)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def _weighted(self, density: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w = self.a_values * np.asarray(density, dtype=float)
        return w, np.roll(w, -1)

    def variation_flux(self, density: np.ndarray, delta_b: np.ndarray) -> np.ndarray:
        """
        Exact derivative of the face flux of ``density`` in the drift direction ``delta_b``.

        dJ = (db_f / a_f) * (B'(-P) w_i + B'(P) w_{i+1}).
        """
        w_here, w_next = self._weighted(density)
        db_face = face_average(np.asarray(delta_b, dtype=float))
        return (db_face / self.a_face) * (
            bernoulli_prime(-self.peclet) * w_here + bernoulli_prime(self.peclet) * w_next
        )

    def curvature_flux(self, density: np.ndarray, delta_b: np.ndarray, delta_b2: np.ndarray) -> np.ndarray:
        """
        Exact mixed second drift derivative of the face flux of ``density``.

        d2J = h * (db_f db2_f / a_f^2) * (B''(-P) w_i - B''(P) w_{i+1}).
        """
        w_here, w_next = self._weighted(density)
        db_face = face_average(np.asarray(delta_b, dtype=float))
        db2_face = face_average(np.asarray(delta_b2, dtype=float))
        return self.grid.spacing * (db_face * db2_face / self.a_face**2) * (
            bernoulli_second(-self.peclet) * w_here - bernoulli_second(self.peclet) * w_next
        )
