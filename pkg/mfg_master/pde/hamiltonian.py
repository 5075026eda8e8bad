"""
Catalog Hamiltonian Module

This module provides the quadratic-convolution Hamiltonian

    H(x0, x, p, m) = (kappa/2) p^2 + beta p Phi(x) - c0 Psi(x) - (c2/2) Psi(x)^2
                     + alpha (p sin(w(x - x0)) - cos(w(x - x0)))

with Psi = psi * m, Phi = phi * m and w = 2 pi / length. The kernels are
trigonometric polynomials, so every derivative the linearized systems need
exists in closed form. Flat derivatives are normalized:
dF/dm(m)(rho) = raw(rho) - raw(m) * rho(1).
"""

import math
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np

from mfg_master.measures.grid import GridDensity

KernelTerm = Tuple[int, float, float]


@dataclass(frozen=True)
class FourierKernel:
    """
    Periodic kernel psi(z) = sum over terms of c cos(f w z) + s sin(f w z).

    Attributes:
        terms (Tuple[KernelTerm, ...]): (frequency, cosine, sine) triples.
    """

    terms: Tuple[KernelTerm, ...] = ()

    @classmethod
    def of(cls, terms: Sequence[Sequence[float]]) -> "FourierKernel":
        return cls(tuple((int(f), float(c), float(s)) for f, c, s in terms))

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 and s == 0.0 for _, c, s in self.terms)

    def moments(self, values: np.ndarray, nodes: np.ndarray, spacing: float, omega: float) -> np.ndarray:
        """Integrals of cos(f w y) and sin(f w y) against the measure, shape (terms, 2)."""
        out = np.empty((len(self.terms), 2))
        for row, (freq, _, _) in enumerate(self.terms):
            phase = freq * omega * nodes
            out[row, 0] = spacing * float(np.dot(np.cos(phase), values))
            out[row, 1] = spacing * float(np.dot(np.sin(phase), values))
        return out

    def values(self, points: np.ndarray, omega: float) -> np.ndarray:
        total = np.zeros(np.shape(points))
        for freq, c, s in self.terms:
            total += c * np.cos(freq * omega * points) + s * np.sin(freq * omega * points)
        return total

    def derivative(self, points: np.ndarray, omega: float) -> np.ndarray:
        total = np.zeros(np.shape(points))
        for freq, c, s in self.terms:
            rate = freq * omega
            total += rate * (s * np.cos(rate * points) - c * np.sin(rate * points))
        return total

    def convolve(self, points: np.ndarray, moments: np.ndarray, omega: float) -> np.ndarray:
        """(psi * mu)(x) at ``points`` from the moments of mu."""
        total = np.zeros(np.shape(points))
        for row, (freq, c, s) in enumerate(self.terms):
            cos_x, sin_x = np.cos(freq * omega * points), np.sin(freq * omega * points)
            big_c, big_s = moments[row]
            total += c * (big_c * cos_x + big_s * sin_x) + s * (big_c * sin_x - big_s * cos_x)
        return total

    def convolve_derivative(self, points: np.ndarray, moments: np.ndarray, omega: float) -> np.ndarray:
        """d/dx (psi * mu)(x) at ``points``."""
        total = np.zeros(np.shape(points))
        for row, (freq, c, s) in enumerate(self.terms):
            rate = freq * omega
            cos_x, sin_x = np.cos(rate * points), np.sin(rate * points)
            big_c, big_s = moments[row]
            total += rate * (c * (big_s * cos_x - big_c * sin_x) + s * (big_c * cos_x + big_s * sin_x))
        return total


@dataclass(frozen=True)
class CatalogHamiltonian:
    """
    Coefficients of the quadratic-convolution Hamiltonian.

    Attributes:
        kappa (float): Quadratic coefficient (positive).
        beta (float): Strength of the p-coupling through Phi.
        c0 (float): Linear strength of the Psi coupling.
        c2 (float): Quadratic strength of the Psi coupling.
        alpha (float): Amplitude of the x0 coupling.
        psi (FourierKernel): Kernel of the running-cost coupling.
        phi (FourierKernel): Kernel of the drift coupling.
        length (float): Period used for the phases.
        growth_c0 (float): Declared constant of |D_x H| <= C0 (1 + |p|^gamma).
        growth_gamma (float): Declared exponent of the same bound.
    """

    kappa: float = 1.0
    beta: float = 0.0
    c0: float = 0.0
    c2: float = 0.0
    alpha: float = 0.0
    psi: FourierKernel = FourierKernel()
    phi: FourierKernel = FourierKernel()
    length: float = 2.0 * math.pi
    growth_c0: float = 1.0
    growth_gamma: float = 1.0

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.length

    @property
    def is_measure_independent(self) -> bool:
        return (self.beta == 0.0 or self.phi.is_zero) and (
            (self.c0 == 0.0 and self.c2 == 0.0) or self.psi.is_zero
        )

    def scaled(self, factor: float) -> "CatalogHamiltonian":
        """The Hamiltonian factor * H (all coefficients are linear in H)."""
        return replace(
            self,
            kappa=factor * self.kappa,
            beta=factor * self.beta,
            c0=factor * self.c0,
            c2=factor * self.c2,
            alpha=factor * self.alpha,
        )

    def without_x0_coupling(self) -> "CatalogHamiltonian":
        return replace(self, alpha=0.0)

    def frozen(self, m: GridDensity, points: np.ndarray, x0: float = 0.0) -> "FrozenHamiltonian":
        """Freeze the measure and the major state; ``points`` are the spatial evaluation points."""
        return FrozenHamiltonian(self, m, np.asarray(points, dtype=float), float(x0))


class FrozenHamiltonian:
    """
    The catalog Hamiltonian with (x0, m) fixed, evaluated at fixed points.

    Every method taking ``p`` returns an array of the shape of the points.
    Measure directions ``rho`` are value arrays on the grid of ``m``.
    """

    def __init__(self, catalog: CatalogHamiltonian, m: GridDensity, points: np.ndarray, x0: float):
        self.catalog = catalog
        self.m = m
        self.points = points
        self.x0 = x0
        omega = catalog.omega
        self._grid = m.grid
        self._psi_moments = catalog.psi.moments(m.values, m.grid.nodes, m.grid.spacing, omega)
        self._phi_moments = catalog.phi.moments(m.values, m.grid.nodes, m.grid.spacing, omega)
        self.psi_m = catalog.psi.convolve(points, self._psi_moments, omega)
        self.phi_m = catalog.phi.convolve(points, self._phi_moments, omega)
        phase = omega * (points - x0)
        self._sin = np.sin(phase)
        self._cos = np.cos(phase)

    def _variation(self, rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Normalized (Psi, Phi) variations in the direction rho."""
        grid = self._grid
        omega = self.catalog.omega
        rho = np.asarray(rho, dtype=float)
        mass = grid.spacing * float(np.sum(rho))
        psi_moments = self.catalog.psi.moments(rho, grid.nodes, grid.spacing, omega) - mass * self._psi_moments
        phi_moments = self.catalog.phi.moments(rho, grid.nodes, grid.spacing, omega) - mass * self._phi_moments
        return (
            self.catalog.psi.convolve(self.points, psi_moments, omega),
            self.catalog.phi.convolve(self.points, phi_moments, omega),
        )

    def value(self, p: np.ndarray) -> np.ndarray:
        s = self.catalog
        return (
            0.5 * s.kappa * p**2
            + s.beta * p * self.phi_m
            - s.c0 * self.psi_m
            - 0.5 * s.c2 * self.psi_m**2
            + s.alpha * (p * self._sin - self._cos)
        )

    def dp(self, p: np.ndarray) -> np.ndarray:
        s = self.catalog
        return s.kappa * p + s.beta * self.phi_m + s.alpha * self._sin

    def dpp(self, p: np.ndarray) -> np.ndarray:
        return np.full(np.shape(p), self.catalog.kappa, dtype=float)

    def dppp(self, p: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(p))

    def flat(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """dH/dm(rho)."""
        s = self.catalog
        psi_rho, phi_rho = self._variation(rho)
        return s.beta * p * phi_rho - s.c0 * psi_rho - s.c2 * self.psi_m * psi_rho

    def flat_dp(self, rho: np.ndarray) -> np.ndarray:
        """dH_p/dm(rho); independent of p."""
        return self.catalog.beta * self._variation(rho)[1]

    def flat_dpp(self, rho: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(self.points))

    def flat2(self, rho: np.ndarray, rho2: np.ndarray) -> np.ndarray:
        """d2H/dm2(rho, rho2)."""
        psi_rho = self._variation(rho)[0]
        psi_rho2 = self._variation(rho2)[0]
        return -self.catalog.c2 * psi_rho * psi_rho2

    def flat2_dp(self, rho: np.ndarray, rho2: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(self.points))

    def dx0(self, p: np.ndarray) -> np.ndarray:
        s = self.catalog
        return -s.alpha * s.omega * (p * self._cos + self._sin)

    def dx0_dp(self, p: np.ndarray) -> np.ndarray:
        s = self.catalog
        return np.broadcast_to(-s.alpha * s.omega * self._cos, np.shape(p)).copy()

    def dx0_dpp(self, p: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(p))

    def dx0x0(self, p: np.ndarray) -> np.ndarray:
        s = self.catalog
        return s.alpha * s.omega**2 * (self._cos - p * self._sin)

    def dx0x0_dp(self, p: np.ndarray) -> np.ndarray:
        s = self.catalog
        return np.broadcast_to(-s.alpha * s.omega**2 * self._sin, np.shape(p)).copy()

    def dx0_flat(self, p: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """d/dx0 of dH/dm(rho); the measure coupling carries no x0 dependence."""
        return np.zeros(np.shape(p))

    def dx0_flat_dp(self, rho: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(self.points))
