"""
Periodic Transport Module

Exact Wasserstein distances between grid densities on the one-dimensional
torus. Each node carries the point mass spacing * value, so both distances are
the optimal-transport costs between these discrete measures under the
periodic ground distance.
"""

import math
from typing import Tuple

import numpy as np

from mfg_master.measures.grid import GridDensity, GridSignedMeasure, TorusGrid
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)

# Below this many offset candidates the W2 offset search is exhaustive.
EXHAUSTIVE_OFFSETS = 4096

# Circular offsets (in units of mass) searched for W2.
OFFSET_WINDOW = 2.0


def _cumulative_difference(values: np.ndarray, spacing: float) -> np.ndarray:
    return spacing * np.cumsum(values)


def lipschitz_dual_norm(rho: GridSignedMeasure) -> float:
    """
    Exact supremum of rho(phi) over 1-Lipschitz phi, for zero-mass rho.

    Equals min over c of the L1 norm of (R - c), R the cumulative mass; the
    minimizing offset is a median of R.

    Raises:
        ValueError: If rho carries mass (the supremum is then infinite).
    """
    scale = rho.grid.spacing * float(np.sum(np.abs(rho.values)))
    if abs(rho.total_mass) > 1e-10 * max(scale, 1.0):
        raise ValueError(
            f"Lipschitz dual norm needs a zero-mass measure, got mass {rho.total_mass:.3e}"
        )
    cumulative = _cumulative_difference(rho.values, rho.grid.spacing)
    offset = float(np.median(cumulative))
    return float(rho.grid.spacing * np.sum(np.abs(cumulative - offset)))


def wasserstein1(m1: GridDensity, m2: GridDensity) -> float:
    """
    Periodic W1 distance.

    Args:
        m1 (GridDensity): First density.
        m2 (GridDensity): Second density, on the same grid.

    Returns:
        float: The distance.

    Raises:
        IncompatibleGridError: If the grids differ.
    """
    m1.grid.require_same(m2.grid, "densities")
    cumulative = _cumulative_difference(m1.values - m2.values, m1.grid.spacing)
    offset = float(np.median(cumulative))
    return float(m1.grid.spacing * np.sum(np.abs(cumulative - offset)))


def kantorovich_rows(differences: np.ndarray, spacing: float) -> np.ndarray:
    """
    Row-wise min_c h sum |R - c| for zero-mass rows of values.

    For a difference of two densities this is their W1 distance; for a
    zero-mass signed measure it is its Lipschitz dual norm.
    """
    cumulative = spacing * np.cumsum(np.atleast_2d(differences), axis=-1)
    offsets = np.median(cumulative, axis=-1, keepdims=True)
    return spacing * np.sum(np.abs(cumulative - offsets), axis=-1)


def _atoms(m: GridDensity) -> Tuple[np.ndarray, np.ndarray]:
    """Positions and cumulative mass breakpoints of the nonzero atoms."""
    weights = m.grid.spacing * m.values
    keep = weights > 0.0
    positions = m.grid.nodes[keep]
    breaks = np.concatenate(([0.0], np.cumsum(weights[keep])))
    breaks[-1] = 1.0
    return positions, breaks


class _OffsetCost:
    """Quadratic cost between the quantile of one measure and the offset quantile of the other."""

    def __init__(self, m1: GridDensity, m2: GridDensity):
        length = m1.grid.length
        self.positions1, self.breaks1 = _atoms(m1)
        positions2, breaks2 = _atoms(m2)
        lifts = range(-3, 4)
        self.positions2 = np.concatenate([positions2 + c * length for c in lifts])
        self.breaks2 = np.concatenate([breaks2[:-1] + c for c in lifts])

    def candidates(self) -> np.ndarray:
        """Offsets at which the piecewise-linear cost can have a kink."""
        inner1 = self.breaks1[:-1]
        inner2 = self.breaks2[(self.breaks2 >= -OFFSET_WINDOW) & (self.breaks2 <= OFFSET_WINDOW + 1.0)]
        kinks = (inner2[None, :] - inner1[:, None]).ravel()
        return np.unique(kinks[np.abs(kinks) <= OFFSET_WINDOW])

    def __call__(self, offset: float) -> float:
        shifted = self.breaks2 - offset
        inside = shifted[(shifted > 0.0) & (shifted < 1.0)]
        points = np.unique(np.concatenate((self.breaks1, inside)))
        lengths = np.diff(points)
        mids = 0.5 * (points[:-1] + points[1:])
        q1 = self.positions1[np.searchsorted(self.breaks1, mids, side="right") - 1]
        q2 = self.positions2[np.searchsorted(self.breaks2, mids + offset, side="right") - 1]
        return float(np.dot(lengths, (q1 - q2) ** 2))


def _minimize_convex(cost: _OffsetCost, candidates: np.ndarray) -> float:
    """Minimum of a convex function sampled on sorted candidates."""
    if candidates.size <= EXHAUSTIVE_OFFSETS:
        return min(cost(float(c)) for c in candidates)
    lo, hi = 0, candidates.size - 1
    while hi - lo > 6:
        third = (hi - lo) // 3
        left, right = lo + third, hi - third
        if cost(float(candidates[left])) <= cost(float(candidates[right])):
            hi = right
        else:
            lo = left
    return min(cost(float(candidates[i])) for i in range(lo, hi + 1))


def wasserstein2(m1: GridDensity, m2: GridDensity) -> float:
    """
    Periodic W2 distance via quantile functions and the optimal circular offset.

    The cost is convex and piecewise linear in the offset, so its minimum is
    attained at one of the kink offsets.

    Args:
        m1 (GridDensity): First density.
        m2 (GridDensity): Second density, on the same grid.

    Returns:
        float: The distance.

    Raises:
        IncompatibleGridError: If the grids differ.
    """
    m1.grid.require_same(m2.grid, "densities")
    if np.array_equal(m1.values, m2.values):
        return 0.0
    cost = _OffsetCost(m1, m2)
    best = _minimize_convex(cost, cost.candidates())
    return math.sqrt(max(best, 0.0))


def periodic_distance(grid: TorusGrid, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Geodesic distance on the torus."""
    gap = np.abs(np.asarray(x) - np.asarray(y)) % grid.length
    return np.minimum(gap, grid.length - gap)
