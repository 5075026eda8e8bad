"""
Dual Norm Module

Surrogate for the dual norm of a signed measure against the unit ball of C^k
test functions. The supremum is searched over a finite family of
trigonometric candidates, so every estimate is a certified lower bound of the
true norm; the family is recorded with the estimate.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from mfg_master.errors import UnsupportedOrderError
from mfg_master.measures.grid import GridSignedMeasure
from mfg_master.measures.transport import lipschitz_dual_norm

SUPPORTED_ORDERS = (1, 2, 3)

MAX_FREQUENCY = 16

# Fine sampling used to bound sup norms of candidates from above.
_SUP_SAMPLES = 512


@dataclass(frozen=True)
class DualNormEstimate:
    """
    Lower-bound estimate of a dual norm.

    Attributes:
        value (float): Best normalized pairing found.
        k (int): Order of the test-function norm.
        candidate_count (int): Number of random candidates searched.
        seminorm (bool): Whether the order-0 term was left out of the normalization.
    """

    value: float
    k: int
    candidate_count: int
    seminorm: bool = False


def _trig_family(candidate_count: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Cosine/sine coefficient pairs (index = frequency) of the candidate family."""
    family: List[Tuple[np.ndarray, np.ndarray]] = []
    size = MAX_FREQUENCY + 1
    for freq in range(size):
        cos_coef = np.zeros(size)
        cos_coef[freq] = 1.0
        family.append((cos_coef, np.zeros(size)))
        if freq > 0:
            sin_coef = np.zeros(size)
            sin_coef[freq] = 1.0
            family.append((np.zeros(size), sin_coef))
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((candidate_count, 2, size))
    decay = 1.0 / (1.0 + np.arange(size)) ** 2
    for row in draws:
        family.append((row[0] * decay, row[1] * np.where(np.arange(size) > 0, decay, 0.0)))
    return family


def _sampling_tables(omega: float, length: float) -> Tuple[np.ndarray, np.ndarray]:
    samples = np.arange(_SUP_SAMPLES) * (length / _SUP_SAMPLES)
    phase = omega * np.outer(np.arange(MAX_FREQUENCY + 1), samples)
    return np.cos(phase), np.sin(phase)


def _derivative_sups(
    cos_coef: np.ndarray,
    sin_coef: np.ndarray,
    omega: float,
    k: int,
    tables: Tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """Upper bounds of sup|D^r phi| for r = 0..k via fine sampling."""
    cos_table, sin_table = tables
    freqs = np.arange(cos_coef.size)
    degree = int(np.max(np.nonzero(np.abs(cos_coef) + np.abs(sin_coef))[0], initial=0))
    inflation = 1.0 / math.cos(math.pi * degree / _SUP_SAMPLES)
    sups = np.empty(k + 1)
    a, b = cos_coef.copy(), sin_coef.copy()
    for r in range(k + 1):
        values = a @ cos_table + b @ sin_table
        sups[r] = inflation * float(np.max(np.abs(values)))
        # d/dx (a cos + b sin)(w f x) = w f (b cos - a sin)
        a, b = omega * freqs * b, -omega * freqs * a
    return sups


def _lipschitz_extremal(rho: GridSignedMeasure) -> np.ndarray:
    """Node values of a discrete 1-Lipschitz function attaining the k=1 seminorm."""
    cumulative = rho.grid.spacing * np.cumsum(rho.values)
    order = np.argsort(cumulative, kind="stable")
    slopes = np.zeros(cumulative.size)
    half = cumulative.size // 2
    slopes[order[:half]] = 1.0
    slopes[order[cumulative.size - half:]] = -1.0
    return rho.grid.spacing * np.concatenate(([0.0], np.cumsum(slopes)[:-1]))


def dual_norm_minus_k(
    rho: GridSignedMeasure,
    k: int,
    candidate_count: int = 64,
    seed: int = 0,
    seminorm: bool = False,
) -> DualNormEstimate:
    """
    Estimate the order-k dual norm of ``rho`` from below.

    Every candidate phi is a trigonometric polynomial of degree at most 16,
    rescaled so that sum over r of sup|D^r phi| equals 1 (r from 0, or from 1
    when ``seminorm`` is set). With ``seminorm`` and k = 1 the discrete
    Lipschitz extremal of rho joins the family.

    Args:
        rho (GridSignedMeasure): The measure.
        k (int): Order, one of 1, 2, 3.
        candidate_count (int, optional): Random candidates beyond the single modes. Defaults to 64.
        seed (int, optional): Seed of the candidate stream. Defaults to 0.
        seminorm (bool, optional): Drop the order-0 term (zero-mass rho only). Defaults to False.

    Returns:
        DualNormEstimate: The estimate.

    Raises:
        UnsupportedOrderError: If k is not 1, 2 or 3.
    """
    if k not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(f"dual norm order must be one of {SUPPORTED_ORDERS}, got {k}")
    grid = rho.grid
    omega = 2.0 * math.pi / grid.length
    freqs = np.arange(MAX_FREQUENCY + 1)
    phase = omega * np.outer(freqs, grid.nodes)
    cos_nodes, sin_nodes = np.cos(phase), np.sin(phase)
    weighted = grid.spacing * rho.values
    cos_pair, sin_pair = cos_nodes @ weighted, sin_nodes @ weighted

    start = 1 if seminorm else 0
    tables = _sampling_tables(omega, grid.length)
    best = 0.0
    for cos_coef, sin_coef in _trig_family(candidate_count, seed):
        norm = float(np.sum(_derivative_sups(cos_coef, sin_coef, omega, k, tables)[start:]))
        if norm <= 0.0:
            continue
        pairing = abs(float(cos_coef @ cos_pair + sin_coef @ sin_pair))
        best = max(best, pairing / norm)

    if seminorm and k == 1:
        best = max(best, abs(float(np.dot(_lipschitz_extremal(rho), weighted))))
    return DualNormEstimate(value=best, k=k, candidate_count=candidate_count, seminorm=seminorm)


__all__ = ["DualNormEstimate", "dual_norm_minus_k", "lipschitz_dual_norm", "SUPPORTED_ORDERS"]
