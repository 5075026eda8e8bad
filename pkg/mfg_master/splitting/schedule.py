"""
Split Schedule Module

Checkpoints t_k = k T / (2N) of a splitting scheme and the kind of sub-dynamics
on each interval (t_k, t_{k+1}). Both sub-dynamics run with coefficients
doubled, so that on average each acts for half of the time.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple

import numpy as np

FIRST_ORDER = "first_order"
LINEAR = "linear"
HJ_SYSTEM = "hj_system"

# Coefficient factor applied to both sub-dynamics.
SPLIT_FACTOR = 2.0


@dataclass(frozen=True)
class SplitSchedule:
    """
    Alternating schedule on [0, horizon] with 2N intervals.

    Attributes:
        horizon (float): Final time T.
        n (int): Number of interval pairs N (at least 1).
        kinds (Tuple[str, str]): Kinds of (t_{2j}, t_{2j+1}) and (t_{2j+1}, t_{2j+2}).
    """

    horizon: float
    n: int
    kinds: Tuple[str, str] = (FIRST_ORDER, LINEAR)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"splitting needs an integer N >= 1, got {self.n}")
        if not self.horizon > 0.0:
            raise ValueError(f"splitting needs a positive horizon, got {self.horizon}")

    @property
    def last(self) -> int:
        """Index 2N of the terminal checkpoint."""
        return 2 * self.n

    @cached_property
    def checkpoints(self) -> np.ndarray:
        return np.arange(self.last + 1) * self.horizon / self.last

    def kind(self, k: int) -> str:
        """Kind of the interval (t_k, t_{k+1})."""
        if not 0 <= k < self.last:
            raise IndexError(f"interval index must lie in [0, {self.last}), got {k}")
        return self.kinds[k % 2]

    def interval(self, k: int) -> Tuple[float, float]:
        return float(self.checkpoints[k]), float(self.checkpoints[k + 1])

    def intervals(self) -> List[Tuple[float, float, str]]:
        return [(*self.interval(k), self.kind(k)) for k in range(self.last)]
