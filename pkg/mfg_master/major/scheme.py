"""
Major Splitting Scheme Module

This module provides the splitting scheme of the major-minor master system.
The pair (U0, U) over the x0 grid is built backward from (G0, G):

- on (t_{2j}, t_{2j+1}) the x0 HJ system runs with m frozen;
- on (t_{2j+1}, t_{2j+2}) every x0 node is frozen and the MFG system in x
  runs with terminal U(t_{2j+2}, x0, ., .), then U0 is read off the
  following checkpoint at the terminal density of that MFG solution.

Both sub-dynamics use doubled coefficients and unit diffusions.
"""

import threading
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from mfg_master.errors import BudgetExceededError
from mfg_master.major.hj_system import solve_hj_system_x0, terminal_pair
from mfg_master.measures.grid import GridDensity
from mfg_master.mfg.functionals import MeasureFunctional
from mfg_master.mfg.scenario import Scenario
from mfg_master.mfg.system import solve_mfg, solve_mfg_nested
from mfg_master.splitting.cache import FunctionalCache, quantize
from mfg_master.splitting.schedule import FIRST_ORDER, HJ_SYSTEM, SPLIT_FACTOR, SplitSchedule
from mfg_master.types import SchemeCounters
from mfg_master.utils.config import get_config_value
from mfg_master.utils.logger import get_logger
from mfg_master.utils.parallel import ordered_map

logger = get_logger(__name__)


@dataclass(frozen=True)
class MajorPair:
    """
    (U0, U) over the x0 grid at one checkpoint and one density.

    Attributes:
        u0 (np.ndarray): U0(x0_j), shape (x0 cells,).
        u (np.ndarray): U(x0_j, x_i), shape (x0 cells, x cells).
    """

    u0: np.ndarray
    u: np.ndarray

    def packed(self) -> np.ndarray:
        return np.column_stack([self.u0, self.u])

    @classmethod
    def unpack(cls, packed: np.ndarray) -> "MajorPair":
        return cls(u0=np.array(packed[:, 0]), u=np.array(packed[:, 1:]))


def joint_norm(u0: np.ndarray, u: np.ndarray) -> float:
    """sup over x0 of (|U0|^2 + sup_x |U|^2)^(1/2)."""
    rows = np.max(np.abs(np.atleast_2d(u)), axis=-1)
    return float(np.max(np.sqrt(np.asarray(u0) ** 2 + rows**2)))


class MajorRowFunctional(MeasureFunctional):
    """U(t_k, x0_j, ., .) for one x0 node, used as an MFG terminal."""

    def __init__(self, scheme: "MajorScheme", k: int, index: int):
        self.scheme = scheme
        self.k = k
        self.index = index
        self.grid = scheme.scenario.grid
        self.name = f"major U at checkpoint {k}, x0 node {index}"

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return self.scheme.evaluate(self.k, m).u[self.index]


class MajorScheme:
    """
    Lazy evaluator of the major splitting pair at the checkpoints of a schedule.

    Args:
        scenario (Scenario): Model data; diffusions are replaced by unit ones.
        n (int): Number of interval pairs N.
        budget (Optional[int]): Maximum MFG solves (defaults to the configured evaluation budget).
        cache (Optional[FunctionalCache]): Memo cache keyed by (checkpoint, density fingerprint).
    """

    def __init__(
        self,
        scenario: Scenario,
        n: int,
        budget: Optional[int] = None,
        cache: Optional[FunctionalCache] = None,
    ):
        self.scenario = scenario.with_unit_diffusions()
        self.schedule = SplitSchedule(scenario.horizon, n, kinds=(HJ_SYSTEM, FIRST_ORDER))
        self.first_order_scenario = self.scenario.scaled(SPLIT_FACTOR)
        self.budget = int(budget if budget is not None else get_config_value("evaluation_budget", 200000))
        self.cache = cache if cache is not None else FunctionalCache(int(get_config_value("cache_limit", 20000)))
        self.evaluations = 0
        self.mfg_solves = 0
        self._rows: Dict[Tuple[int, int], MajorRowFunctional] = {}
        self._counter_lock = threading.Lock()

    def row(self, k: int, index: int) -> MajorRowFunctional:
        if (k, index) not in self._rows:
            self._rows[(k, index)] = MajorRowFunctional(self, k, index)
        return self._rows[(k, index)]

    def evaluate(self, k: int, m: GridDensity) -> MajorPair:
        """
        (U0, U)(t_k, ., ., m) over the x0 grid.

        Raises:
            BudgetExceededError: If the run needs more MFG solves than the budget.
            ConvergenceError: If a first-order sub-step does not converge.
        """
        with self._counter_lock:
            self.evaluations += 1
        if k == self.schedule.last:
            u0, u = terminal_pair(self.scenario, m)
            return MajorPair(u0=u0, u=u)
        values = quantize(m.values)
        density = GridDensity(m.grid, values)
        if self.schedule.kind(k) == HJ_SYSTEM:
            step = self._hj_system
        else:
            step = self._first_order
        key = FunctionalCache.key(k, 0.0, values)
        packed = self.cache.get_or_compute(key, lambda: step(k, density).packed())
        return MajorPair.unpack(packed)

    def _hj_system(self, k: int, m: GridDensity) -> MajorPair:
        t0, t1 = self.schedule.interval(k)
        following = self.evaluate(k + 1, m)
        solution = solve_hj_system_x0(self.scenario, m, following.u0, following.u, t0, t1, SPLIT_FACTOR)
        u0, u = solution.initial_pair()
        return MajorPair(u0=np.array(u0), u=np.array(u))

    def _first_order(self, k: int, m: GridDensity) -> MajorPair:
        t0, t1 = self.schedule.interval(k)
        solver = solve_mfg if k + 1 == self.schedule.last else solve_mfg_nested
        nodes = self.scenario.major_grid.nodes

        def solve_node(index: int) -> Tuple[np.ndarray, float]:
            self._charge_solve()
            x0 = float(nodes[index])
            solution = solver(
                self.first_order_scenario, t0, m, x0, self.row(k + 1, index), t1=t1
            )
            reached = solution.terminal_target
            if reached is None:
                reached = solution.terminal_density()
            return solution.u.initial, float(self.evaluate(k + 1, reached).u0[index])

        # one frozen x0 node per task
        rows = ordered_map(solve_node, range(nodes.size))
        u = np.stack([np.asarray(row) for row, _ in rows])
        u0 = np.array([value for _, value in rows])
        return MajorPair(u0=u0, u=u)

    def _charge_solve(self) -> None:
        with self._counter_lock:
            if self.mfg_solves >= self.budget:
                logger.warning(
                    f"Evaluation budget of {self.budget} MFG solves exhausted "
                    f"at N={self.schedule.n}"
                )
                raise BudgetExceededError(self.budget)
            self.mfg_solves += 1

    def counters(self) -> SchemeCounters:
        return {
            "evaluations": self.evaluations,
            "mfg_solves": self.mfg_solves,
            "cache_hits": self.cache.hits,
            "cache_misses": self.cache.misses,
            "cache_size": len(self.cache),
        }


def build_major_scheme(scenario: Scenario, n: int, budget: Optional[int] = None) -> MajorScheme:
    """Build the lazy major splitting evaluator for N interval pairs."""
    return MajorScheme(scenario, n, budget)
