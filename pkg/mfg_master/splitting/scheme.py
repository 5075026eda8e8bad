"""
Splitting Scheme Module

This module provides the semi-discrete splitting scheme U^N of the
second-order master equation. Going backward from U^N(T) = G, each interval
(t_k, t_{k+1}) applies one sub-dynamics with doubled coefficients:

- first-order intervals solve the MFG system on (t_k, t_{k+1}) with 2a and
  2H, whose terminal cost is the functional U^N(t_{k+1}); that functional is
  only evaluated at terminal densities of converged inner solves;
- linear intervals convolve U^N(t_{k+1}) with the heat kernel of 2a0.

Evaluation is lazy and recursive: U^N(t_k, ., m) is computed only when
asked for, and every result is memoized by (k, x0, density fingerprint).
The shifted evaluations of a linear interval run on the configured thread
pool; each key is computed once and the counters are shared under a lock.
"""

import threading
from typing import Dict, Optional

import numpy as np

from mfg_master.errors import BudgetExceededError
from mfg_master.master.linear_second import DEFAULT_KERNEL_CUTOFF, convolve_functional, heat_kernel
from mfg_master.measures.grid import GridDensity
from mfg_master.mfg.functionals import MeasureFunctional
from mfg_master.mfg.scenario import Scenario
from mfg_master.mfg.system import solve_mfg_nested
from mfg_master.splitting.cache import FunctionalCache, quantize
from mfg_master.splitting.schedule import FIRST_ORDER, SPLIT_FACTOR, SplitSchedule
from mfg_master.types import SchemeCounters
from mfg_master.utils.config import get_config_value
from mfg_master.utils.logger import get_logger

logger = get_logger(__name__)


class CheckpointFunctional(MeasureFunctional):
    """U^N(t_k, ., .) as a measure functional."""

    def __init__(self, scheme: "SplittingScheme", k: int):
        self.scheme = scheme
        self.k = k
        self.grid = scheme.scenario.grid
        self.name = f"U^{scheme.schedule.n} at checkpoint {k}"

    def evaluate(self, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        return self.scheme.evaluate(self.k, m, x0)


class SplittingScheme:
    """
    Lazy evaluator of U^N at the checkpoints of a :class:`SplitSchedule`.

    Args:
        scenario (Scenario): Model data.
        n (int): Number of interval pairs N.
        budget (Optional[int]): Maximum MFG solves (defaults to the configured evaluation budget).
        cache (Optional[FunctionalCache]): Memo cache (a fresh bounded one by default).
        kernel_cutoff (Optional[float]): Relative kernel weight below which offsets are skipped.
    """

    def __init__(
        self,
        scenario: Scenario,
        n: int,
        budget: Optional[int] = None,
        cache: Optional[FunctionalCache] = None,
        kernel_cutoff: Optional[float] = DEFAULT_KERNEL_CUTOFF,
    ):
        self.scenario = scenario
        self.schedule = SplitSchedule(scenario.horizon, n)
        self.first_order_scenario = scenario.scaled(SPLIT_FACTOR)
        self.linear_a0 = SPLIT_FACTOR * scenario.common_noise
        self.budget = int(budget if budget is not None else get_config_value("evaluation_budget", 200000))
        self.cache = cache if cache is not None else FunctionalCache(int(get_config_value("cache_limit", 20000)))
        self.kernel_cutoff = kernel_cutoff
        self.evaluations = 0
        self.mfg_solves = 0
        self._functionals: Dict[int, CheckpointFunctional] = {}
        self._counter_lock = threading.Lock()

    def functional(self, k: int) -> CheckpointFunctional:
        if k not in self._functionals:
            self._functionals[k] = CheckpointFunctional(self, k)
        return self._functionals[k]

    def evaluate(self, k: int, m: GridDensity, x0: float = 0.0) -> np.ndarray:
        """
        U^N(t_k, x0, ., m) over the x grid.

        Raises:
            BudgetExceededError: If the run needs more MFG solves than the budget.
            ConvergenceError: If a first-order sub-step does not converge.
        """
        with self._counter_lock:
            self.evaluations += 1
        if k == self.schedule.last:
            return self.scenario.terminal.evaluate(m, x0)
        values = quantize(m.values)
        density = GridDensity(m.grid, values)
        if self.schedule.kind(k) == FIRST_ORDER:
            step = self._first_order
        else:
            step = self._linear
        key = FunctionalCache.key(k, x0, values)
        return self.cache.get_or_compute(key, lambda: step(k, density, x0))

    def _first_order(self, k: int, m: GridDensity, x0: float) -> np.ndarray:
        self._charge_solve()
        t0, t1 = self.schedule.interval(k)
        solution = solve_mfg_nested(
            self.first_order_scenario, t0, m, x0, self.functional(k + 1), t1=t1
        )
        return np.array(solution.u.initial)

    def _charge_solve(self) -> None:
        with self._counter_lock:
            if self.mfg_solves >= self.budget:
                logger.warning(
                    f"Evaluation budget of {self.budget} MFG solves exhausted "
                    f"at N={self.schedule.n}"
                )
                raise BudgetExceededError(self.budget)
            self.mfg_solves += 1

    def _linear(self, k: int, m: GridDensity, x0: float) -> np.ndarray:
        t0, t1 = self.schedule.interval(k)
        kernel = heat_kernel(m.grid, t1 - t0, self.linear_a0)
        following = self.functional(k + 1)
        return convolve_functional(
            lambda mu: following.evaluate(mu, x0), kernel, m, self.kernel_cutoff
        )

    def counters(self) -> SchemeCounters:
        return {
            "evaluations": self.evaluations,
            "mfg_solves": self.mfg_solves,
            "cache_hits": self.cache.hits,
            "cache_misses": self.cache.misses,
            "cache_size": len(self.cache),
        }


def build_scheme(scenario: Scenario, n: int, budget: Optional[int] = None) -> SplittingScheme:
    """Build the lazy U^N evaluator for N interval pairs."""
    return SplittingScheme(scenario, n, budget)


def eval_un(scheme: SplittingScheme, k: int, m: GridDensity, x0: float = 0.0) -> np.ndarray:
    """U^N(t_k, x0, ., m) at checkpoint index k."""
    return scheme.evaluate(k, m, x0)
