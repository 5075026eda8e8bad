"""
Splitting scheme of the second-order master equation and its studies.
"""

from mfg_master.splitting.cache import FunctionalCache, fingerprint, quantize
from mfg_master.splitting.schedule import FIRST_ORDER, HJ_SYSTEM, LINEAR, SPLIT_FACTOR, SplitSchedule
from mfg_master.splitting.scheme import CheckpointFunctional, SplittingScheme, build_scheme, eval_un
from mfg_master.splitting.studies import cauchy_rows, convergence_study, stochastic_consistency

__all__ = [
    "FIRST_ORDER",
    "LINEAR",
    "HJ_SYSTEM",
    "SPLIT_FACTOR",
    "SplitSchedule",
    "FunctionalCache",
    "quantize",
    "fingerprint",
    "CheckpointFunctional",
    "SplittingScheme",
    "build_scheme",
    "eval_un",
    "cauchy_rows",
    "convergence_study",
    "stochastic_consistency",
]
