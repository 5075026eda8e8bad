"""
Major-minor master system: x0 HJ system, splitting scheme, measure derivatives and audits.
"""

from mfg_master.major.audits import joint_norm_growth, major_agreement, major_lipschitz_audit, pair_distance
from mfg_master.major.derivatives import MajorDerivative, deriv2_major_dm, deriv_major_dm, solve_major_system
from mfg_master.major.hj_system import MajorHJSolution, solve_hj_system_x0, terminal_pair
from mfg_master.major.scheme import MajorPair, MajorScheme, build_major_scheme, joint_norm

__all__ = [
    "MajorHJSolution",
    "solve_hj_system_x0",
    "terminal_pair",
    "MajorPair",
    "MajorScheme",
    "build_major_scheme",
    "joint_norm",
    "MajorDerivative",
    "solve_major_system",
    "deriv_major_dm",
    "deriv2_major_dm",
    "major_agreement",
    "joint_norm_growth",
    "major_lipschitz_audit",
    "pair_distance",
]
