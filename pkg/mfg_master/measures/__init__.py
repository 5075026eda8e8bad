"""
Measures and norms on the one-dimensional torus.

Grid geometry, densities and signed measures, exact periodic Wasserstein
distances, dual-norm surrogates and translations.
"""

from mfg_master.measures.grid import (
    GridDensity,
    GridFunction,
    GridSignedMeasure,
    TorusGrid,
    dirac_direction,
    integrate_against,
    moment2,
    pushforward_translate,
    smooth_random_density,
    translate_signed,
    zero_mass_part,
)
from mfg_master.measures.norms import DualNormEstimate, dual_norm_minus_k
from mfg_master.measures.transport import (
    lipschitz_dual_norm,
    wasserstein1,
    wasserstein2,
)

__all__ = [
    "TorusGrid",
    "GridDensity",
    "GridSignedMeasure",
    "GridFunction",
    "DualNormEstimate",
    "wasserstein1",
    "wasserstein2",
    "lipschitz_dual_norm",
    "dual_norm_minus_k",
    "pushforward_translate",
    "translate_signed",
    "integrate_against",
    "moment2",
    "smooth_random_density",
    "zero_mass_part",
    "dirac_direction",
]
