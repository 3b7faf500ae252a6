"""L^p concentration of idempotent trigonometric polynomials."""

__version__ = "0.1.0"

from .constants import BoundReport, c_p_lower, c_p_star, delta_p, gamma2, giratio_bound, theorem1_lower
from .construct import (
    ConstructionRecipe,
    WeylRecipe,
    bezout_inverse,
    breakpoints,
    build_concentrated,
    build_G,
    build_simple,
    build_special,
    build_weyl,
    construct_general,
    rational_approx,
    theta_breakpoints,
)
from .errors import DomainError, DuplicateFrequency, NumericalFailure
from .kernel import FrequencySet, ProductSet, canonicalize, dirichlet_magnitude, eval_sum, sumset_product
from .quadrature import ConcentrationResult, IntervalUnion, concentration_ratio, norm_p_period, norm_p_set
from .search import SearchConfig, SearchReport, enumerate_chunk, is_special, ratio_for_table, run_search

__all__ = [name for name in dir() if not name.startswith("_")]
