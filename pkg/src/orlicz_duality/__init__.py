"""Convex duality for expected utility maximization.

Orlicz-space tools, grid convex analysis, finite-market primal and dual
solvers, and two explicit examples: a Lévy market with a corner solution
and a countable market with a utility gap.
"""

from . import acceptance, convex, gap, levy, market, orlicz, utility
from .convex import GridFunction, biconjugate, closed_hull, grid_conjugate, inf_convolution
from .errors import *  # noqa: F401,F403
from .gap import GapMarket, completions, exponential_moment, gap_certificate, gap_mechanics
from .levy import LevyModel, corner_analysis, cumulant, deflator_nonexistence, dual_sequence
from .market import (
    FiniteMarket,
    Generator,
    check_no_arbitrage,
    classify_corner,
    complete_market_value,
    indirect_utility_profile,
    solve_dual,
    solve_primal,
)
from .orlicz import FiniteRandomVariable, SeriesRandomVariable, delta2_check, gauge_norm, modular
from .utility import UtilitySpec, classify_case, conjugate, exponential, log_utility, normalize

__version__ = "0.1.0"
