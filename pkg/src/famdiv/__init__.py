"""Fair and Pareto-efficient division of divisible goods among families.

Families consume shared bundles while their members keep heterogeneous
preferences.  The package provides the economy model, fairness predicates
(fair share, no envy, egalitarian equivalence in individual and family
form), Pareto tests, leximin-style solvers, market-equilibrium routines,
and a scenario suite reproducing the classic positive and negative
constructions of the field.
"""

from famdiv.economy import (
    CES,
    Allocation,
    CobbDouglas,
    Economy,
    EconomyError,
    Family,
    Individual,
    Linear,
    ParseError,
    UtilityFunction,
    ValidationError,
    check_feasible,
    evaluate_utility,
    fair_share,
    mrs,
    normalized_utility,
    parse_allocation,
    parse_economy,
)

__all__ = [
    "CES",
    "Allocation",
    "CobbDouglas",
    "Economy",
    "EconomyError",
    "Family",
    "Individual",
    "Linear",
    "ParseError",
    "UtilityFunction",
    "ValidationError",
    "check_feasible",
    "evaluate_utility",
    "fair_share",
    "mrs",
    "normalized_utility",
    "parse_allocation",
    "parse_economy",
]
