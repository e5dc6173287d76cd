"""Shared fixtures: the named example economies used across the suite."""

import numpy as np
import pytest

from famdiv.economy import CES, CobbDouglas, Economy, Family, Individual, Linear


def cd(*weights):
    return CobbDouglas(np.asarray(weights, dtype=float))


def singleton(fid, utility):
    return Family(id=fid, members=(Individual(id=fid, utility=utility),))


@pytest.fixture
def three_family_mixed_cd_economy():
    """Three units of each good; a couple with weights 1/3 and 2/3 plus two
    singles mirroring the spouses.  Individual-NE Pareto optima exist here but
    none is supportable from equal budgets."""
    couple = Family(
        id="f",
        members=(
            Individual(id="h", utility=cd(1 / 3, 2 / 3)),
            Individual(id="w", utility=cd(2 / 3, 1 / 3)),
        ),
    )
    return Economy(
        goods_count=2,
        endowment=np.array([3.0, 3.0]),
        families=(singleton("s", cd(1 / 3, 2 / 3)), singleton("s2", cd(2 / 3, 1 / 3)), couple),
    )


@pytest.fixture
def two_couple_equilibrium_economy():
    """Two couples over a unit endowment; the husbands' optima support an
    equal-budget market equilibrium that leaves both wives below fair share."""
    f1 = Family(
        id="f",
        members=(
            Individual(id="h", utility=cd(0.9, 0.1)),
            Individual(id="w", utility=cd(0.6, 0.4)),
        ),
    )
    f2 = Family(
        id="f2",
        members=(
            Individual(id="h2", utility=cd(0.1, 0.9)),
            Individual(id="w2", utility=cd(0.4, 0.6)),
        ),
    )
    return Economy(goods_count=2, endowment=np.array([1.0, 1.0]), families=(f1, f2))


@pytest.fixture
def envy_impossible_economy():
    """Couple whose spouses bracket two singles in the single-crossing order;
    no allocation is simultaneously individual-envy-free and efficient."""
    couple = Family(
        id="f",
        members=(
            Individual(id="h", utility=cd(0.2, 0.8)),
            Individual(id="w", utility=cd(0.8, 0.2)),
        ),
    )
    return Economy(
        goods_count=2,
        endowment=np.array([3.0, 3.0]),
        families=(couple, singleton("s", cd(0.6, 0.4)), singleton("s2", cd(0.4, 0.6))),
    )


@pytest.fixture
def ee_impossible_economy():
    """Two couples whose four members have strictly ordered MRS everywhere;
    no allocation is individual-egalitarian-equivalent and efficient."""
    f1 = Family(
        id="f",
        members=(
            Individual(id="w", utility=cd(0.2, 0.8)),
            Individual(id="h", utility=cd(0.4, 0.6)),
        ),
    )
    f2 = Family(
        id="f2",
        members=(
            Individual(id="h2", utility=cd(0.6, 0.4)),
            Individual(id="w2", utility=cd(0.8, 0.2)),
        ),
    )
    return Economy(goods_count=2, endowment=np.array([2.0, 2.0]), families=(f1, f2))


@pytest.fixture
def linear_husbands_economy():
    """Two couples with linear husbands plus a linear single over (3/2, 3/2);
    convex but not strictly convex, so fair share, family-EE and efficiency
    cannot all be met at once."""
    f1 = Family(
        id="f",
        members=(
            Individual(id="h", utility=Linear(np.array([1.0, 1.0]))),
            Individual(id="w", utility=cd(0.25, 0.75)),
        ),
    )
    f2 = Family(
        id="f2",
        members=(
            Individual(id="h2", utility=Linear(np.array([1.0, 1.0]))),
            Individual(id="w2", utility=cd(0.75, 0.25)),
        ),
    )
    return Economy(
        goods_count=2,
        endowment=np.array([1.5, 1.5]),
        families=(f1, f2, singleton("s", Linear(np.array([1.0, 1.0])))),
    )
