"""Dominance, MRS-range optimality test, and the grid oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from famdiv.economy import (
    Allocation,
    CobbDouglas,
    Economy,
    Family,
    Individual,
    Linear,
    ValidationError,
)
from famdiv.pareto import (
    GridBudgetError,
    MrsRange,
    ParetoStatus,
    dominates,
    grid_allocation_count,
    mrs_range,
    pareto_oracle_grid,
    pareto_test_mrs,
)
from famdiv.sampling import (
    equal_split_allocation,
    lattice_interior_allocation,
    mismatched_couples_economy,
    random_economy,
    random_interior_allocation,
    supported_optimum_allocation,
)


def two_singles(alpha1=1 / 3, alpha2=2 / 3, endowment=(3.0, 3.0)):
    return Economy(
        goods_count=2,
        endowment=np.asarray(endowment, dtype=float),
        families=(
            Family("a", (Individual("a", CobbDouglas(np.array([alpha1, 1 - alpha1]))),)),
            Family("b", (Individual("b", CobbDouglas(np.array([alpha2, 1 - alpha2]))),)),
        ),
    )


def envy_free_mixed_cd_allocation():
    ys = 3.0 / (3.0 + 2.0 ** (2.0 / 3.0))
    return Allocation({"s": [ys, 2 * ys], "s2": [2 * ys, ys], "f": [3 - 3 * ys, 3 - 3 * ys]})


class TestDominates:
    def test_no_allocation_dominates_itself(self):
        econ = two_singles()
        x = equal_split_allocation(econ)
        assert not dominates(econ, x, x)

    def test_monotone_improvement_dominates(self):
        econ = Economy(
            goods_count=2,
            endowment=np.array([2.0, 2.0]),
            families=(
                Family("a", (Individual("a", CobbDouglas(np.array([0.5, 0.5]))),)),
                Family("b", (Individual("b", CobbDouglas(np.array([0.5, 0.5]))),)),
            ),
        )
        better = Allocation({"a": [1.0, 1.0], "b": [1.0, 1.0]})
        worse = Allocation({"a": [0.5, 0.5], "b": [0.5, 0.5]})
        assert dominates(econ, better, worse)
        assert not dominates(econ, worse, better)

    def test_opposed_swap_improves_both_couples(self, ee_impossible_economy):
        # moving the z-loving couple toward z and the y-loving couple toward y
        # strictly helps all four members at once
        econ = ee_impossible_economy
        r = np.array([1.0, 1.0])
        delta = 0.05
        stacked = Allocation({"f": r, "f2": r})
        tilted = Allocation({"f": r + [-delta, delta], "f2": r + [delta, -delta]})
        assert dominates(econ, tilted, stacked)

    @given(seed=st.integers(0, 5000), s1=st.integers(0, 5000), s2=st.integers(0, 5000))
    @settings(max_examples=30, deadline=None)
    def test_irreflexive_and_asymmetric(self, seed, s1, s2):
        econ = random_economy(seed)
        x1 = random_interior_allocation(econ, s1)
        x2 = random_interior_allocation(econ, s2)
        assert not dominates(econ, x1, x1)
        if dominates(econ, x1, x2):
            assert not dominates(econ, x2, x1)


class TestMrsRange:
    def test_couple_range_at_symmetric_bundle(self, three_family_mixed_cd_economy):
        r = mrs_range(three_family_mixed_cd_economy, "f", [1.0381, 1.0381])
        assert r.low == pytest.approx(0.5)
        assert r.high == pytest.approx(2.0)

    def test_singleton_range_is_degenerate(self, three_family_mixed_cd_economy):
        r = mrs_range(three_family_mixed_cd_economy, "s", [0.7, 1.9])
        assert r.low == r.high

    def test_linear_family_has_constant_range(self):
        fam = Family(
            "f",
            (
                Individual("a", Linear(np.array([1.0, 1.0]))),
                Individual("b", Linear(np.array([2.0, 1.0]))),
            ),
        )
        econ = Economy(goods_count=2, endowment=np.array([1.0, 1.0]), families=(fam,))
        for bundle in ([0.3, 0.9], [2.0, 0.1]):
            r = mrs_range(econ, "f", bundle)
            assert (r.low, r.high) == (1.0, 2.0)

    def test_boundary_bundle_raises(self, three_family_mixed_cd_economy):
        with pytest.raises(ValidationError, match="boundary"):
            mrs_range(three_family_mixed_cd_economy, "f", [0.0, 1.0])

    def test_invalid_interval_rejected(self):
        with pytest.raises(ValidationError):
            MrsRange(low=2.0, high=1.0)


class TestMrsParetoTest:
    def test_envy_free_solution_is_optimal(self, three_family_mixed_cd_economy):
        verdict = pareto_test_mrs(three_family_mixed_cd_economy, envy_free_mixed_cd_allocation(), eps=1e-3)
        assert verdict.status == ParetoStatus.OPTIMAL

    def test_equal_split_of_two_singles_is_not_optimal(self):
        econ = two_singles()
        verdict = pareto_test_mrs(econ, equal_split_allocation(econ))
        assert verdict.status == ParetoStatus.NOT_OPTIMAL
        # MRS are 0.5 and 2.0 at the shared bundle, so the gap is 1.5
        assert verdict.mrs_gap == pytest.approx(1.5)

    def test_stacked_couples_are_not_optimal(self, ee_impossible_economy):
        econ = ee_impossible_economy
        verdict = pareto_test_mrs(econ, equal_split_allocation(econ))
        assert verdict.status == ParetoStatus.NOT_OPTIMAL

    def test_single_crossing_families_may_not_share_a_bundle(self):
        econ = two_singles(0.35, 0.65, endowment=(2.0, 2.0))
        verdict = pareto_test_mrs(econ, equal_split_allocation(econ))
        assert verdict.status == ParetoStatus.NOT_OPTIMAL

    def test_boundary_allocation_is_inapplicable(self):
        econ = two_singles()
        verdict = pareto_test_mrs(econ, Allocation({"a": [3.0, 0.0], "b": [0.0, 3.0]}))
        assert verdict.status == ParetoStatus.INAPPLICABLE
        assert "boundary" in verdict.reason

    def test_non_exhaustive_allocation_is_inapplicable(self):
        econ = two_singles()
        verdict = pareto_test_mrs(econ, Allocation({"a": [1.0, 1.0], "b": [1.0, 1.0]}))
        assert verdict.status == ParetoStatus.INAPPLICABLE
        assert "exhaust" in verdict.reason

    def test_verdict_serializes(self):
        econ = two_singles()
        doc = pareto_test_mrs(econ, equal_split_allocation(econ)).to_dict()
        assert doc["status"] == "not_optimal"
        assert doc["mrs_gap"] == pytest.approx(1.5)


class TestGridOracle:
    def test_single_family_consuming_everything_is_undominated(self):
        econ = Economy(
            goods_count=2,
            endowment=np.array([2.0, 3.0]),
            families=(Family("a", (Individual("a", CobbDouglas(np.array([0.5, 0.5]))),)),),
        )
        assert pareto_oracle_grid(econ, Allocation({"a": [2.0, 3.0]}), grid_n=16) is None

    def test_equal_split_of_two_singles_is_dominated_at_coarse_grid(self):
        econ = two_singles()
        x = equal_split_allocation(econ)
        dominator = pareto_oracle_grid(econ, x, grid_n=8)
        assert dominator is not None
        assert dominates(econ, dominator, x)

    def test_first_dominator_is_deterministic(self):
        econ = two_singles()
        x = equal_split_allocation(econ)
        first = pareto_oracle_grid(econ, x, grid_n=16)
        second = pareto_oracle_grid(econ, x, grid_n=16)
        np.testing.assert_array_equal(first.matrix(econ), second.matrix(econ))

    def test_budget_is_enforced(self):
        econ = two_singles()
        assert grid_allocation_count(econ, 100) == 101 ** 2
        with pytest.raises(GridBudgetError, match="budget"):
            pareto_oracle_grid(econ, equal_split_allocation(econ), grid_n=100, budget=100)

    @given(seed=st.integers(0, 5000), aseed=st.integers(0, 5000))
    @settings(max_examples=15, deadline=None)
    def test_supported_optima_have_no_dominator(self, seed, aseed):
        econ = random_economy(seed, n_families=2)
        x = supported_optimum_allocation(econ, aseed)
        if x is None:
            return
        assert pareto_test_mrs(econ, x, eps=1e-9).status == ParetoStatus.OPTIMAL
        assert pareto_oracle_grid(econ, x, grid_n=64, eps=1e-9) is None

    @given(seed=st.integers(0, 5000), aseed=st.integers(0, 5000))
    @settings(max_examples=15, deadline=None)
    def test_wide_gaps_over_balanced_holdings_are_caught(self, seed, aseed):
        econ = mismatched_couples_economy(seed)
        x = lattice_interior_allocation(econ, aseed)
        verdict = pareto_test_mrs(econ, x, eps=1e-9)
        if verdict.status == ParetoStatus.NOT_OPTIMAL and verdict.mrs_gap > 0.05:
            assert pareto_oracle_grid(econ, x, grid_n=64, eps=1e-9) is not None
