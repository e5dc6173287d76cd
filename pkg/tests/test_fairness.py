"""Family preference relation, fairness predicates, EE reference search."""

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
    ValidationError,
    fair_share,
)
from famdiv.fairness import (
    FairnessCriterion,
    FairnessReport,
    FamilyRelation,
    Witness,
    check_fairness,
    check_family_ee,
    check_individual_ee,
    compare_family,
    democratic_ne_fraction,
    find_ee_reference,
)
from famdiv.sampling import equal_split_allocation, random_economy, random_interior_allocation


def ceei_fs_equilibrium_allocation():
    return Allocation({"f": [0.9, 0.1], "f2": [0.1, 0.9]})


def envy_free_mixed_cd_allocation():
    ys = 3.0 / (3.0 + 2.0 ** (2.0 / 3.0))
    return Allocation({"s": [ys, 2 * ys], "s2": [2 * ys, ys], "f": [3 - 3 * ys, 3 - 3 * ys]})


def linear_husbands_candidate_allocation():
    return Allocation({"f": [0.25, 0.75], "f2": [0.75, 0.25], "s": [0.5, 0.5]})


class TestCompareFamily:
    def test_reflexive_indifference(self, three_family_mixed_cd_economy):
        econ = three_family_mixed_cd_economy
        b = np.array([1.3, 0.4])
        assert compare_family(econ, "f", b, b) == FamilyRelation.INDIFFERENT

    def test_opposed_members_are_incomparable(self, three_family_mixed_cd_economy):
        # u_{1/3}(2, .5) = 2^{-1/3} < 1 while u_{2/3}(2, .5) = 2^{1/3} > 1
        econ = three_family_mixed_cd_economy
        assert compare_family(econ, "f", [2.0, 0.5], [1.0, 1.0]) == FamilyRelation.INCOMPARABLE

    def test_singleton_monotone_preference(self):
        econ = Economy(
            goods_count=2,
            endowment=np.array([4.0, 4.0]),
            families=(Family("a", (Individual("a", CobbDouglas(np.array([0.5, 0.5]))),)),),
        )
        assert compare_family(econ, "a", [2.0, 2.0], [1.0, 1.0]) == FamilyRelation.STRICTLY_PREFERS_FIRST
        assert compare_family(econ, "a", [1.0, 1.0], [2.0, 2.0]) == FamilyRelation.STRICTLY_PREFERS_SECOND

    def test_unknown_family_raises(self, three_family_mixed_cd_economy):
        with pytest.raises(ValidationError, match="unknown family"):
            compare_family(three_family_mixed_cd_economy, "zzz", [1, 1], [1, 1])

    @given(seed=st.integers(0, 10_000), s1=st.integers(0, 10_000), s2=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_swapping_arguments_mirrors_the_relation(self, seed, s1, s2):
        econ = random_economy(seed)
        b1 = random_interior_allocation(econ, s1)[econ.family_ids[0]]
        b2 = random_interior_allocation(econ, s2)[econ.family_ids[0]]
        fid = econ.family_ids[0]
        forward = compare_family(econ, fid, b1, b2)
        backward = compare_family(econ, fid, b2, b1)
        mirrored = {
            FamilyRelation.STRICTLY_PREFERS_FIRST: FamilyRelation.STRICTLY_PREFERS_SECOND,
            FamilyRelation.STRICTLY_PREFERS_SECOND: FamilyRelation.STRICTLY_PREFERS_FIRST,
            FamilyRelation.INDIFFERENT: FamilyRelation.INDIFFERENT,
            FamilyRelation.INCOMPARABLE: FamilyRelation.INCOMPARABLE,
        }
        assert backward == mirrored[forward]


class TestCheckFairness:
    @pytest.mark.parametrize(
        "criterion",
        [
            FairnessCriterion.INDIVIDUAL_NE,
            FairnessCriterion.FAMILY_NE,
            FairnessCriterion.INDIVIDUAL_FS,
            FairnessCriterion.FAMILY_FS,
        ],
    )
    def test_equal_allocation_satisfies_everything(self, three_family_mixed_cd_economy, criterion):
        econ = three_family_mixed_cd_economy
        report = check_fairness(econ, equal_split_allocation(econ), criterion)
        assert report.holds and not report.witnesses

    def test_envy_free_solution_passes_individual_ne(self, three_family_mixed_cd_economy):
        report = check_fairness(
            three_family_mixed_cd_economy,
            envy_free_mixed_cd_allocation(),
            FairnessCriterion.INDIVIDUAL_NE,
        )
        assert report.holds

    def test_equilibrium_allocation_fails_fs_with_both_wives(self, two_couple_equilibrium_economy):
        report = check_fairness(
            two_couple_equilibrium_economy,
            ceei_fs_equilibrium_allocation(),
            FairnessCriterion.INDIVIDUAL_FS,
        )
        assert not report.holds
        assert sorted(w.who for w in report.witnesses) == ["w", "w2"]
        # wives sit at 0.9^0.6 * 0.1^0.4 = 0.37372 while the fair share is worth 0.5
        for w in report.witnesses:
            assert w.gap == pytest.approx(0.5 - 0.3737192818846552, abs=1e-12)

    def test_witnesses_sorted_by_gap(self, two_couple_equilibrium_economy):
        report = check_fairness(
            two_couple_equilibrium_economy,
            Allocation({"f": [1.0, 1.0], "f2": [0.0, 0.0]}),
            FairnessCriterion.INDIVIDUAL_NE,
        )
        gaps = [w.gap for w in report.witnesses]
        assert gaps == sorted(gaps, reverse=True)

    def test_infeasible_allocation_raises(self, two_couple_equilibrium_economy):
        with pytest.raises(ValidationError, match="infeasible"):
            check_fairness(
                two_couple_equilibrium_economy,
                Allocation({"f": [1.0, 1.0], "f2": [1.0, 1.0]}),
                FairnessCriterion.INDIVIDUAL_NE,
            )

    def test_ee_without_reference_raises(self, two_couple_equilibrium_economy):
        with pytest.raises(ValidationError, match="reference"):
            check_fairness(
                two_couple_equilibrium_economy,
                equal_split_allocation(two_couple_equilibrium_economy),
                FairnessCriterion.FAMILY_EE,
            )

    def test_report_serializes(self, two_couple_equilibrium_economy):
        report = check_fairness(
            two_couple_equilibrium_economy,
            ceei_fs_equilibrium_allocation(),
            FairnessCriterion.INDIVIDUAL_FS,
        )
        doc = report.to_dict()
        assert doc["criterion"] == "individual-fs"
        assert doc["holds"] is False
        assert {"who", "against", "gap"} <= set(doc["witnesses"][0])


class TestEgalitarianEquivalence:
    def test_equal_allocation_with_fair_share_reference(self, three_family_mixed_cd_economy):
        econ = three_family_mixed_cd_economy
        ok, _ = check_individual_ee(econ, equal_split_allocation(econ), fair_share(econ))
        assert ok
        ok, _ = check_family_ee(econ, equal_split_allocation(econ), fair_share(econ))
        assert ok

    def test_wives_break_individual_ee(self, linear_husbands_economy):
        # u_w(1/4, 3/4) = 0.56988 differs from u_w(1/2, 1/2) = 0.5
        ok, witnesses = check_individual_ee(
            linear_husbands_economy, linear_husbands_candidate_allocation(), [0.5, 0.5]
        )
        assert not ok
        assert {w.who for w in witnesses} == {"w", "w2"}
        assert witnesses[0].gap == pytest.approx(0.5698767642386944 - 0.5, abs=1e-12)

    def test_single_family_consuming_everything(self):
        econ = Economy(
            goods_count=2,
            endowment=np.array([2.0, 3.0]),
            families=(Family("a", (Individual("a", CobbDouglas(np.array([0.5, 0.5]))),)),),
        )
        ok, _ = check_individual_ee(econ, Allocation({"a": [2.0, 3.0]}), [2.0, 3.0])
        assert ok

    def test_family_ee_fails_off_ray_reference(self, linear_husbands_economy):
        # both wives strictly prefer their bundles to (0.3, 0.7) while the
        # linear husbands are exactly indifferent, so both couples rank and object
        ok, witnesses = check_family_ee(
            linear_husbands_economy, linear_husbands_candidate_allocation(), [0.3, 0.7]
        )
        assert not ok
        assert {w.who for w in witnesses} == {"f", "f2"}

    def test_opposed_members_make_the_family_pass(self, two_couple_equilibrium_economy):
        econ = two_couple_equilibrium_economy
        x = ceei_fs_equilibrium_allocation()
        # the husband strictly prefers his bundle to the fair share and the
        # wife strictly prefers the fair share, so the family cannot rank
        assert compare_family(econ, "f", x["f"], fair_share(econ)) == FamilyRelation.INCOMPARABLE
        ok, _ = check_family_ee(econ, x, fair_share(econ))
        assert ok


class TestFindEeReference:
    def test_equal_allocation_hits_the_fair_share(self, three_family_mixed_cd_economy):
        econ = three_family_mixed_cd_economy
        for mode in ("individual", "family"):
            ref = find_ee_reference(econ, equal_split_allocation(econ), mode=mode, grid_n=120, eps=1e-9)
            assert ref is not None
            np.testing.assert_allclose(ref, fair_share(econ), atol=1e-6)

    def test_linear_husbands_allocation_has_no_family_reference(self, linear_husbands_economy):
        ref = find_ee_reference(
            linear_husbands_economy,
            linear_husbands_candidate_allocation(),
            mode="family",
            grid_n=200,
            eps=1e-6,
        )
        assert ref is None

    def test_unknown_mode_raises(self, linear_husbands_economy):
        with pytest.raises(ValidationError, match="mode"):
            find_ee_reference(
                linear_husbands_economy,
                equal_split_allocation(linear_husbands_economy),
                mode="nope",
            )


class TestDemocraticFraction:
    def test_equal_allocation_is_fully_content(self, three_family_mixed_cd_economy):
        econ = three_family_mixed_cd_economy
        assert democratic_ne_fraction(econ, equal_split_allocation(econ)) == 1.0

    def test_equilibrium_allocation_leaves_nobody_envious(self, two_couple_equilibrium_economy):
        # Direct evaluation: each wife's own-bundle utility 0.37372 beats her
        # utility 0.24082 at the other family's bundle, and husbands sit at
        # their budget optima, so despite the fair-share violation there is
        # no envy and every member is content.
        fraction = democratic_ne_fraction(two_couple_equilibrium_economy, ceei_fs_equilibrium_allocation())
        assert fraction == 1.0

    def test_split_couple_gives_one_half(self):
        couple = Family(
            "f",
            (
                Individual("h", CobbDouglas(np.array([0.8, 0.2]))),
                Individual("w", CobbDouglas(np.array([0.2, 0.8]))),
            ),
        )
        econ = Economy(
            goods_count=2,
            endowment=np.array([2.0, 2.0]),
            families=(couple, Family("s", (Individual("s", CobbDouglas(np.array([0.5, 0.5]))),))),
        )
        x = Allocation({"f": [1.5, 0.5], "s": [0.5, 1.5]})
        # the wife envies the single's z-heavy bundle, the husband does not
        assert democratic_ne_fraction(econ, x) == 0.5

    @given(seed=st.integers(0, 10_000), aseed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_full_fraction_iff_individual_ne(self, seed, aseed):
        econ = random_economy(seed)
        x = random_interior_allocation(econ, aseed)
        eps = 1e-9
        full = democratic_ne_fraction(econ, x, eps) == 1.0
        holds = check_fairness(econ, x, FairnessCriterion.INDIVIDUAL_NE, eps).holds
        assert full == holds


class TestImplicationLattice:
    @given(seed=st.integers(0, 10_000), aseed=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_individual_verdicts_imply_family_verdicts(self, seed, aseed):
        econ = random_economy(seed)
        x = random_interior_allocation(econ, aseed)
        if check_fairness(econ, x, FairnessCriterion.INDIVIDUAL_NE).holds:
            assert check_fairness(econ, x, FairnessCriterion.FAMILY_NE).holds
        if check_fairness(econ, x, FairnessCriterion.INDIVIDUAL_FS).holds:
            assert check_fairness(econ, x, FairnessCriterion.FAMILY_FS).holds
        r = 0.4 * econ.endowment
        if check_individual_ee(econ, x, r)[0]:
            assert check_family_ee(econ, x, r)[0]

    @given(seed=st.integers(0, 10_000), aseed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_family_and_individual_verdicts_coincide_for_singletons(self, seed, aseed):
        econ = random_economy(seed, singleton_families=True)
        x = random_interior_allocation(econ, aseed)
        assert (
            check_fairness(econ, x, FairnessCriterion.INDIVIDUAL_NE).holds
            == check_fairness(econ, x, FairnessCriterion.FAMILY_NE).holds
        )
        assert (
            check_fairness(econ, x, FairnessCriterion.INDIVIDUAL_FS).holds
            == check_fairness(econ, x, FairnessCriterion.FAMILY_FS).holds
        )
        r = 0.7 * econ.endowment
        assert check_individual_ee(econ, x, r)[0] == check_family_ee(econ, x, r)[0]


def test_witness_serialization_with_bundle_against():
    w = Witness(who="w", against=np.array([0.5, 0.5]), gap=0.12)
    assert w.to_dict() == {"who": "w", "against": [0.5, 0.5], "gap": 0.12}


def test_report_invariant_holds_iff_no_witnesses():
    with pytest.raises(AssertionError):
        FairnessReport(criterion=FairnessCriterion.INDIVIDUAL_NE, holds=True, witnesses=(Witness("a", "b", 1.0),))
