"""Fairness predicates over family economies.

The family preference relation is incomplete: a family strictly prefers one
bundle to another only when every member weakly agrees and someone strictly
does; members pulling in opposite directions make the bundles incomparable.
Each criterion below comes in an individual form (every member must be
satisfied) and a family form (judged by the incomplete relation).

Strictness is tolerance-based throughout: a member counts as strictly
preferring only when the raw utility difference exceeds ``eps``.  Use the
default 1e-9 for hand-written allocations and 1e-6 when judging solver
output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np

from famdiv.economy import (
    Allocation,
    Economy,
    ValidationError,
    check_feasible,
    fair_share,
)

DEFAULT_EPS = 1e-9
SOLVER_EPS = 1e-6


class FamilyRelation(Enum):
    STRICTLY_PREFERS_FIRST = "strictly_prefers_first"
    STRICTLY_PREFERS_SECOND = "strictly_prefers_second"
    INDIFFERENT = "indifferent"
    INCOMPARABLE = "incomparable"


class FairnessCriterion(Enum):
    INDIVIDUAL_FS = "individual-fs"
    FAMILY_FS = "family-fs"
    INDIVIDUAL_NE = "individual-ne"
    FAMILY_NE = "family-ne"
    INDIVIDUAL_EE = "individual-ee"
    FAMILY_EE = "family-ee"


@dataclass(frozen=True)
class Witness:
    """One violation: who complains, against what, and by how much."""

    who: str
    against: Union[str, np.ndarray]
    gap: float

    def to_dict(self) -> dict:
        against = self.against.tolist() if isinstance(self.against, np.ndarray) else self.against
        return {"who": self.who, "against": against, "gap": self.gap}


@dataclass(frozen=True)
class FairnessReport:
    criterion: FairnessCriterion
    holds: bool
    witnesses: Tuple[Witness, ...] = field(default_factory=tuple)

    def __post_init__(self):
        # sorted so the maximal-gap offender comes first
        ordered = tuple(sorted(self.witnesses, key=lambda w: -w.gap))
        object.__setattr__(self, "witnesses", ordered)
        assert self.holds == (len(ordered) == 0)

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "holds": self.holds,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def compare_family(econ: Economy, family_id: str, b1, b2, eps: float = DEFAULT_EPS) -> FamilyRelation:
    """Rank two bundles under a family's incomplete preference relation."""
    fam = econ.family(family_id)
    deltas = np.array([float(m.utility.value(np.asarray(b1, float))) - float(m.utility.value(np.asarray(b2, float))) for m in fam.members])
    up = bool(np.any(deltas > eps))
    down = bool(np.any(deltas < -eps))
    if up and down:
        return FamilyRelation.INCOMPARABLE
    if up:
        return FamilyRelation.STRICTLY_PREFERS_FIRST
    if down:
        return FamilyRelation.STRICTLY_PREFERS_SECOND
    return FamilyRelation.INDIFFERENT


def _family_strict_gap(econ: Economy, family_id: str, b1, b2, eps: float) -> float:
    """Largest member gap when the family strictly prefers b1 to b2, else 0."""
    fam = econ.family(family_id)
    deltas = np.array([float(m.utility.value(np.asarray(b1, float))) - float(m.utility.value(np.asarray(b2, float))) for m in fam.members])
    if np.any(deltas < -eps):
        return 0.0
    best = float(deltas.max(initial=0.0))
    return best if best > eps else 0.0


def _require_feasible(econ: Economy, x: Allocation, eps: float):
    ok, witness = check_feasible(econ, x, tol=max(eps, 1e-9))
    if not ok:
        raise ValidationError(f"infeasible allocation: good {witness} is over-allocated")


def check_fairness(
    econ: Economy,
    x: Allocation,
    criterion: FairnessCriterion,
    eps: float = DEFAULT_EPS,
    reference=None,
) -> FairnessReport:
    """Evaluate one fairness criterion and report every violation."""
    _require_feasible(econ, x, eps)
    share = fair_share(econ)
    witnesses: List[Witness] = []

    if criterion == FairnessCriterion.INDIVIDUAL_NE:
        for fi, fam, member in econ.members():
            own = float(member.utility.value(x[fam.id]))
            for other in econ.families:
                if other.id == fam.id:
                    continue
                gap = float(member.utility.value(x[other.id])) - own
                if gap > eps:
                    witnesses.append(Witness(member.id, other.id, gap))
    elif criterion == FairnessCriterion.FAMILY_NE:
        for fam in econ.families:
            for other in econ.families:
                if other.id == fam.id:
                    continue
                gap = _family_strict_gap(econ, fam.id, x[other.id], x[fam.id], eps)
                if gap > 0.0:
                    witnesses.append(Witness(fam.id, other.id, gap))
    elif criterion == FairnessCriterion.INDIVIDUAL_FS:
        for fi, fam, member in econ.members():
            gap = float(member.utility.value(share)) - float(member.utility.value(x[fam.id]))
            if gap > eps:
                witnesses.append(Witness(member.id, share, gap))
    elif criterion == FairnessCriterion.FAMILY_FS:
        for fam in econ.families:
            gap = _family_strict_gap(econ, fam.id, share, x[fam.id], eps)
            if gap > 0.0:
                witnesses.append(Witness(fam.id, share, gap))
    elif criterion in (FairnessCriterion.INDIVIDUAL_EE, FairnessCriterion.FAMILY_EE):
        if reference is None:
            raise ValidationError("egalitarian-equivalence criteria require a reference bundle")
        if criterion == FairnessCriterion.INDIVIDUAL_EE:
            _, witnesses = check_individual_ee(econ, x, reference, eps)
        else:
            _, witnesses = check_family_ee(econ, x, reference, eps)
    else:  # pragma: no cover - exhaustive enum
        raise ValidationError(f"unknown criterion {criterion!r}")

    return FairnessReport(criterion=criterion, holds=not witnesses, witnesses=tuple(witnesses))


def check_individual_ee(econ: Economy, x: Allocation, reference, eps: float = DEFAULT_EPS):
    """True iff every individual is indifferent between the family bundle and
    the reference bundle, up to eps."""
    _require_feasible(econ, x, eps)
    r = np.asarray(reference, dtype=float)
    witnesses = []
    for fi, fam, member in econ.members():
        gap = abs(float(member.utility.value(x[fam.id])) - float(member.utility.value(r)))
        if gap > eps:
            witnesses.append(Witness(member.id, r, gap))
    witnesses.sort(key=lambda w: -w.gap)
    return not witnesses, witnesses


def check_family_ee(econ: Economy, x: Allocation, reference, eps: float = DEFAULT_EPS):
    """True iff no family can strictly rank its bundle against the reference.

    Families that cannot rank the two bundles (members disagree strictly)
    satisfy the criterion by definition.
    """
    _require_feasible(econ, x, eps)
    r = np.asarray(reference, dtype=float)
    witnesses = []
    for fam in econ.families:
        relation = compare_family(econ, fam.id, x[fam.id], r, eps)
        if relation in (FamilyRelation.STRICTLY_PREFERS_FIRST, FamilyRelation.STRICTLY_PREFERS_SECOND):
            deltas = [float(m.utility.value(x[fam.id])) - float(m.utility.value(r)) for m in fam.members]
            witnesses.append(Witness(fam.id, r, max(abs(d) for d in deltas)))
    witnesses.sort(key=lambda w: -w.gap)
    return not witnesses, witnesses


# ---------------------------------------------------------------------------
# Reference search
# ---------------------------------------------------------------------------

def _ee_violation_batch(econ: Economy, x: Allocation, candidates: np.ndarray, mode: str, eps: float) -> np.ndarray:
    """Violation of the EE criterion for each candidate reference, shape (N,)."""
    n = candidates.shape[0]
    if mode == "individual":
        worst = np.zeros(n)
        for fi, fam, member in econ.members():
            own = float(member.utility.value(x[fam.id]))
            worst = np.maximum(worst, np.abs(own - member.utility.value(candidates)))
        return worst
    worst = np.zeros(n)
    for fam in econ.families:
        deltas = np.stack([float(m.utility.value(x[fam.id])) - m.utility.value(candidates) for m in fam.members])
        up = deltas > eps
        down = deltas < -eps
        strict_first = up.any(axis=0) & ~down.any(axis=0)
        strict_second = down.any(axis=0) & ~up.any(axis=0)
        gap = np.where(strict_first, deltas.max(axis=0), 0.0)
        gap = np.where(strict_second, -deltas.min(axis=0), gap)
        worst = np.maximum(worst, gap)
    return worst


def _halving_minimize(fn, lo: float, hi: float, tol: float) -> float:
    """Bisection-style refinement: repeatedly halve a bracket around the
    minimum of a scalar function sampled at five points."""
    while hi - lo > tol:
        ts = np.linspace(lo, hi, 5)
        vs = [fn(t) for t in ts]
        i = int(np.argmin(vs))
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, 4)]
    return 0.5 * (lo + hi)


def find_ee_reference(
    econ: Economy,
    x: Allocation,
    mode: str = "family",
    grid_n: int = 200,
    eps: float = DEFAULT_EPS,
) -> Optional[np.ndarray]:
    """Search for a reference bundle certifying egalitarian equivalence.

    Scans the ray {t*e : t in [0, 1]} first (the constructive procedures
    always place their reference there), refining the best ray candidate by
    bracket halving on t to tolerance eps; then falls back to the full
    rectangular grid over [0, e].  Returns the first passing bundle, None if
    the search is exhausted.
    """
    if mode not in ("individual", "family"):
        raise ValidationError(f"unknown reference-search mode {mode!r}")
    _require_feasible(econ, x, eps)
    e = econ.endowment

    ts = np.linspace(0.0, 1.0, grid_n + 1)
    ray = ts[:, None] * e
    violations = _ee_violation_batch(econ, x, ray, mode, eps)
    hits = np.flatnonzero(violations <= 0.0 if mode == "family" else violations <= eps)
    if hits.size:
        return ray[int(hits[0])].copy()

    # refine around the least-violating ray point before giving up on the ray
    best = int(np.argmin(violations))
    step = 1.0 / grid_n

    def ray_violation(t: float) -> float:
        return float(_ee_violation_batch(econ, x, np.array([t * e]), mode, eps)[0])

    t_star = _halving_minimize(ray_violation, max(ts[best] - step, 0.0), min(ts[best] + step, 1.0), eps)
    if ray_violation(t_star) <= (0.0 if mode == "family" else eps):
        return t_star * e

    axes = [np.linspace(0.0, e[g], grid_n + 1) for g in range(econ.goods_count)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, econ.goods_count)
    chunk = 200_000
    for start in range(0, mesh.shape[0], chunk):
        block = mesh[start : start + chunk]
        violations = _ee_violation_batch(econ, x, block, mode, eps)
        hits = np.flatnonzero(violations <= 0.0 if mode == "family" else violations <= eps)
        if hits.size:
            return block[int(hits[0])].copy()
    return None


def democratic_ne_fraction(econ: Economy, x: Allocation, eps: float = DEFAULT_EPS) -> float:
    """Smallest per-family fraction of members who envy no other family."""
    _require_feasible(econ, x, eps)
    worst = 1.0
    for fam in econ.families:
        content = 0
        for member in fam.members:
            own = float(member.utility.value(x[fam.id]))
            envies = any(
                float(member.utility.value(x[other.id])) - own > eps
                for other in econ.families
                if other.id != fam.id
            )
            content += 0 if envies else 1
        worst = min(worst, content / fam.size)
    return worst
