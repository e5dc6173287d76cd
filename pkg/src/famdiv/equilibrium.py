"""Market equilibria for family economies.

A triple (prices, allocation, initial endowment) is an equilibrium when
every family can afford its bundle from its endowment and no affordable
bundle is strictly preferred by the whole family.  Because family
preferences are incomplete, "demand" is realized as the budget bundle
maximizing the smallest normalized member utility: any such maximizer
admits no affordable bundle that every member strictly prefers, which is
exactly the second equilibrium condition for strictly convex members.

Price discovery follows the classic sign-damped iteration on the price
simplex: p <- project(p + step * excess_demand), halving the step whenever
the excess demand flips sign.  Non-convergence yields an honest None; the
economies here can in principle defeat any simple price adjustment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from famdiv.economy import (
    Allocation,
    Economy,
    Family,
    ValidationError,
    fair_share,
)
from famdiv.fairness import FairnessCriterion, check_fairness

LOGGER = logging.getLogger(__name__)

_WEAK_SLACK = 1e-12  # exact weak preference, up to rounding
_PRICE_FLOOR = 1e-9


@dataclass(frozen=True)
class EquilibriumConfig:
    step: float = 0.05
    max_iterations: int = 100_000
    clearing_tol: float = 1e-6
    response_tol: float = 1e-12


@dataclass(frozen=True)
class EquilibriumTriple:
    prices: np.ndarray
    allocation: Allocation
    initial_endowment: Allocation

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float).copy()
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("prices must lie on the unit simplex")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)

    def to_dict(self) -> dict:
        return {
            "prices": [float(f"{p:.12g}") for p in self.prices],
            "allocation": self.allocation.to_dict(),
            "initial_endowment": self.initial_endowment.to_dict(),
        }


@dataclass(frozen=True)
class EquilibriumReport:
    budget_ok: Dict[str, bool]
    improvement_witness: Dict[str, Optional[np.ndarray]]
    market_clearing_residual: float
    clearing_tol: float

    @property
    def no_affordable_improvement(self) -> Dict[str, bool]:
        return {fid: w is None for fid, w in self.improvement_witness.items()}

    @property
    def valid(self) -> bool:
        return (
            all(self.budget_ok.values())
            and all(w is None for w in self.improvement_witness.values())
            and self.market_clearing_residual <= self.clearing_tol
        )

    def to_dict(self) -> dict:
        return {
            "budget_ok": self.budget_ok,
            "no_affordable_improvement": self.no_affordable_improvement,
            "improvement_witness": {
                fid: (None if w is None else w.tolist()) for fid, w in self.improvement_witness.items()
            },
            "market_clearing_residual": self.market_clearing_residual,
            "valid": self.valid,
        }


# ---------------------------------------------------------------------------
# Budget-line geometry (two goods)
# ---------------------------------------------------------------------------

def _line_bundle(p: np.ndarray, budget: float, y):
    y = np.maximum(np.asarray(y, dtype=float), 0.0)
    z = np.maximum((budget - p[0] * y) / p[1], 0.0)
    return np.stack([y, z], axis=-1)


def _member_floor_interval(econ, member, p, budget, lo, hi, anchor, tol):
    """Sub-interval of [lo, hi] around the anchor where the member's utility
    stays at or above the fair-share level (the utility is concave along the
    budget line, so the feasible set is an interval)."""
    u = member.utility
    level = float(u.value(fair_share(econ)))

    def ok(y):
        return float(u.value(_line_bundle(p, budget, y))) >= level - 1e-12

    left, right = lo, hi
    if not ok(right):
        a, b = anchor, right
        while b - a > tol:
            mid = 0.5 * (a + b)
            if ok(mid):
                a = mid
            else:
                b = mid
        right = a
    if not ok(left):
        a, b = left, anchor
        while b - a > tol:
            mid = 0.5 * (a + b)
            if ok(mid):
                b = mid
            else:
                a = mid
        left = b
    return left, right


def _golden_max(fn, lo: float, hi: float, tol: float) -> float:
    """Deterministic golden-section maximization of a concave function."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _family_response(
    econ: Economy,
    fam: Family,
    p: np.ndarray,
    budget: float,
    restricted: bool,
    tol: float,
) -> np.ndarray:
    """Budget bundle maximizing the smallest normalized member utility.

    With ``restricted`` the choice set is additionally cut to bundles below
    the endowment that leave every member at or above the fair-share level.
    """
    if econ.goods_count != 2:
        raise ValidationError("family demand is implemented for two-good economies")
    e = econ.endowment
    lo, hi = 0.0, budget / p[0]
    if restricted:
        hi = min(hi, float(e[0]))
        lo = max(lo, (budget - p[1] * float(e[1])) / p[0])
        anchor = float(fair_share(econ)[0])  # the fair share lies on the line
        for member in fam.members:
            lo, hi = _member_floor_interval(econ, member, p, budget, lo, hi, anchor, tol)
    if hi <= lo:
        return _line_bundle(p, budget, lo)
    if fam.size == 1 and not restricted:
        return fam.members[0].utility.demand(p, budget)
    if fam.size == 1:
        # concave single-peaked along the line: clip the demand coordinate
        y = float(np.clip(fam.members[0].utility.demand(p, budget)[0], lo, hi))
        return _line_bundle(p, budget, y)
    scales = [float(m.utility.value(e)) for m in fam.members]

    def worst(y):
        bundle = _line_bundle(p, budget, y)
        return min(float(m.utility.value(bundle)) / s for m, s in zip(fam.members, scales))

    best_y = _golden_max(worst, lo, hi, tol)
    return _line_bundle(p, budget, best_y)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

def verify_equilibrium(
    econ: Economy,
    trip: EquilibriumTriple,
    eps: float = 1e-6,
    line_points: int = 512,
    restricted: bool = False,
) -> EquilibriumReport:
    """Check budgets and search each family's budget set for a bundle the
    whole family strictly prefers (weak preference is exact up to rounding;
    strict preference needs a gap above eps)."""
    p = trip.prices
    budget_ok: Dict[str, bool] = {}
    witnesses: Dict[str, Optional[np.ndarray]] = {}
    for fam in econ.families:
        bundle = trip.allocation[fam.id]
        budget = float(p @ trip.initial_endowment[fam.id])
        budget_ok[fam.id] = float(p @ bundle) <= budget + eps
        witnesses[fam.id] = _improvement_witness(econ, fam, p, budget, bundle, eps, line_points, restricted)
    residual = float(np.abs(trip.allocation.matrix(econ).sum(axis=0) - econ.endowment).max())
    return EquilibriumReport(
        budget_ok=budget_ok,
        improvement_witness=witnesses,
        market_clearing_residual=residual,
        clearing_tol=max(eps, 1e-9),
    )


def _improvement_witness(econ, fam, p, budget, bundle, eps, line_points, restricted):
    if econ.goods_count != 2:
        raise ValidationError("equilibrium verification is implemented for two-good economies")
    base = [float(m.utility.value(bundle)) for m in fam.members]
    lo, hi = 0.0, budget / p[0]
    if restricted:
        hi = min(hi, float(econ.endowment[0]))
        lo = max(lo, (budget - p[1] * float(econ.endowment[1])) / p[0])
        anchor = float(fair_share(econ)[0])
        for member in fam.members:
            lo, hi = _member_floor_interval(econ, member, p, budget, lo, hi, anchor, 1e-12)
        if hi <= lo:
            return None
    ys = np.linspace(lo, hi, line_points + 1)
    candidates = _line_bundle(p, budget, ys)
    deltas = np.stack([m.utility.value(candidates) - b for m, b in zip(fam.members, base)])
    flags = (deltas.min(axis=0) >= -_WEAK_SLACK) & (deltas.max(axis=0) > eps)
    hits = np.flatnonzero(flags)
    if hits.size:
        return candidates[int(hits[0])].copy()

    # refine around the most favorable direction to catch between-grid wins
    def worst_delta(y):
        cand = _line_bundle(p, budget, y)
        return min(float(m.utility.value(cand)) - b for m, b in zip(fam.members, base))

    best = int(np.argmax(deltas.min(axis=0)))
    step = (hi - lo) / line_points if line_points else 0.0
    y_star = _golden_max(worst_delta, max(lo, ys[best] - step), min(hi, ys[best] + step), 1e-12)
    cand = _line_bundle(p, budget, y_star)
    deltas_star = [float(m.utility.value(cand)) - b for m, b in zip(fam.members, base)]
    if min(deltas_star) >= -_WEAK_SLACK and max(deltas_star) > eps:
        return cand
    return None


# ---------------------------------------------------------------------------
# Price discovery
# ---------------------------------------------------------------------------

def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _price_iteration(econ: Economy, budgets_of, restricted: bool, cfg: EquilibriumConfig):
    """Run the damped projected price iteration; returns (p, responses) on
    clearing, or None."""
    goods = econ.goods_count
    p = np.full(goods, 1.0 / goods)
    step = cfg.step
    last_sign = 0.0
    for _ in range(cfg.max_iterations):
        p = np.maximum(p, _PRICE_FLOOR)
        p = p / p.sum()
        budgets = budgets_of(p)
        responses = np.stack(
            [
                _family_response(econ, fam, p, budgets[i], restricted, cfg.response_tol)
                for i, fam in enumerate(econ.families)
            ]
        )
        excess = responses.sum(axis=0) - econ.endowment
        if np.abs(excess).max() <= cfg.clearing_tol:
            return p, responses
        sign = np.sign(excess[0])
        if last_sign and sign and sign != last_sign:
            step = max(step * 0.5, 1e-7)
        else:
            step = min(step * 1.02, cfg.step * 4)
        last_sign = sign
        p = _project_simplex(p + step * excess)
    return None


def tatonnement(
    econ: Economy, x0: Allocation, cfg: EquilibriumConfig = EquilibriumConfig()
) -> Optional[EquilibriumTriple]:
    """Search for a market equilibrium from the given endowment allocation.

    Each family's response maximizes its smallest normalized member utility
    within the budget set; None is returned when the price iteration fails
    to clear the market."""
    matrix = x0.matrix(econ)

    def budgets_of(p):
        return matrix @ p

    found = _price_iteration(econ, budgets_of, restricted=False, cfg=cfg)
    if found is None:
        LOGGER.warning("tatonnement did not clear the market within %d iterations", cfg.max_iterations)
        return None
    p, responses = found
    return EquilibriumTriple(
        prices=p, allocation=Allocation.from_matrix(econ, responses), initial_endowment=x0
    )


def restricted_equilibrium(
    econ: Economy, cfg: EquilibriumConfig = EquilibriumConfig()
) -> Optional[EquilibriumTriple]:
    """Equilibrium from equal endowments with choice sets cut to bundles
    every member weakly prefers to the fair share.

    On clearing, the allocation is checked for family-no-envy and the
    individual fair-share guarantee; a converged allocation failing either
    check is reported and discarded."""
    share = fair_share(econ)
    x0 = Allocation({fid: share.copy() for fid in econ.family_ids})

    def budgets_of(p):
        return np.full(econ.n_families, float(p @ share))

    found = _price_iteration(econ, budgets_of, restricted=True, cfg=cfg)
    if found is None:
        LOGGER.warning("restricted price iteration did not clear the market")
        return None
    p, responses = found
    allocation = Allocation.from_matrix(econ, responses)
    family_ne = check_fairness(econ, allocation, FairnessCriterion.FAMILY_NE, 1e-6)
    individual_fs = check_fairness(econ, allocation, FairnessCriterion.INDIVIDUAL_FS, 1e-6)
    if not (family_ne.holds and individual_fs.holds):
        LOGGER.warning(
            "restricted equilibrium cleared but failed checks: family-NE=%s individual-FS=%s",
            family_ne.holds,
            individual_fs.holds,
        )
        return None
    return EquilibriumTriple(prices=p, allocation=allocation, initial_endowment=x0)
