"""Pareto dominance, the two-good MRS-range optimality test, and a
brute-force grid oracle.

For interior, exactly exhaustive two-good allocations with differentiable
utilities, an allocation is Pareto optimal iff the per-family intervals
between the smallest and largest member MRS share a common point.  The test
refuses boundary or non-exhaustive allocations instead of extrapolating;
the grid oracle is the slow, assumption-free cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple

import numpy as np

from famdiv.economy import (
    CES,
    Allocation,
    CobbDouglas,
    Economy,
    Linear,
    ValidationError,
    check_feasible,
)

DEFAULT_EPS = 1e-9
DEFAULT_GRID_BUDGET = 50_000_000
_CHUNK = 500_000


class GridBudgetError(ValueError):
    """Raised when a grid enumeration would exceed its configured budget."""


class ParetoStatus(Enum):
    OPTIMAL = "optimal"
    NOT_OPTIMAL = "not_optimal"
    INAPPLICABLE = "inapplicable"


@dataclass(frozen=True)
class MrsRange:
    low: float
    high: float

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high)) or self.low > self.high:
            raise ValidationError("MRS range must be a finite interval with low <= high")


@dataclass(frozen=True)
class ParetoVerdict:
    status: ParetoStatus
    mrs_gap: Optional[float] = None
    dominating: Optional[Allocation] = None
    reason: Optional[str] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == ParetoStatus.OPTIMAL

    def to_dict(self) -> dict:
        doc = {"status": self.status.value}
        if self.mrs_gap is not None:
            doc["mrs_gap"] = self.mrs_gap
        if self.dominating is not None:
            doc["dominating"] = self.dominating.to_dict()
        if self.reason is not None:
            doc["reason"] = self.reason
        return doc


def dominates(econ: Economy, x_new: Allocation, x_old: Allocation, eps: float = DEFAULT_EPS) -> bool:
    """True iff x_new makes every member weakly better (within eps) and some
    member strictly better (beyond eps)."""
    for alloc in (x_new, x_old):
        ok, witness = check_feasible(econ, alloc, tol=max(eps, 1e-9))
        if not ok:
            raise ValidationError(f"infeasible allocation: good {witness} is over-allocated")
    any_strict = False
    for fi, fam, member in econ.members():
        new = float(member.utility.value(x_new[fam.id]))
        old = float(member.utility.value(x_old[fam.id]))
        if new < old - eps:
            return False
        if new > old + eps:
            any_strict = True
    return any_strict


def mrs_range(econ: Economy, family_id: str, bundle) -> MrsRange:
    """Interval between the smallest and largest member MRS at a bundle."""
    if econ.goods_count != 2:
        raise ValidationError("MRS ranges require exactly two goods")
    b = np.asarray(bundle, dtype=float)
    if np.any(b <= 0.0):
        raise ValidationError("MRS range is undefined on the boundary")
    values = [float(m.utility.mrs(b)) for m in econ.family(family_id).members]
    return MrsRange(low=min(values), high=max(values))


def pareto_test_mrs(econ: Economy, x: Allocation, eps: float = DEFAULT_EPS) -> ParetoVerdict:
    """First-order Pareto test: do all family MRS ranges share a point?

    Only applies to interior, exactly exhaustive two-good allocations; other
    inputs get an INAPPLICABLE verdict rather than a guess.
    """
    if econ.goods_count != 2:
        return ParetoVerdict(ParetoStatus.INAPPLICABLE, reason="requires exactly two goods")
    matrix = x.matrix(econ)
    residual = np.abs(matrix.sum(axis=0) - econ.endowment).max()
    if residual > max(eps, 1e-12):
        return ParetoVerdict(ParetoStatus.INAPPLICABLE, reason="allocation does not exhaust the endowment")
    if np.any(matrix <= eps):
        return ParetoVerdict(ParetoStatus.INAPPLICABLE, reason="allocation touches the boundary")
    ranges = [mrs_range(econ, fid, x[fid]) for fid in econ.family_ids]
    widest_low = max(r.low for r in ranges)
    narrowest_high = min(r.high for r in ranges)
    if widest_low <= narrowest_high + eps:
        return ParetoVerdict(ParetoStatus.OPTIMAL)
    return ParetoVerdict(ParetoStatus.NOT_OPTIMAL, mrs_gap=widest_low - narrowest_high)


# ---------------------------------------------------------------------------
# Exhaustive grid enumeration
# ---------------------------------------------------------------------------

def grid_allocation_count(econ: Economy, grid_n: int) -> int:
    """Size of the exhaustive-allocation grid: (grid_n+1)^(G*(F-1)) index
    combinations for all but the last family (the remainder family is
    determined, and combinations that over-allocate are skipped)."""
    return (grid_n + 1) ** (econ.goods_count * (econ.n_families - 1))


def iter_grid_allocations(
    econ: Economy, grid_n: int, chunk: int = _CHUNK
) -> Iterator[np.ndarray]:
    """Yield batches of exhaustive grid allocations, shape (B, F, G).

    Every allocation splits each good into multiples of e_g/grid_n summing
    exactly to e_g.  Batches follow the lexicographic order of the leading
    families' grid indices, so concatenating all batches is deterministic.
    """
    n_fam, goods = econ.n_families, econ.goods_count
    base = grid_n + 1
    digits = goods * (n_fam - 1)
    total = base ** digits
    if n_fam == 1:
        yield econ.endowment[None, None, :].copy()
        return
    place = base ** np.arange(digits - 1, -1, -1)
    step = econ.endowment / grid_n
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        ks = (idx[:, None] // place[None, :]) % base  # (B, digits)
        ks = ks.reshape(-1, n_fam - 1, goods)
        rest = grid_n - ks.sum(axis=1)  # (B, goods)
        valid = np.all(rest >= 0, axis=1)
        if not np.any(valid):
            continue
        ks = ks[valid]
        rest = rest[valid]
        matrices = np.empty((ks.shape[0], n_fam, goods))
        matrices[:, :-1, :] = ks * step
        matrices[:, -1, :] = rest * step
        yield matrices


def pareto_oracle_grid(
    econ: Economy,
    x: Allocation,
    grid_n: int,
    eps: float = DEFAULT_EPS,
    budget: int = DEFAULT_GRID_BUDGET,
) -> Optional[Allocation]:
    """Search the exhaustive grid for an allocation dominating x.

    Returns the lexicographically first dominator, or None.  Free disposal
    never helps a monotone economy, so only exactly exhaustive grid points
    are enumerated; that drops one family dimension from the grid.
    """
    ok, witness = check_feasible(econ, x, tol=max(eps, 1e-9))
    if not ok:
        raise ValidationError(f"infeasible allocation: good {witness} is over-allocated")
    if grid_allocation_count(econ, grid_n) > budget:
        raise GridBudgetError(
            f"grid of {grid_allocation_count(econ, grid_n)} allocations exceeds the budget of {budget}"
        )
    base_utilities = [
        (fi, member.utility, float(member.utility.value(x[fam.id])))
        for fi, fam, member in econ.members()
    ]
    for matrices in iter_grid_allocations(econ, grid_n):
        all_weak = np.ones(matrices.shape[0], dtype=bool)
        any_strict = np.zeros(matrices.shape[0], dtype=bool)
        for fi, utility, old in base_utilities:
            new = utility.value(matrices[:, fi, :])
            all_weak &= new >= old - eps
            any_strict |= new > old + eps
        hits = np.flatnonzero(all_weak & any_strict)
        if hits.size:
            return Allocation.from_matrix(econ, matrices[int(hits[0])])
    return None


def mrs_values_batch(utility, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorized two-good MRS for batches of (y, z) coordinates."""
    if isinstance(utility, CobbDouglas):
        return (utility.weights[0] / utility.weights[1]) * (z / y)
    if isinstance(utility, Linear):
        return np.full_like(y, utility.coefficients[0] / utility.coefficients[1])
    if isinstance(utility, CES):
        return (utility.weights[0] / utility.weights[1]) * np.power(y / z, utility.rho - 1.0)
    raise ValidationError(f"unsupported utility type {type(utility).__name__}")
