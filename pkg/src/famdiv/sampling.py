"""Seeded random economies and allocations for tests and experiments.

Everything is driven by ``numpy.random.default_rng`` so a seed fully
determines the draw.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from famdiv.economy import CES, Allocation, CobbDouglas, Economy, Family, Individual


def random_cobb_douglas(rng: np.random.Generator, goods: int = 2, low: float = 0.1, high: float = 0.9) -> CobbDouglas:
    if goods == 2:
        w = rng.uniform(low, high)
        return CobbDouglas(np.array([w, 1.0 - w]))
    raw = rng.uniform(low, high, size=goods)
    return CobbDouglas(raw / raw.sum())


def random_ces(rng: np.random.Generator, goods: int = 2) -> CES:
    if goods == 2:
        w = rng.uniform(0.2, 0.8)
        weights = np.array([w, 1.0 - w])
    else:
        raw = rng.uniform(0.2, 0.8, size=goods)
        weights = raw / raw.sum()
    rho = rng.uniform(-1.5, 0.7)
    if abs(rho) < 0.05:
        rho = 0.05 if rho >= 0 else -0.05
    return CES(weights, rho)


def random_economy(
    seed: int,
    *,
    n_families: Optional[int] = None,
    max_families: int = 3,
    max_members: int = 3,
    goods: int = 2,
    endowment=(2.0, 2.0),
    include_ces: bool = False,
    singleton_families: bool = False,
) -> Economy:
    """A strictly convex economy (Cobb-Douglas members, optionally CES)."""
    rng = np.random.default_rng(seed)
    count = n_families if n_families is not None else int(rng.integers(2, max_families + 1))
    families = []
    serial = 0
    for fi in range(count):
        size = 1 if singleton_families else int(rng.integers(1, max_members + 1))
        members = []
        for _ in range(size):
            if include_ces and rng.uniform() < 0.3:
                utility = random_ces(rng, goods)
            else:
                utility = random_cobb_douglas(rng, goods)
            members.append(Individual(id=f"i{serial}", utility=utility))
            serial += 1
        families.append(Family(id=f"f{fi}", members=tuple(members)))
    return Economy(goods_count=goods, endowment=np.asarray(endowment, dtype=float), families=tuple(families))


def random_interior_allocation(econ: Economy, seed: int, floor: float = 0.08) -> Allocation:
    """A random exhaustive allocation bounded away from the boundary.

    Each good is split by a Dirichlet draw blended with the equal split so
    every family keeps at least ``floor``/|F| of every good.
    """
    rng = np.random.default_rng(seed)
    n = econ.n_families
    matrix = np.empty((n, econ.goods_count))
    for g in range(econ.goods_count):
        shares = rng.dirichlet(np.ones(n))
        shares = floor / n + (1.0 - floor) * shares
        matrix[:, g] = shares * econ.endowment[g]
    return Allocation.from_matrix(econ, matrix)


def equal_split_allocation(econ: Economy) -> Allocation:
    share = econ.endowment / econ.n_families
    return Allocation({fid: share.copy() for fid in econ.family_ids})


# ---------------------------------------------------------------------------
# Calibrated generators for MRS-test / grid-oracle cross-validation.
#
# A grid oracle can only certify non-optimality when the set of dominating
# allocations is wide relative to the grid: trades happen at integer step
# ratios, and second-order utility losses grow with the step size relative
# to the holdings.  Mid-size MRS gaps over lopsided holdings produce
# improvement lenses thinner than one grid cell, which no enumeration at
# that resolution can see.  The generators below stay inside the resolvable
# regime: balanced lattice-aligned holdings, and either a supported common
# price (efficient) or family weight profiles separated by a wide margin
# (inefficient with fat improvement lenses).
# ---------------------------------------------------------------------------

def mismatched_couples_economy(seed: int, endowment=(2.0, 2.0)) -> Economy:
    """Two families, 1-3 Cobb-Douglas members each, with opposing tastes:
    one family's weights on the first good lie in (0.65, 0.85), the other's
    in (0.15, 0.35)."""
    rng = np.random.default_rng(seed)
    families = []
    serial = 0
    for fi, (lo, hi) in enumerate([(0.65, 0.85), (0.15, 0.35)]):
        size = int(rng.integers(1, 4))
        members = []
        for _ in range(size):
            w = rng.uniform(lo, hi)
            members.append(Individual(id=f"i{serial}", utility=CobbDouglas(np.array([w, 1.0 - w]))))
            serial += 1
        families.append(Family(id=f"f{fi}", members=tuple(members)))
    return Economy(goods_count=2, endowment=np.asarray(endowment, dtype=float), families=tuple(families))


def lattice_interior_allocation(econ: Economy, seed: int, grid_n: int = 64, margin: int = 26) -> Allocation:
    """Exhaustive two-family allocation on the grid lattice, each family
    holding at least ``margin`` of the ``grid_n`` units of every good."""
    if econ.n_families != 2:
        raise ValueError("lattice allocation generator is for two-family economies")
    rng = np.random.default_rng(seed)
    matrix = np.empty((2, econ.goods_count))
    for g in range(econ.goods_count):
        k = int(rng.integers(margin, grid_n - margin + 1))
        matrix[0, g] = k * econ.endowment[g] / grid_n
        matrix[1, g] = (grid_n - k) * econ.endowment[g] / grid_n
    return Allocation.from_matrix(econ, matrix)


def supported_optimum_allocation(econ: Economy, seed: int) -> Optional[Allocation]:
    """An exactly exhaustive two-family allocation supported by a common
    price: each family's bundle direction puts the price inside its MRS
    range, so the allocation is Pareto optimal.  Returns None when no tried
    price yields a positive solution."""
    if econ.n_families != 2:
        raise ValueError("supported optimum generator is for two-family economies")
    rng = np.random.default_rng(seed)
    for _ in range(24):
        price = rng.uniform(0.6, 1.6)
        directions = []
        for fam in econ.families:
            ratios = np.array([float(m.utility.weights[0] / m.utility.weights[1]) for m in fam.members])
            z_over_y = price / np.exp(np.mean(np.log(ratios)))
            directions.append(np.array([1.0, z_over_y]))
        basis = np.column_stack(directions)
        if abs(np.linalg.det(basis)) < 1e-9:
            continue
        scales = np.linalg.solve(basis, econ.endowment)
        if np.all(scales > 1e-9):
            return Allocation.from_matrix(
                econ, np.stack([scales[0] * directions[0], scales[1] * directions[1]])
            )
    return None
