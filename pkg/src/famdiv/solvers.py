"""Constructive procedures: iterated maximin (leximin), welfare maximization
over the fair-share region, the equal-aggregate egalitarian construction,
and grid certificates of joint impossibility.

The inner engine solves each maximin stage as a deterministic epigraph
program (maximize t subject to objective_j >= t) with SLSQP, restarted from
a fixed set of seeded interior starting points; verdicts are always
re-checked with exact, unsmoothed evaluators.  Normalized utilities use the
degree-one homogeneity of the supported utility families (t = u(b)/u(e)),
which agrees with the bisection-based public normalization to tighter than
1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from famdiv.economy import Allocation, Economy, ValidationError, fair_share
from famdiv.fairness import FairnessCriterion
from famdiv.pareto import GridBudgetError, iter_grid_allocations, mrs_values_batch

#: Marker for the efficiency component in certificate criteria sets.
PARETO_OPTIMALITY = "pareto-optimality"

_MRS_FLOOR = 1e-9  # coordinate clamp for the extended boundary MRS gap


class SolverDiagnosticsError(RuntimeError):
    """Raised when an optimization cannot be trusted; carries diagnostics."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ObjectiveSet(Enum):
    INDIVIDUAL_NORMALIZED = "individual-normalized"
    FAMILY_PRODUCT = "family-product"
    FAMILY_GEOMETRIC_MEAN = "family-geometric-mean"
    FAMILY_SUM = "family-sum"


class Region(Enum):
    ALL = "all"
    INDIVIDUAL_FS_ONLY = "individual-fs-only"


@dataclass(frozen=True)
class SolveConfig:
    """Numeric knobs shared by the solvers.

    ``iterations`` caps the inner constrained-solver iterations, ``tol`` is
    the slack used when freezing leximin stages and asserting equal
    objectives, and ``restarts`` fixes the number of seeded starting points
    (seed 0 is the equal split).
    """

    iterations: int = 20000
    tol: float = 1e-7
    restarts: int = 5

    def __post_init__(self):
        if self.tol <= 0:
            raise ValidationError("solver tolerance must be positive")


@dataclass(frozen=True)
class Objective:
    """One scalar objective over allocation matrices, with gradient."""

    label: str
    value: callable
    gradient: callable


def _normalized_terms(econ: Economy):
    """Per-individual (family_index, utility, u(e), label) tuples."""
    return [
        (fi, member.utility, float(member.utility.value(econ.endowment)), member.id)
        for fi, fam, member in econ.members()
    ]


def build_objectives(econ: Economy, kind: ObjectiveSet) -> List[Objective]:
    terms = _normalized_terms(econ)
    n_fam = econ.n_families
    share = 1.0 / n_fam

    if kind == ObjectiveSet.INDIVIDUAL_NORMALIZED:
        objectives = []
        for fi, u, ue, label in terms:
            def value(A, fi=fi, u=u, ue=ue):
                return float(u.value(A[fi])) / ue - share

            def gradient(A, fi=fi, u=u, ue=ue):
                g = np.zeros_like(A)
                g[fi] = u.gradient(A[fi]) / ue
                return g

            objectives.append(Objective(label, value, gradient))
        return objectives

    if kind == ObjectiveSet.FAMILY_SUM:
        objectives = []
        for fi, fam in enumerate(econ.families):
            members = [m.utility for m in fam.members]

            def value(A, fi=fi, members=members):
                return sum(float(u.value(A[fi])) for u in members)

            def gradient(A, fi=fi, members=members):
                g = np.zeros_like(A)
                for u in members:
                    g[fi] += u.gradient(A[fi])
                return g

            objectives.append(Objective(fam.id, value, gradient))
        return objectives

    if kind in (ObjectiveSet.FAMILY_PRODUCT, ObjectiveSet.FAMILY_GEOMETRIC_MEAN):
        objectives = []
        for fi, fam in enumerate(econ.families):
            members = [(m.utility, float(m.utility.value(econ.endowment))) for m in fam.members]
            exponent = 1.0 / fam.size if kind == ObjectiveSet.FAMILY_GEOMETRIC_MEAN else 1.0

            def value(A, fi=fi, members=members, exponent=exponent):
                # normalized utilities clipped below at 0, as on the
                # fair-share region where the construction lives
                vals = [max(float(u.value(A[fi])) / ue - share, 0.0) for u, ue in members]
                return float(np.prod(vals) ** exponent)

            def gradient(A, fi=fi, members=members, exponent=exponent):
                vals = np.array([float(u.value(A[fi])) / ue - share for u, ue in members])
                clipped = np.maximum(vals, 0.0)
                g = np.zeros_like(A)
                if np.any(vals <= 0.0):
                    return g  # the clip zeroes the product and its gradient
                prod = float(np.prod(clipped))
                outer = exponent * prod ** exponent
                for (u, ue), v in zip(members, clipped):
                    g[fi] += outer / max(v, 1e-12) * (u.gradient(A[fi]) / ue)
                return g

            objectives.append(Objective(fam.id, value, gradient))
        return objectives

    raise ValidationError(f"unknown objective set {kind!r}")


# ---------------------------------------------------------------------------
# Inner epigraph solver
# ---------------------------------------------------------------------------

def _start_points(econ: Economy, restarts: int) -> List[np.ndarray]:
    n, goods = econ.n_families, econ.goods_count
    points = [np.tile(econ.endowment / n, (n, 1))]
    for seed in range(1, restarts):
        rng = np.random.default_rng(seed)
        matrix = np.empty((n, goods))
        for g in range(goods):
            shares = 0.1 / n + 0.9 * rng.dirichlet(np.ones(n))
            matrix[:, g] = shares * econ.endowment[g]
        points.append(matrix)
    return points


def _solve_epigraph(
    econ: Economy,
    objectives: List[Objective],
    active: List[int],
    frozen: Dict[int, float],
    fs_constraints: bool,
    cfg: SolveConfig,
    warm_start: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, float, dict]:
    """Maximize min_{j in active} objective_j over feasible allocations.

    Returns (allocation matrix, exact min over active objectives, diagnostics).
    """
    n, goods = econ.n_families, econ.goods_count
    size = n * goods
    e = econ.endowment
    terms = _normalized_terms(econ) if fs_constraints else []
    share = 1.0 / n

    def matrix_of(z):
        return z[:size].reshape(n, goods)

    constraints = []
    for g in range(goods):
        jac = np.zeros(size + 1)
        jac[g:size:goods] = 1.0
        constraints.append(
            {
                "type": "eq",
                "fun": lambda z, g=g: z[:size].reshape(n, goods)[:, g].sum() - e[g],
                "jac": lambda z, jac=jac: jac,
            }
        )
    for j in active:
        obj = objectives[j]
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda z, obj=obj: obj.value(matrix_of(z)) - z[-1],
                "jac": lambda z, obj=obj: np.concatenate([obj.gradient(matrix_of(z)).ravel(), [-1.0]]),
            }
        )
    for j, floor in frozen.items():
        obj = objectives[j]
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda z, obj=obj, floor=floor: obj.value(matrix_of(z)) - (floor - cfg.tol),
                "jac": lambda z, obj=obj: np.concatenate([obj.gradient(matrix_of(z)).ravel(), [0.0]]),
            }
        )
    for fi, u, ue, _label in terms:
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda z, fi=fi, u=u, ue=ue: float(u.value(matrix_of(z)[fi])) / ue - share,
                "jac": lambda z, fi=fi, u=u, ue=ue: np.concatenate(
                    [_one_family_grad(u.gradient(matrix_of(z)[fi]) / ue, fi, n, goods), [0.0]]
                ),
            }
        )

    bounds = [(0.0, float(e[g])) for _ in range(n) for g in range(goods)] + [(None, None)]
    maxiter = min(500, cfg.iterations)

    starts = _start_points(econ, cfg.restarts)
    if warm_start is not None:
        starts = [warm_start] + starts
    best = None
    failures = []
    for seed, start in enumerate(starts):
        t0 = min(objectives[j].value(start) for j in active)
        z0 = np.concatenate([start.ravel(), [t0]])
        result = minimize(
            lambda z: -z[-1],
            z0,
            jac=lambda z: np.concatenate([np.zeros(size), [-1.0]]),
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"maxiter": maxiter, "ftol": 1e-14},
        )
        matrix = np.maximum(matrix_of(result.x), 0.0)
        # exact re-evaluation; neither the epigraph variable nor the solver
        # status is trusted (SLSQP reports linesearch failures at points that
        # are feasible and essentially optimal)
        exact = min(objectives[j].value(matrix) for j in active)
        feasible = abs(matrix.sum(axis=0) - e).max() < 1e-7
        frozen_ok = all(objectives[j].value(matrix) >= floor - 10 * cfg.tol for j, floor in frozen.items())
        fs_ok = all(float(u.value(matrix[fi])) / ue - share >= -10 * cfg.tol for fi, u, ue, _ in terms)
        if not (feasible and frozen_ok and fs_ok):
            failures.append({"seed": seed, "status": result.message, "feasible": feasible})
            continue
        if best is None or exact > best[1] + 1e-15:
            best = (matrix, exact, seed)
    if best is None:
        raise SolverDiagnosticsError(
            "maximin found no feasible point from any start", {"failures": failures}
        )
    return best[0], best[1], {"seed": best[2], "failures": failures}


def _one_family_grad(block: np.ndarray, fi: int, n: int, goods: int) -> np.ndarray:
    g = np.zeros(n * goods)
    g[fi * goods : (fi + 1) * goods] = block
    return g


# ---------------------------------------------------------------------------
# Public solvers
# ---------------------------------------------------------------------------

def maximin(
    econ: Economy,
    objectives: ObjectiveSet,
    frozen: Optional[Dict[int, float]] = None,
    region: Region = Region.ALL,
    cfg: SolveConfig = SolveConfig(),
) -> Tuple[Allocation, float]:
    """Maximize the smallest non-frozen objective over feasible allocations.

    Frozen objectives (index -> value) are held at or above value - tol.
    The best of the seeded restarts wins; ties break to the lowest seed.
    """
    objs = build_objectives(econ, objectives)
    frozen = dict(frozen or {})
    active = [j for j in range(len(objs)) if j not in frozen]
    if not active:
        raise ValidationError("maximin requires at least one non-frozen objective")
    matrix, value, _diag = _solve_epigraph(
        econ, objs, active, frozen, region == Region.INDIVIDUAL_FS_ONLY, cfg
    )
    return Allocation.from_matrix(econ, matrix), value


@dataclass(frozen=True)
class LeximinResult:
    allocation: Allocation
    objective_values: Tuple[float, ...]
    objective_labels: Tuple[str, ...]
    stages: Tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "allocation": self.allocation.to_dict(),
            "objectives": dict(zip(self.objective_labels, self.objective_values)),
            "stages": list(self.stages),
        }


def leximin(
    econ: Economy,
    objectives: ObjectiveSet,
    region: Region = Region.ALL,
    cfg: SolveConfig = SolveConfig(),
    warm_start: Optional[Allocation] = None,
) -> LeximinResult:
    """Iterated maximin with saturation probes: maximize the smallest free
    objective, then freeze exactly those objectives that cannot rise above
    the stage value while the others keep it, and continue until all are
    frozen.  (Sitting at the stage value is not enough to be frozen: on flat
    regions many objectives touch the minimum yet can still improve.)"""
    objs = build_objectives(econ, objectives)
    fs_region = region == Region.INDIVIDUAL_FS_ONLY
    warm = warm_start.matrix(econ) if warm_start is not None else None
    probe_cfg = SolveConfig(iterations=cfg.iterations, tol=cfg.tol, restarts=2)
    frozen: Dict[int, float] = {}
    stages = []
    allocation = None
    while len(frozen) < len(objs):
        active = [j for j in range(len(objs)) if j not in frozen]
        matrix, value, diag = _solve_epigraph(
            econ, objs, active, frozen, fs_region, cfg, warm_start=warm
        )
        warm = matrix
        allocation = matrix
        if len(active) == 1:
            newly = active
        else:
            newly = []
            for j in active:
                # floors one tol above the stage value so the built-in slack
                # cannot be spent on fake gains for the probed objective
                holds = dict(frozen)
                holds.update({k: value + cfg.tol for k in active if k != j})
                try:
                    _, ceiling, _ = _solve_epigraph(
                        econ, objs, [j], holds, fs_region, probe_cfg, warm_start=matrix
                    )
                except SolverDiagnosticsError:
                    ceiling = objs[j].value(matrix)
                if ceiling <= value + 10 * cfg.tol:
                    newly.append(j)
            if not newly:  # numerically degenerate stage; freeze the argmin
                newly = [min(active, key=lambda j: objs[j].value(matrix))]
        for j in newly:
            frozen[j] = value
        stages.append(
            {
                "stage": len(stages),
                "value": value,
                "frozen": [objs[j].label for j in newly],
                "restart_seed": diag["seed"],
            }
        )
    values = tuple(objs[j].value(allocation) for j in range(len(objs)))
    return LeximinResult(
        allocation=Allocation.from_matrix(econ, allocation),
        objective_values=values,
        objective_labels=tuple(o.label for o in objs),
        stages=tuple(stages),
    )


def fs_welfare_max(econ: Economy, cfg: SolveConfig = SolveConfig()) -> Allocation:
    """Maximize the sum of all individual utilities over the fair-share
    region (every member at least as well off as at e/|F|)."""
    n, goods = econ.n_families, econ.goods_count
    size = n * goods
    e = econ.endowment
    terms = _normalized_terms(econ)
    share = 1.0 / n

    def welfare(matrix):
        return sum(float(u.value(matrix[fi])) for fi, u, _ue, _l in terms)

    def welfare_grad(matrix):
        g = np.zeros_like(matrix)
        for fi, u, _ue, _l in terms:
            g[fi] += u.gradient(matrix[fi])
        return g

    constraints = []
    for g in range(goods):
        jac = np.zeros(size)
        jac[g::goods] = 1.0
        constraints.append(
            {
                "type": "eq",
                "fun": lambda z, g=g: z.reshape(n, goods)[:, g].sum() - e[g],
                "jac": lambda z, jac=jac: jac,
            }
        )
    for fi, u, ue, _label in terms:
        constraints.append(
            {
                "type": "ineq",
                "fun": lambda z, fi=fi, u=u, ue=ue: float(u.value(z.reshape(n, goods)[fi])) / ue - share,
                "jac": lambda z, fi=fi, u=u, ue=ue: _one_family_grad(
                    u.gradient(z.reshape(n, goods)[fi]) / ue, fi, n, goods
                ),
            }
        )
    bounds = [(0.0, float(e[g])) for _ in range(n) for g in range(goods)]

    best = None
    failures = []
    for seed, start in enumerate(_start_points(econ, cfg.restarts)):
        result = minimize(
            lambda z: -welfare(z.reshape(n, goods)),
            start.ravel(),
            jac=lambda z: -welfare_grad(z.reshape(n, goods)).ravel(),
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"maxiter": min(500, cfg.iterations), "ftol": 1e-14},
        )
        matrix = np.maximum(result.x.reshape(n, goods), 0.0)
        feasible = abs(matrix.sum(axis=0) - e).max() < 1e-7
        fs_ok = all(float(u.value(matrix[fi])) / ue - share >= -1e-6 for fi, u, ue, _ in terms)
        if not (result.success and feasible and fs_ok):
            failures.append({"seed": seed, "status": result.message})
            continue
        value = welfare(matrix)
        if best is None or value > best[1] + 1e-15:
            best = (matrix, value, seed)
    if best is None:
        raise SolverDiagnosticsError(
            "fair-share welfare maximization failed to converge", {"failures": failures}
        )
    return Allocation.from_matrix(econ, best[0])


@dataclass(frozen=True)
class FamilyEEResult:
    """Equal-aggregate egalitarian construction output."""

    allocation: Allocation
    reference: np.ndarray
    common_value: float  # shared geometric-mean objective value
    scale: float  # reference = scale * endowment

    def to_dict(self) -> dict:
        return {
            "allocation": self.allocation.to_dict(),
            "V": self.common_value,
            "t": self.scale,
            "reference": self.reference.tolist(),
        }


def family_ee_solve(econ: Economy, cfg: SolveConfig = SolveConfig()) -> FamilyEEResult:
    """Leximin over per-family geometric means of clipped normalized member
    utilities, restricted to the fair-share region.

    The common final objective value V places the reference bundle at
    (V + 1/|F|) * e: families whose members all sit at V are indifferent to
    it, and any other family has members on both sides, hence cannot rank.
    When V is indistinguishable from 0 the equal split itself is returned
    (no allocation gives every family a positive product, which for strictly
    convex members means the equal split is already efficient).
    """
    # The geometric mean has no gradient signal where a member sits exactly
    # at fair share (the equal split included), so the stage is warm-started
    # from the member-level leximin point, whose utilities are all strictly
    # positive whenever any strictly fair-share-dominating allocation exists.
    warm = leximin(econ, ObjectiveSet.INDIVIDUAL_NORMALIZED, Region.INDIVIDUAL_FS_ONLY, cfg)
    result = leximin(
        econ,
        ObjectiveSet.FAMILY_GEOMETRIC_MEAN,
        Region.INDIVIDUAL_FS_ONLY,
        cfg,
        warm_start=warm.allocation,
    )
    values = np.asarray(result.objective_values)
    common = float(values.min())
    if common <= cfg.tol:
        share = fair_share(econ)
        equal = Allocation({fid: share.copy() for fid in econ.family_ids})
        return FamilyEEResult(
            allocation=equal, reference=share.copy(), common_value=0.0, scale=1.0 / econ.n_families
        )
    spread = float(values.max() - values.min())
    if spread > cfg.tol:
        raise SolverDiagnosticsError(
            "family objectives did not equalize", {"values": values.tolist(), "spread": spread}
        )
    scale = common + 1.0 / econ.n_families
    reference = scale * econ.endowment
    return FamilyEEResult(
        allocation=result.allocation, reference=reference, common_value=common, scale=scale
    )


# ---------------------------------------------------------------------------
# Joint-violation certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapCertificate:
    """Grid evidence that a set of properties cannot hold at once: the
    smallest joint violation over every exhaustive grid allocation."""

    grid_n: int
    min_joint_violation: float
    argmin: Allocation
    history: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        grids = [g for g, _ in self.history]
        if grids != sorted(grids):
            raise ValidationError("certificate history must be ordered by grid resolution")

    def to_dict(self) -> dict:
        return {
            "grid_n": self.grid_n,
            "min_joint_violation": self.min_joint_violation,
            "argmin": self.argmin.to_dict(),
            "history": [{"grid_n": g, "min_joint_violation": v} for g, v in self.history],
        }


def _normalize_criteria(criteria) -> Tuple[List[FairnessCriterion], bool]:
    fairness: List[FairnessCriterion] = []
    include_po = False
    for c in criteria:
        if c == PARETO_OPTIMALITY:
            include_po = True
        elif isinstance(c, FairnessCriterion):
            fairness.append(c)
        else:
            raise ValidationError(f"unknown certificate criterion {c!r}")
    if not fairness and not include_po:
        raise ValidationError("certificate needs at least one criterion")
    return fairness, include_po


def _joint_violation_batch(
    econ: Economy,
    matrices: np.ndarray,
    fairness: List[FairnessCriterion],
    include_po: bool,
    eps: float,
) -> np.ndarray:
    """Joint violation for a batch of exhaustive allocations, shape (B,).

    The efficiency component is the MRS-range gap with coordinates clamped
    at a small floor, which extends the interior test to the boundary (axis
    bundles get extreme MRS values and register as large gaps).
    """
    batch = matrices.shape[0]
    share = fair_share(econ)
    members = list(econ.members())
    own = {m.id: m.utility.value(matrices[:, fi, :]) for fi, _f, m in members}
    out = np.zeros(batch)

    for criterion in fairness:
        if criterion == FairnessCriterion.INDIVIDUAL_NE:
            gap = np.zeros(batch)
            for fi, _fam, m in members:
                for fj in range(econ.n_families):
                    if fj == fi:
                        continue
                    gap = np.maximum(gap, m.utility.value(matrices[:, fj, :]) - own[m.id])
            out = np.maximum(out, gap)
        elif criterion == FairnessCriterion.INDIVIDUAL_FS:
            gap = np.zeros(batch)
            for _fi, _fam, m in members:
                gap = np.maximum(gap, float(m.utility.value(share)) - own[m.id])
            out = np.maximum(out, gap)
        elif criterion == FairnessCriterion.FAMILY_NE:
            gap = np.zeros(batch)
            for fi, fam in enumerate(econ.families):
                for fj in range(econ.n_families):
                    if fj == fi:
                        continue
                    deltas = np.stack(
                        [m.utility.value(matrices[:, fj, :]) - own[m.id] for m in fam.members]
                    )
                    strict = (deltas.min(axis=0) >= -eps) & (deltas.max(axis=0) > eps)
                    gap = np.maximum(gap, np.where(strict, deltas.max(axis=0), 0.0))
            out = np.maximum(out, gap)
        elif criterion == FairnessCriterion.FAMILY_FS:
            gap = np.zeros(batch)
            for fi, fam in enumerate(econ.families):
                deltas = np.stack([float(m.utility.value(share)) - own[m.id] for m in fam.members])
                strict = (deltas.min(axis=0) >= -eps) & (deltas.max(axis=0) > eps)
                gap = np.maximum(gap, np.where(strict, deltas.max(axis=0), 0.0))
            out = np.maximum(out, gap)
        elif criterion == FairnessCriterion.INDIVIDUAL_EE:
            # best ray reference minimizes max_i |u_i(x) - t*u_i(e)|; by
            # degree-one homogeneity this is a weighted one-center problem on
            # the line with the closed form max over member pairs.
            weights = np.array([float(m.utility.value(econ.endowment)) for _fi, _f, m in members])
            ts = np.stack([own[m.id] for _fi, _f, m in members]) / weights[:, None]
            gap = np.zeros(batch)
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    bi, bj = weights[i], weights[j]
                    gap = np.maximum(gap, bi * bj * np.abs(ts[i] - ts[j]) / (bi + bj))
            out = np.maximum(out, gap)
        elif criterion == FairnessCriterion.FAMILY_EE:
            # sampled ray references; the violation is the least over the
            # sampled t of the worst strict family preference either way
            t_grid = np.linspace(0.0, 1.0, 65)
            best = np.full(batch, np.inf)
            weights = {m.id: float(m.utility.value(econ.endowment)) for _fi, _f, m in members}
            for t in t_grid:
                worst = np.zeros(batch)
                for fi, fam in enumerate(econ.families):
                    deltas = np.stack([own[m.id] - t * weights[m.id] for m in fam.members])
                    first = (deltas.min(axis=0) >= -eps) & (deltas.max(axis=0) > eps)
                    second = (deltas.max(axis=0) <= eps) & (deltas.min(axis=0) < -eps)
                    gap = np.where(first, deltas.max(axis=0), 0.0)
                    gap = np.where(second, -deltas.min(axis=0), gap)
                    worst = np.maximum(worst, gap)
                best = np.minimum(best, worst)
            out = np.maximum(out, best)
        else:  # pragma: no cover - exhaustive
            raise ValidationError(f"unsupported certificate criterion {criterion!r}")

    if include_po:
        if econ.goods_count != 2:
            raise ValidationError("the efficiency component requires exactly two goods")
        lows = np.full(batch, -np.inf)
        highs = np.full(batch, np.inf)
        for fi, fam in enumerate(econ.families):
            y = np.maximum(matrices[:, fi, 0], _MRS_FLOOR)
            z = np.maximum(matrices[:, fi, 1], _MRS_FLOOR)
            fam_low = np.full(batch, np.inf)
            fam_high = np.full(batch, -np.inf)
            for m in fam.members:
                values = mrs_values_batch(m.utility, y, z)
                fam_low = np.minimum(fam_low, values)
                fam_high = np.maximum(fam_high, values)
            lows = np.maximum(lows, fam_low)
            highs = np.minimum(highs, fam_high)
        out = np.maximum(out, np.maximum(lows - highs, 0.0))

    return out


def joint_violation(econ: Economy, x: Allocation, criteria, eps: float = 1e-6) -> float:
    """Joint violation of the requested criteria at a single allocation."""
    fairness, include_po = _normalize_criteria(criteria)
    matrix = x.matrix(econ)[None, :, :]
    return float(_joint_violation_batch(econ, matrix, fairness, include_po, eps)[0])


def certify_nonexistence(
    econ: Economy,
    criteria,
    grid_n: int = 64,
    eps: float = 1e-6,
    budget: int = 600_000_000,
) -> GapCertificate:
    """Sweep every exhaustive grid allocation at grid_n and 2*grid_n and
    record the smallest joint violation of the requested criteria.

    A strictly positive minimum that is stable under refinement is grid
    evidence (not proof) that the criteria cannot be satisfied together.
    """
    fairness, include_po = _normalize_criteria(criteria)
    if econ.goods_count != 2 and include_po:
        raise ValidationError("efficiency certificates are implemented for two-good economies only")
    history = []
    argmin_alloc = None
    argmin_value = None
    for resolution in (grid_n, 2 * grid_n):
        count = (resolution + 1) ** (econ.goods_count * (econ.n_families - 1))
        if count > budget:
            raise GridBudgetError(f"certificate grid of {count} allocations exceeds budget {budget}")
        best = np.inf
        best_matrix = None
        for matrices in iter_grid_allocations(econ, resolution, chunk=400_000):
            violations = _joint_violation_batch(econ, matrices, fairness, include_po, eps)
            i = int(np.argmin(violations))
            if violations[i] < best:
                best = float(violations[i])
                best_matrix = matrices[i].copy()
        history.append((resolution, best))
        if resolution == grid_n:
            argmin_value = best
            argmin_alloc = best_matrix
    return GapCertificate(
        grid_n=grid_n,
        min_joint_violation=argmin_value,
        argmin=Allocation.from_matrix(econ, argmin_alloc),
        history=tuple(history),
    )
