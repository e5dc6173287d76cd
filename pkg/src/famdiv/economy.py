"""Economy model: goods, families, parametric member utilities, feasibility.

An economy holds a strictly positive endowment of divisible goods and an
ordered list of families; every member of a family consumes the family's
bundle, but members keep their own utility functions.  Three utility
families are supported (Cobb-Douglas, linear, CES), all strictly monotonic
and homogeneous of degree one on the non-negative orthant.

All objects are immutable values after construction; every function here is
pure and safe to call concurrently on shared economies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np


class EconomyError(ValueError):
    """Base class for economy construction and parsing failures."""


class ParseError(EconomyError):
    """Raised when an economy/allocation document is malformed."""


class ValidationError(EconomyError):
    """Raised when a structurally valid document violates an invariant."""


#: Default slack when checking hand-written allocations for feasibility.
FEASIBILITY_TOL = 1e-9
#: Looser slack used for solver-produced allocations.
SOLVER_FEASIBILITY_TOL = 1e-6

_GRAD_FLOOR = 1e-12  # coordinate floor for gradients that blow up at 0
_WEIGHT_SUM_TOL = 1e-6


def _readonly(values, *, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a flat vector")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CobbDouglas:
    """u(b) = prod_g b_g^w_g with positive weights summing to one."""

    weights: np.ndarray

    kind = "cobb_douglas"

    def __post_init__(self):
        w = _readonly(self.weights, name="weights")
        if np.any(w <= 0.0) or np.any(w >= 1.0):
            raise ValidationError("cobb_douglas weights must lie in (0, 1)")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValidationError("cobb_douglas weights must sum to 1")
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def value(self, bundle) -> Union[float, np.ndarray]:
        b = np.asarray(bundle, dtype=float)
        # 0**w == 0 for w > 0, so the boundary extension by 0 is automatic.
        out = np.prod(np.power(b, self.weights), axis=-1)
        return float(out) if out.ndim == 0 else out

    def gradient(self, bundle) -> np.ndarray:
        b = np.maximum(np.asarray(bundle, dtype=float), _GRAD_FLOOR)
        u = np.prod(np.power(b, self.weights), axis=-1)
        return self.weights * u[..., None] / b if b.ndim > 1 else self.weights * u / b

    def mrs(self, bundle) -> float:
        y, z = float(bundle[0]), float(bundle[1])
        return (self.weights[0] / self.weights[1]) * (z / y)

    def demand(self, prices: np.ndarray, budget: float) -> np.ndarray:
        return budget * self.weights / np.asarray(prices, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist()}


@dataclass(frozen=True)
class Linear:
    """u(b) = sum_g c_g b_g with strictly positive coefficients."""

    coefficients: np.ndarray

    kind = "linear"

    def __post_init__(self):
        c = _readonly(self.coefficients, name="coefficients")
        if np.any(c <= 0.0):
            raise ValidationError("linear coefficients must be strictly positive")
        object.__setattr__(self, "coefficients", c)

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    def value(self, bundle) -> Union[float, np.ndarray]:
        out = np.asarray(bundle, dtype=float) @ self.coefficients
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, bundle) -> np.ndarray:
        b = np.asarray(bundle, dtype=float)
        return np.broadcast_to(self.coefficients, b.shape).copy()

    def mrs(self, bundle) -> float:
        return float(self.coefficients[0] / self.coefficients[1])

    def demand(self, prices: np.ndarray, budget: float) -> np.ndarray:
        # Spend everything on the best value-per-unit good; ties break to the
        # lowest good index so the selection is deterministic.
        p = np.asarray(prices, dtype=float)
        g = int(np.argmax(self.coefficients / p))
        x = np.zeros_like(p)
        x[g] = budget / p[g]
        return x

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coefficients": self.coefficients.tolist()}


@dataclass(frozen=True)
class CES:
    """u(b) = (sum_g w_g b_g^rho)^(1/rho) with rho < 1, rho != 0."""

    weights: np.ndarray
    rho: float

    kind = "ces"

    def __post_init__(self):
        w = _readonly(self.weights, name="weights")
        if np.any(w <= 0.0) or np.any(w >= 1.0):
            raise ValidationError("ces weights must lie in (0, 1)")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValidationError("ces weights must sum to 1")
        if not (self.rho < 1.0) or self.rho == 0.0:
            raise ValidationError("ces rho must satisfy rho < 1 and rho != 0")
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def value(self, bundle) -> Union[float, np.ndarray]:
        b = np.asarray(bundle, dtype=float)
        if self.rho > 0.0:
            out = np.power(np.sum(self.weights * np.power(b, self.rho), axis=-1), 1.0 / self.rho)
        else:
            # rho < 0: b_g^rho diverges at 0; extend continuously by 0.
            on_boundary = np.any(b <= 0.0, axis=-1)
            safe = np.where(b <= 0.0, 1.0, b)
            inner = np.sum(self.weights * np.power(safe, self.rho), axis=-1)
            out = np.where(on_boundary, 0.0, np.power(inner, 1.0 / self.rho))
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, bundle) -> np.ndarray:
        b = np.maximum(np.asarray(bundle, dtype=float), _GRAD_FLOOR)
        u = np.power(np.sum(self.weights * np.power(b, self.rho), axis=-1), 1.0 / self.rho)
        scale = np.power(u, 1.0 - self.rho)
        term = self.weights * np.power(b, self.rho - 1.0)
        return scale[..., None] * term if b.ndim > 1 else scale * term

    def mrs(self, bundle) -> float:
        y, z = float(bundle[0]), float(bundle[1])
        return float((self.weights[0] / self.weights[1]) * (y / z) ** (self.rho - 1.0))

    def demand(self, prices: np.ndarray, budget: float) -> np.ndarray:
        p = np.asarray(prices, dtype=float)
        sigma = 1.0 / (1.0 - self.rho)
        shares = np.power(self.weights / p, sigma)
        return budget * shares / np.sum(p * shares)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist(), "rho": self.rho}


UtilityFunction = Union[CobbDouglas, Linear, CES]


@dataclass(frozen=True)
class Individual:
    id: str
    utility: UtilityFunction


@dataclass(frozen=True)
class Family:
    id: str
    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValidationError(f"family {self.id!r} must have at least one member")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Economy:
    goods_count: int
    endowment: np.ndarray
    families: tuple

    def __post_init__(self):
        e = _readonly(self.endowment, name="endowment")
        if self.goods_count < 1:
            raise ValidationError("goods count must be a positive integer")
        if e.shape[0] != self.goods_count:
            raise ValidationError("endowment length must match the goods count")
        if np.any(e <= 0.0):
            raise ValidationError("endowment must be strictly positive")
        families = tuple(self.families)
        if not families:
            raise ValidationError("economy must have at least one family")
        seen_families, seen_individuals = set(), set()
        for fam in families:
            if fam.id in seen_families:
                raise ValidationError(f"duplicate family id {fam.id!r}")
            seen_families.add(fam.id)
            for member in fam.members:
                if member.id in seen_individuals:
                    raise ValidationError(f"duplicate individual id {member.id!r}")
                seen_individuals.add(member.id)
                if member.utility.dim != self.goods_count:
                    raise ValidationError(
                        f"utility of {member.id!r} has {member.utility.dim} goods, expected {self.goods_count}"
                    )
        object.__setattr__(self, "endowment", e)
        object.__setattr__(self, "families", families)
        object.__setattr__(self, "goods_count", int(self.goods_count))

    @property
    def n_families(self) -> int:
        return len(self.families)

    @property
    def family_ids(self) -> tuple:
        return tuple(f.id for f in self.families)

    def family(self, family_id: str) -> Family:
        for fam in self.families:
            if fam.id == family_id:
                return fam
        raise ValidationError(f"unknown family id {family_id!r}")

    def family_index(self, family_id: str) -> int:
        for i, fam in enumerate(self.families):
            if fam.id == family_id:
                return i
        raise ValidationError(f"unknown family id {family_id!r}")

    def members(self):
        """Yield (family_index, family, individual) across the economy."""
        for i, fam in enumerate(self.families):
            for member in fam.members:
                yield i, fam, member

    @property
    def n_individuals(self) -> int:
        return sum(f.size for f in self.families)

    def to_dict(self) -> dict:
        return {
            "goods": self.goods_count,
            "endowment": self.endowment.tolist(),
            "families": [
                {"id": f.id, "members": [{"id": m.id, "utility": m.utility.to_dict()} for m in f.members]}
                for f in self.families
            ],
        }


@dataclass(frozen=True)
class Allocation:
    """One bundle per family, keyed by family id; coordinates non-negative."""

    bundles: Mapping[str, np.ndarray]

    def __post_init__(self):
        fixed = {}
        for fid, bundle in self.bundles.items():
            b = _readonly(bundle, name=f"bundle for family {fid!r}")
            if np.any(b < 0.0):
                raise ValidationError(f"bundle for family {fid!r} has a negative coordinate")
            fixed[fid] = b
        object.__setattr__(self, "bundles", fixed)

    def __getitem__(self, family_id: str) -> np.ndarray:
        return self.bundles[family_id]

    def matrix(self, econ: Economy) -> np.ndarray:
        """Bundles stacked in the economy's family order, shape (F, G)."""
        try:
            return np.stack([self.bundles[fid] for fid in econ.family_ids])
        except KeyError as exc:
            raise ValidationError(f"allocation is missing family {exc.args[0]!r}") from exc

    @staticmethod
    def from_matrix(econ: Economy, matrix) -> "Allocation":
        m = np.asarray(matrix, dtype=float)
        return Allocation({fid: m[i] for i, fid in enumerate(econ.family_ids)})

    def to_dict(self) -> dict:
        return {"bundles": {fid: b.tolist() for fid, b in self.bundles.items()}}


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------

def _parse_utility(node: dict, path: str) -> UtilityFunction:
    if not isinstance(node, dict) or "kind" not in node:
        raise ParseError(f"{path}: utility must be an object with a 'kind' field")
    kind = node["kind"]
    try:
        if kind == "cobb_douglas":
            return CobbDouglas(np.asarray(node["weights"], dtype=float))
        if kind == "linear":
            return Linear(np.asarray(node["coefficients"], dtype=float))
        if kind == "ces":
            return CES(np.asarray(node["weights"], dtype=float), float(node["rho"]))
    except KeyError as exc:
        raise ParseError(f"{path}: missing utility field {exc.args[0]!r}") from exc
    raise ParseError(f"{path}: unknown utility kind {kind!r}")


def parse_economy(text: str) -> Economy:
    """Parse and validate a UTF-8 JSON economy document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("economy document must be a JSON object")
    for key in ("goods", "endowment", "families"):
        if key not in doc:
            raise ParseError(f"economy document is missing the {key!r} field")
    families = []
    for fi, fnode in enumerate(doc["families"]):
        path = f"families[{fi}]"
        if not isinstance(fnode, dict) or "id" not in fnode or "members" not in fnode:
            raise ParseError(f"{path}: family must be an object with 'id' and 'members'")
        members = []
        for mi, mnode in enumerate(fnode["members"]):
            mpath = f"{path}.members[{mi}]"
            if not isinstance(mnode, dict) or "id" not in mnode or "utility" not in mnode:
                raise ParseError(f"{mpath}: member must be an object with 'id' and 'utility'")
            members.append(Individual(id=str(mnode["id"]), utility=_parse_utility(mnode["utility"], mpath)))
        families.append(Family(id=str(fnode["id"]), members=tuple(members)))
    return Economy(goods_count=int(doc["goods"]), endowment=np.asarray(doc["endowment"], dtype=float), families=tuple(families))


def parse_allocation(text: str) -> Allocation:
    """Parse a JSON allocation document: {"bundles": {family-id: [..]}}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "bundles" not in doc:
        raise ParseError("allocation document must be an object with a 'bundles' field")
    return Allocation({str(fid): np.asarray(b, dtype=float) for fid, b in doc["bundles"].items()})


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def evaluate_utility(u: UtilityFunction, bundle) -> float:
    """Evaluate a utility function at a single bundle."""
    b = np.asarray(bundle, dtype=float)
    if b.shape != (u.dim,):
        raise ValidationError(f"bundle has {b.shape} coordinates, expected ({u.dim},)")
    return float(u.value(b))


def normalized_utility(u: UtilityFunction, bundle, econ: Economy, tol: float = 1e-12) -> float:
    """Utility on the scale where t*endowment is worth t - 1/|F|.

    Returns t - 1/|F| where t solves u(t*e) = u(bundle), found by bisection;
    the fair share e/|F| maps to 0 exactly.  All supported utilities are
    strictly increasing along the endowment ray, so the root is unique.
    """
    target = evaluate_utility(u, bundle)
    e = econ.endowment
    hi = 1.0
    while float(u.value(hi * e)) < target:
        hi *= 2.0
        if hi > 2.0 ** 60:
            raise ValidationError("utility is not monotone along the endowment ray")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if float(u.value(mid * e)) < target:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return t - 1.0 / econ.n_families


def mrs(u: UtilityFunction, bundle) -> float:
    """Marginal rate of substitution between the two goods at an interior bundle."""
    b = np.asarray(bundle, dtype=float)
    if u.dim != 2 or b.shape != (2,):
        raise ValidationError("marginal rate of substitution requires exactly two goods")
    if not isinstance(u, Linear) and np.any(b <= 0.0):
        raise ValidationError("marginal rate of substitution is undefined on the boundary")
    return float(u.mrs(b))


def fair_share(econ: Economy) -> np.ndarray:
    """The per-family average bundle e/|F|."""
    share = econ.endowment / econ.n_families
    share.setflags(write=False)
    return share


def check_feasible(econ: Economy, allocation: Allocation, tol: float = FEASIBILITY_TOL):
    """Check coordinate-wise sum(bundles) <= endowment + tol.

    Returns (ok, witness) where witness is the index of the first violated
    good, or None.  The allocation must reference exactly the economy's
    families.
    """
    extra = set(allocation.bundles) - set(econ.family_ids)
    if extra:
        raise ValidationError(f"unknown family id {sorted(extra)[0]!r}")
    total = allocation.matrix(econ).sum(axis=0)
    over = total > econ.endowment + tol
    if np.any(over):
        return False, int(np.argmax(over))
    return True, None
