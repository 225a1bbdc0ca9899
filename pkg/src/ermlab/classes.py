"""Finite probability spaces, function classes, star hulls and Bernstein certificates.

Every space here has finitely many atoms, so expectations, second moments and
suprema over explicit classes are computed exactly rather than approximated.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionError,
    EmptyClassError,
    GridError,
    InvalidMeasureError,
    PreconditionError,
    UnsupportedOperationError,
)

TOL = 1e-12

# default scaling grid for empirical slabs of explicit hulls
SLAB_SCALES = np.geomspace(1e-3, 1.0, 64)


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteMeasure:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidMeasureError("probs must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InvalidMeasureError("probs must be finite and nonnegative")
        if abs(math.fsum(probs) - 1.0) > TOL:
            raise InvalidMeasureError(f"probs sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def atom_count(self) -> int:
        return self.probs.size

    def __eq__(self, other):
        return isinstance(other, DiscreteMeasure) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


def make_measure(weights: Sequence[float]) -> DiscreteMeasure:
    """Normalize nonnegative weights into a probability measure."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidMeasureError("weights must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(w)):
        raise InvalidMeasureError("weights must be finite")
    if np.any(w < 0):
        raise InvalidMeasureError("weights must be nonnegative")
    total = math.fsum(w)
    if total <= 0:
        raise InvalidMeasureError("at least one weight must be positive")
    probs = w / total
    # push the rounding residue onto the largest atom so the sum is 1 to within an ulp
    j = int(np.argmax(probs))
    probs[j] += 1.0 - math.fsum(probs)
    return DiscreteMeasure(probs)


@dataclass(frozen=True)
class FuncVec:
    values: np.ndarray
    sup_bound: float = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise DimensionError("a function is a 1-d vector of atom values")
        if not np.all(np.isfinite(vals)):
            raise ValueError("function values must be finite")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "sup_bound", float(np.max(np.abs(vals))) if vals.size else 0.0)

    @property
    def atom_count(self) -> int:
        return self.values.size

    def __mul__(self, a):
        return FuncVec(a * self.values)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, FuncVec) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


def _as_values(f) -> np.ndarray:
    return f.values if isinstance(f, FuncVec) else np.asarray(f, dtype=float)


def _check_dims(f: np.ndarray, m: int):
    if f.shape[-1] != m:
        raise DimensionError(f"function has {f.shape[-1]} atoms, measure has {m}")


def expectation(f, P: DiscreteMeasure) -> float:
    """Pf, summed with compensation."""
    v = _as_values(f)
    _check_dims(v, P.atom_count)
    return math.fsum(P.probs * v)


def moment2(f, P: DiscreteMeasure) -> float:
    v = _as_values(f)
    _check_dims(v, P.atom_count)
    return math.fsum(P.probs * v * v)


def expectations(matrix: np.ndarray, P: DiscreteMeasure) -> np.ndarray:
    """Row-wise Pf for a (k, m) matrix of member values."""
    _check_dims(matrix, P.atom_count)
    return np.array([math.fsum(P.probs * row) for row in matrix], dtype=float)


class FunctionClass:
    """A finite, explicitly listed class of functions on a common atom set.

    Members are stored as rows of a read-only ``(k, m)`` matrix.
    """

    def __init__(self, members, label: str = ""):
        rows = [_as_values(f) for f in members] if not isinstance(members, np.ndarray) else members
        matrix = np.array(rows, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise EmptyClassError("a function class needs at least one member")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("function values must be finite")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.label = label

    @property
    def members(self) -> tuple[FuncVec, ...]:
        return tuple(FuncVec(row) for row in self.matrix)

    @property
    def atom_count(self) -> int:
        return self.matrix.shape[1]

    @property
    def sup_bound(self) -> float:
        return float(np.max(np.abs(self.matrix)))

    def __len__(self):
        return self.matrix.shape[0]

    def __getitem__(self, i) -> FuncVec:
        return FuncVec(self.matrix[i])

    def __repr__(self):
        return f"FunctionClass({self.label!r}, members={len(self)}, atoms={self.atom_count})"


class Representatives(NamedTuple):
    """A per-sample reduction of an implicit family.

    ``probs[j]`` is P of representative ``j``; ``emp[s, j]`` its empirical
    mean on sample ``s``; ``labels[j]`` names how to rebuild it from counts.
    Within each group of equal ``probs`` the reduction keeps the members of
    smallest and largest empirical mean, which is enough for every supremum
    and minimization this package takes over a star hull.
    """

    probs: np.ndarray
    emp: np.ndarray
    labels: tuple


class ClassOracle(abc.ABC):
    """Access to a function family too large to list.

    Implementations answer queries from per-atom sample counts.  The three
    capabilities downstream code needs are linear minimization, level
    suprema, and a finite witness set for Bernstein checks.
    """

    measure: DiscreteMeasure

    @property
    def atom_count(self) -> int:
        return self.measure.atom_count

    @property
    @abc.abstractmethod
    def sup_bound(self) -> float: ...

    @abc.abstractmethod
    def representatives(self, counts: np.ndarray) -> Representatives:
        """Reduce the family on a batch of ``(K, m)`` count vectors."""

    @abc.abstractmethod
    def resolve(self, label, counts: np.ndarray) -> tuple[object, FuncVec]:
        """Materialize the representative ``label`` for one count vector."""

    @abc.abstractmethod
    def witness_members(self) -> FunctionClass:
        """Base members whose Bernstein ratios cover the whole family."""

    def enumerate_base(self) -> FunctionClass:
        raise UnsupportedOperationError(f"{type(self).__name__} cannot enumerate its base")

    def hull_contains(self, g, tol: float = TOL) -> bool:
        raise UnsupportedOperationError(f"{type(self).__name__} has no membership test")

    def linear_minimize(self, counts: np.ndarray):
        """Base member with the smallest empirical mean: (member id, function, mean)."""
        counts = np.asarray(counts)
        reps = self.representatives(counts[None, :])
        j = int(np.argmin(reps.emp[0]))
        member_id, f = self.resolve(reps.labels[j], counts)
        return member_id, f, float(reps.emp[0, j])

    def slab_sup(self, counts: np.ndarray, r: float) -> float:
        """sup over hull members with Pf = r of (Pf - P_n f); 0 on an empty level."""
        reps = self.representatives(np.asarray(counts)[None, :])
        return float(level_sup(reps.probs, reps.emp, np.array([r]))[0, 0])


class StarHull:
    """The set {a f : f in base, 0 <= a <= 1}, handled through scaling formulas."""

    def __init__(self, base: FunctionClass | ClassOracle):
        if isinstance(base, FunctionClass) and len(base) == 0:
            raise EmptyClassError("hull of an empty class")
        self.base = base

    @property
    def explicit(self) -> bool:
        return isinstance(self.base, FunctionClass)

    @property
    def atom_count(self) -> int:
        return self.base.atom_count

    @property
    def sup_bound(self) -> float:
        return self.base.sup_bound

    @property
    def label(self) -> str:
        return f"hull({getattr(self.base, 'label', type(self.base).__name__)})"

    def contains(self, g, tol: float = TOL) -> bool:
        g = _as_values(g)
        if g.shape != (self.atom_count,):
            raise DimensionError("membership probe has the wrong number of atoms")
        if np.max(np.abs(g)) <= tol:
            return True
        if not self.explicit:
            return self.base.hull_contains(g, tol)
        for f in self.base.matrix:
            ff = float(f @ f)
            if ff == 0.0:
                continue
            a = float(g @ f) / ff
            if -tol <= a <= 1 + tol and np.max(np.abs(g - a * f)) <= tol:
                return True
        return False

    def __repr__(self):
        return f"StarHull({self.base!r})"


def star_hull(F: FunctionClass | ClassOracle) -> StarHull:
    return StarHull(F)


@dataclass(frozen=True)
class SubClass:
    """A finite selection of (possibly scaled) members of a class or hull."""

    values: np.ndarray
    member_ids: tuple
    scales: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    @property
    def empty(self) -> bool:
        return len(self) == 0

    @classmethod
    def empty_like(cls, m: int) -> "SubClass":
        return cls(_frozen(np.zeros((0, m))), (), _frozen(np.zeros(0)))


def _base_matrix(F, P: DiscreteMeasure | None = None) -> tuple[np.ndarray, bool]:
    if isinstance(F, StarHull):
        if not F.explicit:
            raise UnsupportedOperationError("operation needs an explicit base class")
        return F.base.matrix, True
    if isinstance(F, FunctionClass):
        return F.matrix, False
    raise TypeError(f"expected FunctionClass or StarHull, got {type(F).__name__}")


def level_sup(probs: np.ndarray, emp: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Per-sample sup of (Pg - P_n g) over hull members g with Pg = r.

    For base f with Pf >= r the member (r/Pf) f has deviation
    r (1 - P_n f / Pf); the level is empty (value 0) when no base member
    reaches r.  Returns a ``(K, len(grid))`` array.
    """
    probs = np.asarray(probs, dtype=float)
    emp = np.atleast_2d(emp)
    grid = np.asarray(grid, dtype=float)
    pos = probs > 0
    if not np.any(pos):
        return np.zeros((emp.shape[0], grid.size))
    p = probs[pos]
    u = 1.0 - emp[:, pos] / p
    order = np.argsort(-p, kind="stable")
    p_sorted = p[order]
    best = np.maximum.accumulate(u[:, order], axis=1)
    # number of base members with Pf >= r, with relative slack against rounding
    reach = np.searchsorted(-p_sorted, -grid * (1 - 1e-12), side="right")
    out = np.zeros((emp.shape[0], grid.size))
    hit = reach > 0
    out[:, hit] = grid[hit] * best[:, reach[hit] - 1]
    return out


def level_set(F: StarHull | FunctionClass, r: float, P: DiscreteMeasure, band: float = 0.05) -> SubClass:
    """Members with Pf = r.

    Hulls use exact levels by rescaling base members with Pf >= r.  Explicit
    classes, whose exact levels are generically empty, use the band
    ``|Pf - r| <= band * r``.
    """
    if r < 0:
        raise GridError("level must be nonnegative")
    if isinstance(F, StarHull) and not F.explicit:
        base = F.base.enumerate_base()
        F = StarHull(base)
    matrix, hull = _base_matrix(F)
    pf = expectations(matrix, P)
    if hull:
        if r == 0:
            return SubClass(_frozen(np.zeros((1, matrix.shape[1]))), (None,), _frozen([0.0]))
        idx = np.flatnonzero(pf >= r * (1 - 1e-12))
        scales = r / pf[idx]
        return SubClass(_frozen(matrix[idx] * scales[:, None]), tuple(int(i) for i in idx), _frozen(scales))
    h = band * r
    idx = np.flatnonzero(np.abs(pf - r) <= h + TOL)
    return SubClass(_frozen(matrix[idx]), tuple(int(i) for i in idx), _frozen(np.ones(idx.size)))


def sublevel_class(F: FunctionClass, P: DiscreteMeasure, delta: float) -> FunctionClass:
    """Near-minimizers {f : Pf <= inf Pf + delta}."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    pf = expectations(F.matrix, P)
    keep = pf <= pf.min() + delta + TOL
    return FunctionClass(F.matrix[keep], label=f"{F.label}(delta={delta:g})")


def empirical_slab(F, sample, c1: float, c2: float, r: float, scales=None) -> SubClass:
    """Members with c1 r <= P_n f <= c2 r.

    For explicit hulls the scaling a runs over ``scales`` (64 log-spaced
    values in (0, 1] by default), since P_n(a f) is not monotone in a
    across sign-changing members.
    """
    if not (0 < c1 < 1 < c2):
        raise PreconditionError("slab constants need 0 < c1 < 1 < c2")
    if r <= 0:
        raise GridError("slab level must be positive")
    matrix, hull = _base_matrix(F)
    _check_dims(matrix, sample.counts.size)
    emp = matrix @ sample.counts / sample.n
    lo, hi = c1 * r - TOL, c2 * r + TOL
    if not hull:
        idx = np.flatnonzero((emp >= lo) & (emp <= hi))
        return SubClass(_frozen(matrix[idx]), tuple(int(i) for i in idx), _frozen(np.ones(idx.size)))
    a = SLAB_SCALES if scales is None else np.asarray(scales, dtype=float)
    scaled = emp[:, None] * a[None, :]
    fi, ai = np.nonzero((scaled >= lo) & (scaled <= hi))
    vals = matrix[fi] * a[ai][:, None]
    return SubClass(_frozen(vals.reshape(-1, matrix.shape[1])), tuple(int(i) for i in fi), _frozen(a[ai]))


@dataclass(frozen=True)
class BernsteinCert:
    beta: float
    B: float
    worst_member: int | None
    satisfied: bool
    checked: int = 0

    def as_dict(self):
        return {
            "beta": self.beta,
            "B": self.B if math.isfinite(self.B) else None,
            "worst_member": self.worst_member,
            "satisfied": self.satisfied,
            "checked": self.checked,
        }


def bernstein_certificate(F, P: DiscreteMeasure, beta: float = 1.0) -> BernsteinCert:
    """Smallest B with Pf^2 <= B (Pf)^beta over the class.

    For a star hull, P(af)^2 / (P(af))^beta = a^(2-beta) Pf^2 / (Pf)^beta is
    increasing in a, so checking the base members covers every scaling.
    ``B`` is the attained supremum itself; it may be below 1.
    """
    if not (0 < beta <= 1):
        raise PreconditionError("beta must lie in (0, 1]")
    if isinstance(F, StarHull):
        matrix = F.base.matrix if F.explicit else F.base.witness_members().matrix
    elif isinstance(F, FunctionClass):
        matrix = F.matrix
    else:
        raise TypeError(f"expected FunctionClass or StarHull, got {type(F).__name__}")
    if matrix.shape[0] == 0:
        raise EmptyClassError("empty class")
    best, worst = 0.0, None
    for i, row in enumerate(matrix):
        pf, pf2 = expectation(row, P), moment2(row, P)
        if pf2 == 0.0:
            continue
        if pf <= 0:
            return BernsteinCert(beta, math.inf, i, False, matrix.shape[0])
        ratio = pf2 / pf if beta == 1 else pf2 / pf**beta
        if ratio > best:
            best, worst = ratio, i
    return BernsteinCert(beta, best, worst, True, matrix.shape[0])


@dataclass(frozen=True)
class LossSpec:
    predictions: np.ndarray
    responses: np.ndarray
    table: np.ndarray

    def __post_init__(self):
        preds = _frozen(self.predictions)
        resp = _frozen(self.responses)
        table = np.asarray(self.table, dtype=float)
        if table.shape != (preds.size, resp.size):
            raise DimensionError("loss table must be (predictions x responses)")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValueError("loss entries must be finite and nonnegative")
        object.__setattr__(self, "predictions", preds)
        object.__setattr__(self, "responses", resp)
        object.__setattr__(self, "table", _frozen(table))

    @classmethod
    def discrete(cls, labels=(0.0, 1.0)) -> "LossSpec":
        labels = np.asarray(labels, dtype=float)
        return cls(labels, labels, (labels[:, None] != labels[None, :]).astype(float))


@dataclass(frozen=True)
class JointDistribution:
    """Finite distribution of (x-atom, y-value) pairs.

    Pair ``j`` is atom ``j`` of the product space on which losses live.
    """

    x: np.ndarray
    y: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=int)
        y = np.asarray(self.y, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if not (x.shape == y.shape == p.shape) or x.ndim != 1 or x.size == 0:
            raise DimensionError("pairs must be parallel nonempty sequences")
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > TOL:
            raise InvalidMeasureError("pair probabilities must be nonnegative and sum to 1")
        if np.any(x < 0):
            raise ValueError("x atoms are nonnegative indices")
        object.__setattr__(self, "x", _frozen(x, int))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_pairs(cls, pairs) -> "JointDistribution":
        x, y, p = zip(*pairs)
        return cls(x, y, p)

    @property
    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.probs)

    @property
    def x_atoms(self) -> int:
        return int(self.x.max()) + 1


def _grid_index(values: np.ndarray, grid: np.ndarray, what: str) -> np.ndarray:
    diff = np.abs(values[..., None] - grid)
    idx = np.argmin(diff, axis=-1)
    if np.any(np.take_along_axis(diff, idx[..., None], axis=-1) > TOL):
        raise ValueError(f"{what} value off the {what} grid")
    return idx


def loss_matrix(G: FunctionClass, loss: LossSpec, joint: JointDistribution) -> np.ndarray:
    """(members x pairs) matrix of l(g(x_j), y_j)."""
    if G.atom_count < joint.x_atoms:
        raise DimensionError("predictors do not cover every x atom of the joint distribution")
    pi = _grid_index(G.matrix[:, joint.x], loss.predictions, "prediction")
    yi = _grid_index(joint.y, loss.responses, "response")
    return loss.table[pi, yi[None, :]]


class ExcessLoss(NamedTuple):
    functions: FunctionClass
    measure: DiscreteMeasure
    best_index: int
    losses: np.ndarray


def excess_loss_class(G: FunctionClass, loss: LossSpec, joint: JointDistribution) -> ExcessLoss:
    """{l_g - l_g* : g in G} on the product space, g* the lowest-index risk minimizer."""
    L = loss_matrix(G, loss, joint)
    P = joint.measure
    risks = expectations(L, P)
    best = int(np.flatnonzero(risks <= risks.min() + TOL)[0])
    F = FunctionClass(L - L[best], label=f"excess({G.label})")
    return ExcessLoss(F, P, best, L)
