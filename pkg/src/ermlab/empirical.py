"""Samples, empirical means, (approximate) empirical minimizers and Rademacher averages."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .classes import (
    TOL,
    DiscreteMeasure,
    FuncVec,
    FunctionClass,
    StarHull,
    SubClass,
    _as_values,
    _check_dims,
    expectations,
)
from .errors import EmptyClassError, ResourceError
from .rng import as_stream, make_stream, map_replicates

EXACT_RADEMACHER_MAX_N = 20
EXACT_SAMPLE_LIMIT = 200_000
MODES = ("exact", "adversarial-low", "adversarial-high")


@dataclass(frozen=True)
class Sample:
    indices: np.ndarray
    counts: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.indices.size)

    @property
    def atom_count(self) -> int:
        return int(self.counts.size)

    def __eq__(self, other):
        return (isinstance(other, Sample) and self.seed == other.seed
                and np.array_equal(self.indices, other.indices) and self.counts.size == other.counts.size)

    def __hash__(self):
        return hash((self.seed, self.indices.tobytes()))

    @classmethod
    def from_indices(cls, indices, atom_count: int, seed: int = -1) -> "Sample":
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("a sample needs at least one point")
        if idx.min() < 0 or idx.max() >= atom_count:
            raise ValueError("sample index outside the atom set")
        counts = np.bincount(idx, minlength=atom_count)
        idx.setflags(write=False)
        counts.setflags(write=False)
        return cls(idx, counts, int(seed))

    def to_json(self) -> dict:
        return {"seed": self.seed, "n": self.n, "indices": [int(i) for i in self.indices]}

    @classmethod
    def from_json(cls, doc: dict, atom_count: int) -> "Sample":
        if len(doc["indices"]) != doc["n"]:
            raise ValueError("sample n does not match its index list")
        return cls.from_indices(doc["indices"], atom_count, doc["seed"])


@dataclass(frozen=True)
class RademacherDraw:
    signs: np.ndarray
    seed: int


def draw_signs(n: int, stream) -> RademacherDraw:
    st = as_stream(stream)
    signs = st.rng.integers(0, 2, size=n, dtype=np.int8) * 2 - 1
    return RademacherDraw(signs, st.seed)


def draw_sample(P: DiscreteMeasure, n: int, stream) -> Sample:
    """n i.i.d. atoms from P, deterministic given the stream."""
    if n < 1:
        raise ValueError("sample size must be positive")
    st = as_stream(stream)
    idx = st.rng.choice(P.atom_count, size=n, p=P.probs)
    return Sample.from_indices(idx, P.atom_count, st.seed)


def draw_counts(P: DiscreteMeasure, n: int, K: int, master_seed: int, experiment_id: str,
                threads: int | None = None) -> np.ndarray:
    """(K, m) per-atom counts, replicate r drawn from its own stream."""

    def one(r):
        return draw_sample(P, n, make_stream(master_seed, experiment_id, r)).counts

    return np.array(map_replicates(one, K, threads), dtype=np.int64).reshape(K, P.atom_count)


def enumerate_counts(P: DiscreteMeasure, n: int):
    """Every count vector of n draws from P with its multinomial probability."""
    m = P.atom_count
    if math.comb(n + m - 1, m - 1) > EXACT_SAMPLE_LIMIT:
        raise ResourceError("too many samples to enumerate exactly")
    logp = np.log(np.where(P.probs > 0, P.probs, 1.0))
    rows, weights = [], []
    for combo in itertools.combinations_with_replacement(range(m), n):
        counts = np.bincount(combo, minlength=m)
        if np.any((counts > 0) & (P.probs == 0)):
            continue
        logw = math.lgamma(n + 1) - sum(math.lgamma(k + 1) for k in counts) + float(counts @ logp)
        rows.append(counts)
        weights.append(math.exp(logw))
    return np.array(rows), np.array(weights)


def empirical_mean(f, s: Sample) -> float:
    """P_n f = (1/n) sum_i f(X_i)."""
    v = _as_values(f)
    _check_dims(v, s.atom_count)
    return math.fsum(s.counts * v) / s.n


@dataclass(frozen=True)
class MinimizerResult:
    member_id: object
    scale: float
    empirical_value: float
    true_value: float
    rho: float
    mode: str
    function: FuncVec | None = None


def _explicit_choice(p, e, rho, n, mode):
    if mode == "exact":
        pool = np.flatnonzero(e <= e.min() + TOL)
        return int(pool[np.argmin(p[pool])])
    pool = np.flatnonzero(e <= e.min() + rho / n + TOL)
    pick = np.argmin(p[pool]) if mode == "adversarial-low" else np.argmax(p[pool])
    return int(pool[pick])


def _hull_choice(p, e, rho, n, mode):
    """Pick (base index or None for the zero function, scale) over the hull."""
    inf = min(0.0, float(e.min()))
    if mode == "exact":
        t = inf + TOL
        best, best_a, best_v = None, 0.0, 0.0 if t >= 0 else math.inf
        for j in np.flatnonzero(e <= t):
            if p[j] < best_v:
                best, best_a, best_v = int(j), 1.0, float(p[j])
        return best, best_a
    t = inf + rho / n + TOL
    low = mode == "adversarial-low"
    # zero function first so it wins ties
    best, best_a = (None, 0.0) if t >= 0 else (None, None)
    best_v = 0.0 if t >= 0 else (math.inf if low else -math.inf)
    for j in range(p.size):
        if e[j] > 0:
            if t < 0:
                continue
            lo, hi = 0.0, min(1.0, t / e[j])
        elif e[j] == 0:
            if t < 0:
                continue
            lo, hi = 0.0, 1.0
        else:
            lo = max(0.0, t / e[j])
            if lo > 1.0:
                continue
            hi = 1.0
        a = (lo if p[j] >= 0 else hi) if low else (hi if p[j] >= 0 else lo)
        v = a * p[j]
        if (low and v < best_v) or (not low and v > best_v):
            best, best_a, best_v = j, a, v
    if best_a is None:
        raise EmptyClassError("no hull member meets the slack")
    if best_a == 0.0:
        best = None
    return best, best_a


def minimize_empirical(F: FunctionClass | StarHull, P: DiscreteMeasure, s: Sample,
                       rho: float = 0.0, mode: str = "exact") -> MinimizerResult:
    """Empirical minimizer, or an adversarial rho-approximate one.

    A member is rho-approximate when P_n f <= inf P_n + rho/n.  In the
    adversarial modes the member of smallest (or largest) Pf among those is
    returned; ties go to the smaller Pf, then the smaller index.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    n = s.n
    if isinstance(F, StarHull) and not F.explicit:
        oracle = F.base
        reps = oracle.representatives(s.counts[None, :])
        p, e = reps.probs, reps.emp[0]
        j, a = _hull_choice(p, e, rho, n, mode)
        if j is None:
            return MinimizerResult(None, 0.0, 0.0, 0.0, rho, mode, FuncVec(np.zeros(F.atom_count)))
        member_id, f = oracle.resolve(reps.labels[j], s.counts)
        return MinimizerResult(member_id, a, a * float(e[j]), a * float(p[j]), rho, mode, a * f)

    hull = isinstance(F, StarHull)
    matrix = F.base.matrix if hull else F.matrix
    if matrix.shape[0] == 0:
        raise EmptyClassError("empty class")
    _check_dims(matrix, s.atom_count)
    p = expectations(matrix, P)
    e = matrix @ s.counts / n
    if hull:
        j, a = _hull_choice(p, e, rho, n, mode)
    else:
        j, a = _explicit_choice(p, e, rho, n, mode), 1.0
    if j is None:
        return MinimizerResult(None, 0.0, 0.0, 0.0, rho, mode, FuncVec(np.zeros(matrix.shape[1])))
    f = FuncVec(a * matrix[j])
    return MinimizerResult(j, a, empirical_mean(f, s), a * float(p[j]), rho, mode, f)


class RademacherEstimate(NamedTuple):
    value: float
    stderr: float
    draws: int
    exact: bool


def _sign_block(start: int, stop: int, n: int) -> np.ndarray:
    ints = np.arange(start, stop, dtype=np.int64)
    bits = (ints[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def rademacher_average(members, s: Sample, draws="exact", stream=None,
                       chunk: int = 1 << 14) -> RademacherEstimate:
    """E_sigma sup_f (1/n) sum_i sigma_i f(X_i) over a finite descriptor.

    ``draws="exact"`` enumerates all 2^n sign vectors (n <= 20); an integer
    runs that many Monte Carlo sign vectors and reports the standard error.
    An empty descriptor has average 0.
    """
    values = members.values if isinstance(members, SubClass) else (
        members.matrix if isinstance(members, FunctionClass) else np.atleast_2d(members))
    n = s.n
    if values.shape[0] == 0:
        return RademacherEstimate(0.0, 0.0, 0 if draws == "exact" else int(draws), draws == "exact")
    _check_dims(values, s.atom_count)
    W = values[:, s.indices].T / n  # (n, k)
    if draws == "exact":
        if n > EXACT_RADEMACHER_MAX_N:
            raise ResourceError(f"exact Rademacher enumeration capped at n = {EXACT_RADEMACHER_MAX_N}")
        total = 1 << n
        parts = [np.max(_sign_block(a, min(a + chunk, total), n) @ W, axis=1).sum()
                 for a in range(0, total, chunk)]
        return RademacherEstimate(math.fsum(parts) / total, 0.0, total, True)
    draws = int(draws)
    if draws < 2:
        raise ValueError("Monte Carlo Rademacher averages need at least 2 draws")
    st = as_stream(0 if stream is None else stream)
    sups = []
    for a in range(0, draws, chunk):
        size = min(chunk, draws - a)
        signs = st.rng.integers(0, 2, size=(size, n), dtype=np.int8) * 2.0 - 1.0
        sups.append(np.max(signs @ W, axis=1))
    sups = np.concatenate(sups)
    return RademacherEstimate(float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(draws)), draws, False)


class Deviation(NamedTuple):
    signed: float
    absolute: float


def deviation_profile(F, P: DiscreteMeasure, counts: np.ndarray, n: int):
    """(Pf, P_n f) for the members a supremum has to look at.

    Returns ``(p, emp, hull)`` with ``emp`` of shape ``(K, k)`` for a
    ``(K, m)`` batch of count vectors.
    """
    counts = np.atleast_2d(counts)
    if isinstance(F, StarHull) and not F.explicit:
        reps = F.base.representatives(counts)
        return reps.probs, reps.emp, True
    hull = isinstance(F, StarHull)
    matrix = F.base.matrix if hull else F.matrix
    _check_dims(matrix, counts.shape[1])
    return expectations(matrix, P), counts @ matrix.T / n, hull


def sup_deviation(F, P: DiscreteMeasure, s: Sample) -> Deviation:
    """(sup (Pf - P_n f), sup |Pf - P_n f|) over the class, exactly.

    Over a star hull the scaling a = 0 contributes the zero deviation.
    """
    p, e, hull = deviation_profile(F, P, s.counts, s.n)
    d = p - e[0]
    signed, absolute = float(d.max()), float(np.abs(d).max())
    if hull:
        signed, absolute = max(0.0, signed), max(0.0, absolute)
    return Deviation(signed, absolute)
