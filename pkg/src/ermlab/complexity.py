"""Localized complexity curves, their fixed points, and epsilon-brackets.

The true-measure curve is

    xi_n(r) = E sup{Pf - P_n f : f in F, Pf = r},

estimated by Monte Carlo over independent samples.  The empirical curve
replaces it by the Rademacher average of the slab
{f : c1 r <= P_n f <= c2 r} on one sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classes import TOL, DiscreteMeasure, empirical_slab, level_sup
from .empirical import Sample, deviation_profile, draw_counts, enumerate_counts, rademacher_average
from .errors import GridError, PreconditionError
from .rng import make_stream

CURVE_COLUMNS = ("r", "value", "stderr", "K", "n", "kind")
DEFAULT_POINTS = 64
LEVEL_BAND = 0.05


@dataclass(frozen=True)
class ComplexityCurve:
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    replicates: int
    n: int
    kind: str = "true-measure"
    empty: np.ndarray | None = None
    b: float | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise GridError("a curve needs at least one grid point")
        if np.any(np.diff(grid) <= 0):
            raise GridError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))
        if self.empty is None:
            object.__setattr__(self, "empty", np.zeros(grid.size, dtype=bool))
        if self.b is None:
            object.__setattr__(self, "b", float(grid[-1]))

    def rows(self):
        for r, v, se in zip(self.grid, self.values, self.stderr):
            yield (float(r), float(v), float(se), self.replicates, self.n, self.kind)


@dataclass(frozen=True)
class EmpiricalCurve:
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    c1: float
    c2: float
    sample_seed: int
    draws: int
    n: int
    kind: str = "empirical"
    b: float | None = None

    def __post_init__(self):
        if not (0 < self.c1 < 1 < self.c2):
            raise PreconditionError("slab constants need 0 < c1 < 1 < c2")
        grid = np.asarray(self.grid, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise GridError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        if self.b is None:
            object.__setattr__(self, "b", float(grid[-1]))

    @property
    def replicates(self) -> int:
        return self.draws

    def rows(self):
        for r, v, se in zip(self.grid, self.values, self.stderr):
            yield (float(r), float(v), float(se), self.draws, self.n, self.kind)


@dataclass(frozen=True)
class FixedPointResult:
    r_star: float
    factor: float
    slope: float
    bracket: tuple
    exhausted: bool = False
    degenerate: bool = False
    convention_notes: tuple = field(default_factory=tuple)

    @property
    def resolution(self) -> float | None:
        left, right = self.bracket
        return None if left is None or right is None else right - left

    def as_dict(self):
        return {
            "r_star": self.r_star,
            "factor": self.factor,
            "slope": self.slope,
            "bracket": list(self.bracket),
            "resolution": self.resolution,
            "exhausted": self.exhausted,
            "degenerate": self.degenerate,
            "convention_notes": list(self.convention_notes),
        }


@dataclass(frozen=True)
class BracketPair:
    epsilon: float
    r_minus: float
    r_plus: float
    peak: float
    peak_at: float

    def as_dict(self):
        return {"epsilon": self.epsilon, "r_minus": self.r_minus, "r_plus": self.r_plus,
                "peak": self.peak, "peak_at": self.peak_at}


def _base_probs(F, P: DiscreteMeasure) -> np.ndarray:
    p, _, _ = deviation_profile(F, P, np.zeros((1, F.atom_count)), 1)
    return p


def default_grid(F, P: DiscreteMeasure, n: int, points: int = DEFAULT_POINTS, b: float | None = None):
    """Log-spaced levels from max(1/(4n), min positive Pf / 4) up to b."""
    b = F.sup_bound if b is None else b
    p = _base_probs(F, P)
    pos = p[p > 0]
    lower = max(1.0 / (4 * n), pos.min() / 4 if pos.size else 0.0)
    if lower >= b:
        lower = b / 2
    return np.geomspace(lower, b, points)


class _Levels:
    """Per-sample suprema at any level, from one batch of samples."""

    def __init__(self, F, P, n, counts):
        self.p, self.emp, self.hull = deviation_profile(F, P, counts, n)

    def empty(self, grid):
        grid = np.asarray(grid, dtype=float)
        if self.hull:
            return ~np.any(self.p[None, :] >= grid[:, None] * (1 - 1e-12), axis=1)
        return ~np.any(self._band(grid), axis=1)

    def _band(self, grid):
        return np.abs(self.p[None, :] - grid[:, None]) <= LEVEL_BAND * grid[:, None] + TOL

    def sups(self, grid) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        if self.hull:
            return level_sup(self.p, self.emp, grid)
        dev = self.p[None, :] - self.emp
        out = np.zeros((self.emp.shape[0], grid.size))
        for j, mask in enumerate(self._band(grid)):
            if mask.any():
                out[:, j] = dev[:, mask].max(axis=1)
        return out


def _summarize(sups: np.ndarray):
    K = sups.shape[0]
    return sups.mean(axis=0), sups.std(axis=0, ddof=1) / math.sqrt(K)


def _first_success(values, grid, factor, slope):
    ok = np.asarray(values) + slope * grid <= factor * grid
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else None


def curve_from_counts(F, P: DiscreteMeasure, n: int, counts: np.ndarray, grid=None,
                      resolution: float | None = None, factor: float = 0.25) -> ComplexityCurve:
    """Curve estimate from a fixed batch of sample counts.

    With ``resolution`` set, the fixed-point bracket for ``factor`` is
    bisected on the same samples until it is at most that wide.  For star
    hulls sup/r is non-increasing in r on every sample, so the crossing
    found this way is the first one.
    """
    counts = np.atleast_2d(counts)
    K = counts.shape[0]
    if K < 2:
        raise PreconditionError("a curve needs at least 2 replicates")
    grid = default_grid(F, P, n) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise GridError("grid levels must be positive")
    levels = _Levels(F, P, n, counts)
    values, stderr = _summarize(levels.sups(grid))
    if resolution is not None:
        extra = []
        j = _first_success(values, grid, factor, 0.0)
        if j is not None and j > 0:
            left, right = grid[j - 1], grid[j]
            while right - left > resolution:
                mid = 0.5 * (left + right)
                v, _ = _summarize(levels.sups([mid]))
                extra.append(mid)
                if v[0] <= factor * mid:
                    right = mid
                else:
                    left = mid
        if extra:
            grid = np.unique(np.concatenate([grid, extra]))
            values, stderr = _summarize(levels.sups(grid))
    return ComplexityCurve(grid, values, stderr, K, n, "true-measure", levels.empty(grid),
                           float(F.sup_bound))


def xi_curve(F, P: DiscreteMeasure, n: int, grid=None, K: int = 1000, seed: int = 0,
             resolution: float | None = None, factor: float = 0.25,
             experiment_id: str = "xi-curve", threads: int | None = None) -> ComplexityCurve:
    """Monte Carlo estimate of xi_n over a grid of levels, from K samples."""
    if K < 2:
        raise PreconditionError("K must be at least 2")
    counts = draw_counts(P, n, K, seed, experiment_id, threads)
    return curve_from_counts(F, P, n, counts, grid, resolution, factor)


def exact_xi_curve(F, P: DiscreteMeasure, n: int, grid=None) -> ComplexityCurve:
    """xi_n on a grid, averaging over every possible sample with its multinomial weight."""
    counts, w = enumerate_counts(P, n)
    grid = default_grid(F, P, n) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise GridError("grid levels must be positive")
    levels = _Levels(F, P, n, counts)
    values = (w / w.sum()) @ levels.sups(grid)
    return ComplexityCurve(grid, values, np.zeros(grid.size), counts.shape[0], n, "exact",
                           levels.empty(grid), float(F.sup_bound))


def fixed_point(curve, factor: float = 0.25, slope: float = 0.0) -> FixedPointResult:
    """Smallest grid level r with value(r) + slope r <= factor r.

    Reported as a grid bracket (last failing level, first succeeding one).
    """
    if factor <= 0:
        raise PreconditionError("factor must be positive")
    if slope < 0 or (slope > 0 and slope >= factor):
        raise PreconditionError("slope must satisfy 0 <= slope < factor")
    grid = np.asarray(curve.grid, dtype=float)
    if grid.size == 0:
        raise GridError("empty curve")
    j = _first_success(curve.values, grid, factor, slope)
    empty = getattr(curve, "empty", None)
    notes = []
    if j is None:
        return FixedPointResult(float(curve.b), factor, slope, (float(grid[-1]), None), exhausted=True,
                                convention_notes=("no grid level satisfies the crossing",))
    if empty is not None and empty[j]:
        notes.append("first satisfying level is empty; its value is 0 by convention")
    if j == 0:
        notes.append("every level from the smallest grid point satisfies the crossing")
        return FixedPointResult(float(grid[0]), factor, slope, (None, float(grid[0])), degenerate=True,
                                convention_notes=tuple(notes))
    return FixedPointResult(float(grid[j]), factor, slope, (float(grid[j - 1]), float(grid[j])),
                            convention_notes=tuple(notes))


def empirical_xi_curve(F, s: Sample, c1: float = 0.5, c2: float = 2.0, grid=None, draws="exact",
                       seed: int = 0, scales=None) -> EmpiricalCurve:
    """Rademacher averages of the empirical slabs {c1 r <= P_n f <= c2 r}.

    Monte Carlo draws reuse one sign stream across levels.
    """
    if not (0 < c1 < 1 < c2):
        raise PreconditionError("slab constants need 0 < c1 < 1 < c2")
    b = F.sup_bound
    grid = np.geomspace(1.0 / (4 * s.n), b, DEFAULT_POINTS) if grid is None else np.asarray(grid, dtype=float)
    values, stderr = [], []
    used = 0
    for r in grid:
        slab = empirical_slab(F, s, c1, c2, float(r), scales)
        stream = None if draws == "exact" else make_stream(seed, "empirical-xi", 0)
        est = rademacher_average(slab, s, draws, stream)
        values.append(est.value)
        stderr.append(est.stderr)
        used = max(used, est.draws)
    return EmpiricalCurve(grid, np.array(values), np.array(stderr), c1, c2, s.seed, used, s.n,
                          b=float(b))


def epsilon_brackets(curve, epsilon: float, b: float | None = None) -> BracketPair:
    """Smallest and largest levels within epsilon of sup_r (xi_n(r) - r).

    r = 0 joins the candidates with xi_n(0) taken as the value at the
    smallest grid level.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = np.asarray(curve.grid, dtype=float)
    b = float(curve.b if b is None else b)
    keep = grid <= b + TOL
    grid, values = grid[keep], np.asarray(curve.values, dtype=float)[keep]
    gain = values - grid
    k = int(np.argmax(gain))
    peak = float(gain[k])
    near = np.flatnonzero(gain >= peak - epsilon)
    r_plus = float(grid[near[-1]])
    r_minus = 0.0 if values[0] >= peak - epsilon else float(grid[near[0]])
    return BracketPair(epsilon, r_minus, r_plus, peak, float(grid[k]))


def epsilon_threshold(curve, B: float, b: float, x: float, n: float, c: float = 1.0) -> float:
    """Smallest epsilon for which the bracket conclusions are claimed.

    r' = max(fixed point at 1/4, c (b + B)(x + log n)/n) and the threshold is
    c sqrt(max(peak, r') (B + b)(x + log n)/n).
    """
    if min(B, b, n, c) <= 0 or x < 0:
        raise ValueError("B, b, n and c must be positive and x nonnegative")
    conf = (x + math.log(n)) / n
    r_prime = max(fixed_point(curve, 0.25, 0.0).r_star, c * (b + B) * conf)
    peak = float(np.max(np.asarray(curve.values) - np.asarray(curve.grid)))
    return c * math.sqrt(max(peak, r_prime) * (B + b) * conf)


def interval_sups(F, P: DiscreteMeasure, n: int, counts: np.ndarray, upper: float,
                  lower: float = 0.0) -> np.ndarray:
    """Per-sample sup of (Pf - P_n f) over members with lower <= Pf <= upper."""
    p, emp, hull = deviation_profile(F, P, counts, n)
    dev = p[None, :] - emp
    K = emp.shape[0]
    if not hull:
        mask = (p >= lower - TOL) & (p <= upper + TOL)
        return dev[:, mask].max(axis=1) if mask.any() else np.zeros(K)
    best = np.zeros(K) if lower <= 0 else np.full(K, -np.inf)
    pos = p > 0
    if pos.any():
        lo = lower / p[pos]
        hi = np.minimum(1.0, upper / p[pos])
        ok = lo <= hi + TOL
        if ok.any():
            d = dev[:, pos][:, ok]
            cand = np.maximum(lo[ok] * d, hi[ok] * d).max(axis=1)
            best = np.maximum(best, cand)
    zero = p == 0
    if zero.any() and lower <= 0:
        best = np.maximum(best, dev[:, zero].max(axis=1))
    return np.where(np.isfinite(best), best, 0.0)


def xi_interval(F, P: DiscreteMeasure, n: int, upper: float, lower: float = 0.0, K: int = 1000,
                seed: int = 0, counts=None, experiment_id: str = "xi-interval"):
    """(estimate, stderr) of E sup{Pf - P_n f : lower <= Pf <= upper}."""
    if counts is None:
        counts = draw_counts(P, n, K, seed, experiment_id)
    sups = interval_sups(F, P, n, counts, upper, lower)
    return float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(sups.size))
