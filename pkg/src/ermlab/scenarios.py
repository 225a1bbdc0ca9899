"""Demonstration scenarios: the fixed-point gap class and finite classification problems."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .classes import (
    TOL,
    ClassOracle,
    DiscreteMeasure,
    FuncVec,
    FunctionClass,
    JointDistribution,
    LossSpec,
    Representatives,
    StarHull,
    bernstein_certificate,
    excess_loss_class,
    expectation,
    make_measure,
)
from .complexity import ComplexityCurve, curve_from_counts, fixed_point
from .empirical import Sample, draw_sample, minimize_empirical
from .errors import PreconditionError, ResourceError, UnsupportedOperationError
from .rng import make_stream, map_replicates

ENUMERATION_LIMIT = 20_000
MAX_LABELING_ATOMS = 10


class GapOracle(ClassOracle):
    """Uniform measure on m atoms; all measure-1/4 indicators plus N block pairs.

    Pair j is 1 on a block B_j of 3m/(2n) atoms and -1 on a block C_j of
    m/(2n) atoms, so Pf_j = 1/n and Pf_j^2 = 2/n.  Blocks are laid out
    consecutively from atom 0.
    """

    def __init__(self, n: int, m: int, N: int):
        self.n, self.m, self.N = n, m, N
        self.measure = DiscreteMeasure(np.full(m, 1.0 / m))
        self.quarter = m // 4
        self.b_size = 3 * m // (2 * n)
        self.c_size = m // (2 * n)
        self.block = self.b_size + self.c_size
        self.p_indicator = expectation(self._indicator(range(self.quarter)), self.measure)
        self.p_pair = expectation(self.pair(0), self.measure) if N else None

    @property
    def sup_bound(self) -> float:
        return 1.0

    def _indicator(self, atoms) -> FuncVec:
        v = np.zeros(self.m)
        v[list(atoms)] = 1.0
        return FuncVec(v)

    def pair(self, j: int) -> FuncVec:
        v = np.zeros(self.m)
        start = j * self.block
        v[start:start + self.b_size] = 1.0
        v[start + self.b_size:start + self.block] = -1.0
        return FuncVec(v)

    def pair_means(self, counts: np.ndarray) -> np.ndarray:
        """(K, N) empirical means of the pair functions."""
        counts = np.atleast_2d(counts)
        K = counts.shape[0]
        blocks = counts[:, :self.N * self.block].reshape(K, self.N, self.block)
        return (blocks[:, :, :self.b_size].sum(axis=2) - blocks[:, :, self.b_size:].sum(axis=2)) / self.n

    def representatives(self, counts: np.ndarray) -> Representatives:
        counts = np.atleast_2d(counts)
        q = self.quarter
        part = np.sort(counts, axis=1)
        ind_min = part[:, :q].sum(axis=1) / self.n
        ind_max = part[:, -q:].sum(axis=1) / self.n
        probs = [self.p_indicator, self.p_indicator]
        emp = [ind_min, ind_max]
        labels = ["indicator-min", "indicator-max"]
        if self.N:
            pm = self.pair_means(counts)
            probs += [self.p_pair, self.p_pair]
            emp += [pm.min(axis=1), pm.max(axis=1)]
            labels += ["pair-min", "pair-max"]
        return Representatives(np.array(probs), np.stack(emp, axis=1), tuple(labels))

    def witness_atoms(self, counts: np.ndarray) -> np.ndarray:
        """The m/4 atoms with the fewest sample hits (stable order)."""
        return np.sort(np.argsort(counts, kind="stable")[:self.quarter])

    def resolve(self, label, counts: np.ndarray):
        counts = np.asarray(counts)
        if label == "indicator-min":
            return "indicator", self._indicator(self.witness_atoms(counts))
        if label == "indicator-max":
            return "indicator", self._indicator(np.sort(np.argsort(-counts, kind="stable")[:self.quarter]))
        pm = self.pair_means(counts)[0]
        j = int(np.argmin(pm) if label == "pair-min" else np.argmax(pm))
        return f"pair:{j}", self.pair(j)

    def witness_members(self) -> FunctionClass:
        rows = [self._indicator(range(self.quarter))] + [self.pair(j) for j in range(self.N)]
        return FunctionClass(rows, label="gap-witnesses")

    def enumerate_base(self) -> FunctionClass:
        if math.comb(self.m, self.quarter) > ENUMERATION_LIMIT:
            raise UnsupportedOperationError(
                f"C({self.m}, {self.quarter}) indicators exceed the enumeration limit")
        rows = [self._indicator(A) for A in itertools.combinations(range(self.m), self.quarter)]
        rows += [self.pair(j) for j in range(self.N)]
        return FunctionClass(rows, label="gap-base")

    def hull_contains(self, g, tol: float = TOL) -> bool:
        g = np.asarray(g, dtype=float)
        a = float(np.max(np.abs(g)))
        if a <= tol:
            return True
        if a > 1 + tol:
            return False
        h = g / a
        ones = np.abs(h - 1) <= tol
        if np.all(ones | (np.abs(h) <= tol)) and ones.sum() == self.quarter:
            return True
        return any(np.max(np.abs(h - self.pair(j).values)) <= tol for j in range(self.N))


@dataclass
class GapClassSpec:
    n: int
    m: int
    N: int
    oracle: GapOracle
    hull: StarHull

    @property
    def measure(self) -> DiscreteMeasure:
        return self.oracle.measure

    @property
    def sup_bound(self) -> float:
        return 1.0

    def as_dict(self):
        return {"n": self.n, "m": self.m, "N": self.N, "block_B": self.oracle.b_size,
                "block_C": self.oracle.c_size}


def build_gap_class(n: int, m: int | None = None, N: int | None = None) -> GapClassSpec:
    """Star-shaped (1, 2)-Bernstein class whose fixed point is 1/4 while P f_hat <= 1/n.

    ``m`` (default 8n) is rounded up to a multiple of lcm(4, 2n) so every
    block probability is exact; ``N`` defaults to floor(n/2).
    """
    if n < 1:
        raise PreconditionError("n must be positive")
    step = math.lcm(4, 2 * n)
    m = 8 * n if m is None else int(m)
    m = -(-m // step) * step
    N = n // 2 if N is None else int(N)
    if N < 0 or 2 * N > n:
        raise PreconditionError(f"N = {N} pairs need more than the available mass (N <= n/2 = {n / 2:g})")
    if 3 * m < 4 * n:
        raise PreconditionError("m must be at least 4n/3 so a measure-1/4 set can avoid the sample")
    oracle = GapOracle(n, m, N)
    return GapClassSpec(n, m, N, oracle, StarHull(oracle))


@dataclass
class GapReport:
    spec: dict
    replicates: int
    rho: float
    delta: float
    seed: int
    witness_fraction: float
    witness_exact: bool
    curve: ComplexityCurve
    fixed_point: object
    pfhat_exact: np.ndarray
    pfhat_low: np.ndarray
    pfhat_high: np.ndarray
    exact_le_inv_n: float
    c_meas: float
    bracket_fraction: float
    bracket_fraction_exact: float
    headline_ratio: float
    median_pfhat: float
    quantiles: dict = field(default_factory=dict)

    def as_dict(self):
        fp = self.fixed_point
        return {
            "spec": self.spec,
            "replicates": self.replicates,
            "rho": self.rho,
            "delta": self.delta,
            "master_seed": self.seed,
            "witness_fraction": self.witness_fraction,
            "witness_exact": self.witness_exact,
            "fixed_point": fp.as_dict(),
            "contains_quarter": fp.bracket[0] is not None and fp.bracket[1] is not None
            and fp.bracket[0] <= 0.25 <= fp.bracket[1],
            "pfhat_exact_quantiles": self.quantiles,
            "exact_le_inv_n_fraction": self.exact_le_inv_n,
            "c_meas": self.c_meas,
            "bracket_fraction": self.bracket_fraction,
            "bracket_fraction_exact": self.bracket_fraction_exact,
            "median_pfhat": self.median_pfhat,
            "headline_ratio": self.headline_ratio,
        }


def _lower_bracket(n, c, rho):
    return (1.0 - c * math.sqrt(math.log(n) / n) - rho) / n


def gap_experiment(spec: GapClassSpec, replicates: int = 500, rho: float = 0.1, delta: float = 0.05,
                   seed: int = 0, resolution: float = 0.01, threads: int | None = None) -> GapReport:
    """Run the gap demonstration on independent samples.

    Per replicate: find the measure-1/4 witness with empirical mean 0,
    compute P f_hat for the exact and both adversarial rho-approximate
    minimizers, and feed the sample into the xi_n curve.  ``c_meas`` is the
    (1 - delta)-quantile of the constant the lower bracket
    (1/n)(1 - c sqrt(log n / n) - rho) needs on each replicate.
    """
    if replicates < 2:
        raise PreconditionError("need at least 2 replicates")
    if not (0 < rho < 0.125):
        raise PreconditionError("rho must lie in (0, 1/8)")
    n, hull, P, oracle = spec.n, spec.hull, spec.measure, spec.oracle

    def one(r):
        s = draw_sample(P, n, make_stream(seed, "gap-demo", r))
        atoms = oracle.witness_atoms(s.counts)
        w = oracle._indicator(atoms)
        witness = int(s.counts[atoms].sum()) == 0 and abs(expectation(w, P) - 0.25) <= TOL
        vals = [minimize_empirical(hull, P, s, rho if mode != "exact" else 0.0, mode).true_value
                for mode in ("exact", "adversarial-low", "adversarial-high")]
        return s.counts, witness, vals

    results = map_replicates(one, replicates, threads)
    counts = np.array([c for c, _, _ in results])
    witness = np.array([w for _, w, _ in results])
    pf = np.array([v for _, _, v in results])
    exact, low, high = pf[:, 0], pf[:, 1], pf[:, 2]

    curve = curve_from_counts(hull, P, n, counts, resolution=resolution)
    fp = fixed_point(curve, 0.25, 0.0)

    inv_n = 1.0 / n
    scale = math.sqrt(math.log(n) / n)
    c_req = np.maximum(0.0, (1.0 - rho - n * low) / scale)
    c_meas = float(np.quantile(c_req, 1 - delta, method="inverted_cdf"))
    lower = _lower_bracket(n, c_meas, rho)
    upper = inv_n * (1 + 1e-12)
    inside = (low >= lower - TOL) & (high <= upper)
    inside_exact = (exact >= lower - TOL) & (exact <= upper)
    median = float(np.median(exact))
    qs = {f"q{int(q * 100):02d}": float(np.quantile(exact, q, method="inverted_cdf"))
          for q in (0.01, 0.1, 0.5, 0.9, 0.99)}
    return GapReport(
        spec=spec.as_dict(), replicates=replicates, rho=rho, delta=delta, seed=seed,
        witness_fraction=float(witness.mean()), witness_exact=bool(witness.all()),
        curve=curve, fixed_point=fp, pfhat_exact=exact, pfhat_low=low, pfhat_high=high,
        exact_le_inv_n=float(np.mean(exact <= upper)), c_meas=c_meas,
        bracket_fraction=float(inside.mean()), bracket_fraction_exact=float(inside_exact.mean()),
        headline_ratio=fp.r_star / median if median > 0 else math.inf, median_pfhat=median,
        quantiles=qs,
    )


def classification_scenario(margin: float, atoms: int, seed: int = 0, labelings: str = "all"):
    """Binary classification on ``atoms`` covariate atoms with |Pr(Y=1|x) - 1/2| >= margin.

    ``labelings="all"`` takes every binary labeling as G (atoms <= 10);
    ``"thresholds"`` takes the labelings 1[x >= t] and their complements,
    with the conditional probabilities arranged so the Bayes rule is one of
    them.  Returns ``(G, loss, joint)``.
    """
    if not (0 < margin <= 0.5):
        raise PreconditionError("margin must lie in (0, 1/2]")
    rng = make_stream(seed, "classification", 0).rng
    px = make_measure(rng.uniform(0.5, 1.5, size=atoms)).probs
    gap = margin + rng.uniform(0, 1, size=atoms) * (0.5 - margin)
    if labelings == "all":
        if atoms > MAX_LABELING_ATOMS:
            raise ResourceError(f"all labelings of {atoms} atoms exceed 2^{MAX_LABELING_ATOMS} members")
        sign = rng.choice([-1.0, 1.0], size=atoms)
        G = np.array(list(itertools.product([0.0, 1.0], repeat=atoms)))
    elif labelings == "thresholds":
        sign = np.where(np.arange(atoms) >= atoms // 2, 1.0, -1.0)
        up = (np.arange(atoms)[None, :] >= np.arange(atoms + 1)[:, None]).astype(float)
        G = np.concatenate([up, 1.0 - up[1:-1]])
    else:
        raise ValueError(f"unknown labelings {labelings!r}")
    eta = 0.5 + sign * gap
    pairs = []
    for x in range(atoms):
        pairs.append((x, 0.0, px[x] * (1 - eta[x])))
        pairs.append((x, 1.0, px[x] * eta[x]))
    x, y, p = zip(*pairs)
    joint = JointDistribution(x, y, make_measure(p).probs)
    return FunctionClass(G, label=f"labelings({labelings})"), LossSpec.discrete(), joint


@dataclass
class Scenario:
    hull: StarHull
    measure: DiscreteMeasure
    label: str
    n: int | None = None

    @property
    def sup_bound(self) -> float:
        return self.hull.sup_bound


def classification_hull(margin: float = 0.2, atoms: int = 16, seed: int = 0,
                        labelings: str = "thresholds") -> Scenario:
    """Star hull of a classification excess-loss class on 2 * atoms (x, y) atoms."""
    G, loss, joint = classification_scenario(margin, atoms, seed, labelings)
    ex = excess_loss_class(G, loss, joint)
    return Scenario(StarHull(ex.functions), ex.measure, f"classification(h={margin:g}, atoms={atoms})")


def hull_scenario_from(F: FunctionClass, P: DiscreteMeasure, label: str = "") -> Scenario:
    return Scenario(StarHull(F), P, label or F.label)


def gap_scenario(spec: GapClassSpec) -> Scenario:
    return Scenario(spec.hull, spec.measure, f"gap(n={spec.n}, m={spec.m}, N={spec.N})", spec.n)


def certify(scenario: Scenario, beta: float = 1.0):
    return bernstein_certificate(scenario.hull, scenario.measure, beta)


def sample_for(scenario: Scenario, n: int, seed: int, replicate: int = 0) -> Sample:
    return draw_sample(scenario.measure, n, make_stream(seed, "scenario", replicate))


def nested_classification_problem(atoms: int = 6, margin: float = 0.1, n: int = 100, x: float = 3.0,
                                  scale: float = 1.0, seed: int = 3):
    """Three nested classifier classes: constants, thresholds, all labelings.

    eps_k = scale * (log |F_k| + x) / n, which is non-decreasing in k.
    """
    from .selection import make_nested

    G, loss, joint = classification_scenario(margin, atoms, seed=seed, labelings="all")
    up = (np.arange(atoms)[None, :] >= np.arange(atoms + 1)[:, None]).astype(float)
    F1 = FunctionClass(np.array([np.zeros(atoms), np.ones(atoms)]), label="constants")
    F2 = FunctionClass(np.unique(np.concatenate([up, 1.0 - up]), axis=0), label="thresholds")
    F3 = FunctionClass(G.matrix, label="all-labelings")
    classes = [F1, F2, F3]
    eps = [scale * (math.log(len(F.matrix)) + x) / n for F in classes]
    return make_nested(classes, loss, joint, eps)
