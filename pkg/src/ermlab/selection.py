"""Penalized model selection over nested classes, with the oracle-inequality audit.

With F_1 c F_2 c ... and eps_1 <= eps_2 <= ..., picking the class that
minimizes P_n l(f_hat_k) + (7/2) eps_k gives P l(f_hat) <= min_k (P l(f_k*) + 9 eps_k)
on every sample where both uniform deviation displays hold.  The audit here
checks that implication sample by sample, with no probabilistic slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .classes import (
    TOL,
    DiscreteMeasure,
    FunctionClass,
    JointDistribution,
    LossSpec,
    StarHull,
    expectations,
    loss_matrix,
)
from .complexity import empirical_xi_curve, fixed_point
from .empirical import Sample, draw_sample
from .errors import InclusionError
from .rng import make_stream, map_replicates

PENALTY_SCALE = 3.5
ORACLE_FACTOR = 9.0
GAP_TOL = 1e-12


@dataclass
class NestedProblem:
    classes: list
    loss: LossSpec
    joint: JointDistribution
    eps: np.ndarray
    best_per_class: list
    losses: list
    risks: list
    penalty_scale: float = PENALTY_SCALE

    @property
    def measure(self) -> DiscreteMeasure:
        return self.joint.measure

    @property
    def K(self) -> int:
        return len(self.classes)

    def best_risks(self) -> np.ndarray:
        return np.array([r[j] for r, j in zip(self.risks, self.best_per_class)])

    def oracle_target(self, eps=None) -> float:
        eps = self.eps if eps is None else np.asarray(eps, dtype=float)
        return float(np.min(self.best_risks() + ORACLE_FACTOR * eps))


def _contains(rows: np.ndarray, f: np.ndarray) -> bool:
    return bool(np.any(np.max(np.abs(rows - f), axis=1) <= TOL))


def make_nested(classes, loss: LossSpec, joint: JointDistribution, eps,
                penalty_scale: float = PENALTY_SCALE) -> NestedProblem:
    """Validate inclusion and monotone eps, and find each class's risk minimizer."""
    classes = list(classes)
    eps = np.asarray(eps, dtype=float)
    if not classes:
        raise ValueError("need at least one class")
    if eps.shape != (len(classes),):
        raise ValueError(f"need one eps per class ({len(classes)}), got {eps.size}")
    if np.any(np.diff(eps) < 0):
        k = int(np.flatnonzero(np.diff(eps) < 0)[0])
        raise ValueError(f"eps must be non-decreasing; eps[{k + 1}] < eps[{k}]")
    m = classes[0].atom_count
    for k, F in enumerate(classes):
        if F.atom_count != m:
            raise ValueError(f"class {k} has {F.atom_count} atoms, expected {m}")
    for k in range(len(classes) - 1):
        bigger = classes[k + 1].matrix
        for i, f in enumerate(classes[k].matrix):
            if not _contains(bigger, f):
                raise InclusionError(f"member {i} of class {k} is missing from class {k + 1}", k, i)
    P = joint.measure
    losses = [loss_matrix(F, loss, joint) for F in classes]
    risks = [expectations(L, P) for L in losses]
    best = [int(np.flatnonzero(r <= r.min() + TOL)[0]) for r in risks]
    return NestedProblem(classes, loss, joint, eps, best, losses, risks, penalty_scale)


@dataclass
class SelectionResult:
    per_class: list
    chosen_k: int
    chosen_index: int
    chosen_risk: float
    oracle_target: float
    penalty_scale: float

    def as_dict(self):
        return {"per_class": self.per_class, "chosen_k": self.chosen_k, "chosen_index": self.chosen_index,
                "chosen_risk": self.chosen_risk, "oracle_target": self.oracle_target,
                "penalty_scale": self.penalty_scale}


def _emp_risks(problem: NestedProblem, s: Sample):
    return [L @ s.counts / s.n for L in problem.losses]


def select(problem: NestedProblem, s: Sample, eps=None) -> SelectionResult:
    """Empirical risk minimizer per class, then the class with least penalized risk.

    Ties go to the lower member index and the smaller k.  ``eps`` overrides
    the problem's values, e.g. with sample-dependent estimates.
    """
    eps = problem.eps if eps is None else np.asarray(eps, dtype=float)
    emp = _emp_risks(problem, s)
    rows, penalized = [], []
    for k, e in enumerate(emp):
        j = int(np.argmin(e))
        pen = problem.penalty_scale * float(eps[k])
        penalized.append(float(e[j]) + pen)
        rows.append({"k": k + 1, "index": j, "emp_risk": float(e[j]), "penalty": pen,
                     "penalized": penalized[-1], "risk": float(problem.risks[k][j])})
    k_hat = int(np.argmin(penalized))
    j_hat = rows[k_hat]["index"]
    return SelectionResult(rows, k_hat + 1, j_hat, float(problem.risks[k_hat][j_hat]),
                           problem.oracle_target(eps), problem.penalty_scale)


class Hypotheses(NamedTuple):
    h1: bool
    h2: bool
    margin1: float
    margin2: float


def hypotheses_check(problem: NestedProblem, s: Sample, eps=None) -> Hypotheses:
    """Both uniform deviation displays, evaluated exactly on the realized sample.

    margin1 = max_k max_f [excess risk - 2 empirical excess - eps_k] and
    margin2 = max_k max_f [empirical excess - 2 excess risk - eps_k];
    each display holds when its margin is <= 0.
    """
    eps = problem.eps if eps is None else np.asarray(eps, dtype=float)
    emp = _emp_risks(problem, s)
    m1 = m2 = -np.inf
    for k, (r, e, j) in enumerate(zip(problem.risks, emp, problem.best_per_class)):
        a = r - r[j]
        d = e - e[j]
        m1 = max(m1, float(np.max(a - 2 * d - eps[k])))
        m2 = max(m2, float(np.max(d - 2 * a - eps[k])))
    return Hypotheses(m1 <= 0, m2 <= 0, m1, m2)


def oracle_check(problem: NestedProblem, selection: SelectionResult) -> float:
    """P l(f_hat) - min_k (P l(f_k*) + 9 eps_k)."""
    return selection.chosen_risk - selection.oracle_target


@dataclass
class AuditReport:
    replicates: int
    hypotheses_true: int
    violations: int
    max_gap_when_true: float | None
    max_gap_overall: float
    chosen_counts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self):
        return {"replicates": self.replicates, "hypotheses_true": self.hypotheses_true,
                "violations": self.violations, "max_gap_when_true": self.max_gap_when_true,
                "max_gap_overall": self.max_gap_overall, "chosen_counts": self.chosen_counts,
                "passed": self.passed}


def implication_audit(problem: NestedProblem, n: int, replicates: int = 1000, seed: int = 0,
                      threads: int | None = None) -> AuditReport:
    """On every sample where both displays hold, the oracle gap must be <= 1e-12."""
    P = problem.measure

    def one(r):
        s = draw_sample(P, n, make_stream(seed, "model-select", r))
        sel = select(problem, s)
        h = hypotheses_check(problem, s)
        return h.h1 and h.h2, oracle_check(problem, sel), sel.chosen_k

    rows = map_replicates(one, replicates, threads)
    ok = np.array([r[0] for r in rows])
    gaps = np.array([r[1] for r in rows])
    chosen = {}
    for _, _, k in rows:
        chosen[str(k)] = chosen.get(str(k), 0) + 1
    true_gaps = gaps[ok]
    return AuditReport(
        replicates, int(ok.sum()), int(np.sum(true_gaps > GAP_TOL)),
        float(true_gaps.max()) if true_gaps.size else None, float(gaps.max()),
        dict(sorted(chosen.items(), key=lambda kv: int(kv[0]))),
    )


def eps_from_complexity(problem: NestedProblem, s: Sample, c1: float = 0.5, c2: float = 2.0,
                        c3: float = 1 / 16, draws=2000, seed: int = 0) -> np.ndarray:
    """eps_k from the empirical fixed point of each class's excess-loss hull.

    The excess losses are taken relative to each class's risk minimizer;
    the running maximum keeps the sequence non-decreasing.
    """
    out = []
    for L, j in zip(problem.losses, problem.best_per_class):
        hull = StarHull(FunctionClass(L - L[j], label="excess"))
        curve = empirical_xi_curve(hull, s, c1, c2, draws=draws, seed=seed)
        out.append(fixed_point(curve, 0.25, c3).r_star)
    return np.maximum.accumulate(np.array(out))
