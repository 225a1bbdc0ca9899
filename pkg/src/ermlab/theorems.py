"""Executable checks of the localized bounds: fixed-point bounds, ratio bounds,
epsilon-brackets and concentration profiles.

All absolute constants are inputs, so the validators report measured rates
with explicit Monte Carlo slack instead of asserting exact inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classes import TOL, DiscreteMeasure, StarHull, bernstein_certificate, expectations
from .complexity import (
    ComplexityCurve,
    curve_from_counts,
    epsilon_brackets,
    epsilon_threshold,
    fixed_point,
    interval_sups,
)
from .empirical import Sample, deviation_profile, draw_counts, draw_sample, enumerate_counts, minimize_empirical
from .errors import PreconditionError
from .rng import make_stream, map_replicates

QUANTILES = (0.01, 0.10, 0.50, 0.90, 0.99)


def _qname(q):
    return f"q{round(q * 100):02d}"


@dataclass
class BoundReport:
    bound: float
    fixed_point_term: float
    confidence_term: float
    c: float
    x: float
    b: float
    B: float
    n: int
    target_rate: float
    violation_rate: float | None = None
    violation_stderr: float | None = None
    replicates: int = 0
    threshold: float | None = None
    passed: bool | None = None
    fixed_point: object = None

    def as_dict(self):
        out = {
            "bound": self.bound,
            "components": {"fixed_point": self.fixed_point_term, "confidence": self.confidence_term},
            "constants": {"c": self.c, "x": self.x, "b": self.b, "B": self.B, "n": self.n},
            "target_rate": self.target_rate,
            "violation_rate": None if self.violation_rate is None
            else {"value": self.violation_rate, "stderr": self.violation_stderr},
            "replicates": self.replicates,
            "threshold": self.threshold,
            "passed": self.passed,
        }
        if self.fixed_point is not None:
            out["fixed_point"] = self.fixed_point.as_dict()
        return out


def theorem12_bound(curve, b: float, B: float, x: float, n: int, c: float = 1.0) -> BoundReport:
    """max(fixed point of xi_n at r/4, c (b + B) x / n)."""
    if x <= 0:
        raise ValueError("x must be positive")
    fp = fixed_point(curve, 0.25, 0.0)
    conf = c * (b + B) * x / n
    return BoundReport(max(fp.r_star, conf), fp.r_star, conf, c, x, b, B, n, math.exp(-x), fixed_point=fp)


def _certified_B(F, P) -> float:
    if not isinstance(F, StarHull):
        raise PreconditionError("the class must be star-shaped (pass a StarHull)")
    cert = bernstein_certificate(F, P, 1.0)
    if not cert.satisfied:
        raise PreconditionError(f"class is not (1, B)-Bernstein: member {cert.worst_member} has Pf <= 0")
    return max(1.0, cert.B)


def _pfhat(F, P, n, replicates, seed, experiment_id, threads=None):
    def one(r):
        s = draw_sample(P, n, make_stream(seed, experiment_id, r))
        return minimize_empirical(F, P, s).true_value

    return np.array(map_replicates(one, replicates, threads))


def validate_theorem12(F: StarHull, P: DiscreteMeasure, n: int, x: float, replicates: int = 1000,
                       seed: int = 0, curve: ComplexityCurve | None = None, c: float = 1.0,
                       K: int = 1000, threads: int | None = None) -> BoundReport:
    """Fraction of replicates whose empirical minimizer exceeds the fixed-point bound."""
    if replicates < 100:
        raise PreconditionError("need at least 100 replicates")
    B = _certified_B(F, P)
    b = F.sup_bound
    if curve is None:
        counts = draw_counts(P, n, K, seed, "bound-curve", threads)
        curve = curve_from_counts(F, P, n, counts)
    report = theorem12_bound(curve, b, B, x, n, c)
    pf = _pfhat(F, P, n, replicates, seed, "bound", threads)
    rate = float(np.mean(pf > report.bound + TOL))
    target = math.exp(-x)
    report.violation_rate = rate
    report.violation_stderr = math.sqrt(rate * (1 - rate) / replicates)
    report.replicates = replicates
    report.threshold = target + 2 * math.sqrt(target * (1 - target) / replicates) + 0.01
    report.passed = rate <= report.threshold
    return report


@dataclass
class RatioCheckReport:
    epsilon: float
    r_min: float
    additive_variant: bool
    additive_r: float
    checked: int
    violations: list = field(default_factory=list)
    note: str = ""

    def as_dict(self):
        return {
            "epsilon": self.epsilon, "r_min": self.r_min, "additive_variant": self.additive_variant,
            "additive_r": self.additive_r, "checked": self.checked,
            "violations": [{"member": m, "Pf": pf, "Pnf": pn, "side": side}
                           for m, pf, pn, side in self.violations],
            "note": self.note,
        }


def ratio_check(F, P: DiscreteMeasure, s: Sample, epsilon: float, r_min: float = 0.0,
                additive_r: float | None = None) -> RatioCheckReport:
    """List members with Pf >= r_min that break (1 - eps) P_n f <= Pf <= (1 + eps) P_n f.

    With ``additive_r`` the two sides get an extra slack of r.  Star hulls
    are checked on their base members: the multiplicative form is invariant
    under scaling, so the base decides it for every a f with a Pf >= r_min.
    """
    if not (0 < epsilon < 1):
        raise ValueError("epsilon must lie in (0, 1)")
    if r_min < 0:
        raise ValueError("r_min must be nonnegative")
    hull = isinstance(F, StarHull)
    matrix = (F.base.matrix if F.explicit else F.base.witness_members().matrix) if hull else F.matrix
    pf = expectations(matrix, P)
    pn = matrix @ s.counts / s.n
    r = 0.0 if additive_r is None else float(additive_r)
    out = []
    for i in np.flatnonzero(pf >= r_min - TOL):
        if (1 - epsilon) * pn[i] - r - pf[i] > TOL:
            out.append((int(i), float(pf[i]), float(pn[i]), "lower"))
        if pf[i] - (1 + epsilon) * pn[i] - r > TOL:
            out.append((int(i), float(pf[i]), float(pn[i]), "upper"))
    note = "base members checked; scaled members inherit the multiplicative verdict" if hull else ""
    return RatioCheckReport(epsilon, r_min, additive_r is not None, r,
                            int(np.sum(pf >= r_min - TOL)), out, note)


@dataclass
class BracketReport:
    n: int
    x: float
    epsilon: float
    threshold: float
    condition_met: bool
    brackets: object
    gate_value: float
    gate_stderr: float
    gate_holds: bool
    replicates: int
    upper_limit: float
    inside_fraction: float
    upper_fraction: float
    lower_fraction: float | None
    target: float
    slack: float
    passed: bool | None
    fixed_point: object
    curve: ComplexityCurve
    pfhat: np.ndarray

    @property
    def lower_bracket_applied(self) -> bool:
        return self.gate_holds

    def as_dict(self):
        return {
            "n": self.n, "x": self.x, "epsilon": self.epsilon, "epsilon_threshold": self.threshold,
            "condition_met": self.condition_met,
            "status": "evaluated" if self.condition_met else "condition unmet",
            "brackets": self.brackets.as_dict(),
            "fixed_point": self.fixed_point.as_dict(),
            "gate": {"value": self.gate_value, "stderr": self.gate_stderr,
                     "limit": self.brackets.peak - self.epsilon, "holds": self.gate_holds},
            "lower_bracket_applied": self.lower_bracket_applied,
            "replicates": self.replicates,
            "upper_limit": self.upper_limit,
            "inside_fraction": self.inside_fraction,
            "upper_fraction": self.upper_fraction,
            "lower_fraction": self.lower_fraction,
            "target": self.target,
            "slack": self.slack,
            "passed": self.passed,
        }


def validate_theorem31(scenario, epsilon: float | None = None, x: float = 3.0, replicates: int = 500,
                       seed: int = 0, n: int | None = None, K: int = 1000, c: float = 1.0,
                       c1: float = 1.0, slack: float = 0.05, resolution: float | None = None,
                       threads: int | None = None) -> BracketReport:
    """Check that P f_hat lands in [r_minus, max(1/n, r_plus)].

    ``epsilon=None`` uses the threshold itself.  The lower bracket only
    counts toward ``passed`` when the gate E sup{Pf - P_n f : 0 <= Pf <= c1/n}
    < peak - epsilon holds; otherwise its fraction is reported as None.
    """
    F, P = scenario.hull, scenario.measure
    n = n if n is not None else scenario.n
    if n is None:
        raise PreconditionError("sample size n is required")
    B = _certified_B(F, P)
    b = F.sup_bound
    counts = draw_counts(P, n, K, seed, "bracket-curve", threads)
    curve = curve_from_counts(F, P, n, counts, resolution=resolution)
    threshold = epsilon_threshold(curve, B, b, x, n, c)
    eps = threshold if epsilon is None else float(epsilon)
    condition_met = eps >= threshold * (1 - 1e-12)
    br = epsilon_brackets(curve, eps, b)
    gate = interval_sups(F, P, n, counts, c1 / n, 0.0)
    gate_value, gate_se = float(gate.mean()), float(gate.std(ddof=1) / math.sqrt(gate.size))
    gate_holds = gate_value < br.peak - eps

    pf = _pfhat(F, P, n, replicates, seed, "brackets", threads)
    upper = max(1.0 / n, br.r_plus)
    upper_ok = pf <= upper + TOL
    lower_ok = pf >= br.r_minus - TOL
    target = 1 - math.exp(-x)
    upper_frac = float(upper_ok.mean())
    lower_frac = float(lower_ok.mean()) if gate_holds else None
    if not condition_met:
        passed = None
    else:
        passed = upper_frac >= target - slack and (lower_frac is None or lower_frac >= target - slack)
    return BracketReport(n, x, eps, threshold, condition_met, br, gate_value, gate_se, gate_holds,
                           replicates, upper, float((upper_ok & lower_ok).mean()), upper_frac, lower_frac,
                           target, slack, passed, fixed_point(curve, 0.25, 0.0), curve, pf)


@dataclass
class ConcentrationProfile:
    n: int
    K: int | str
    mean: float
    stderr: float
    quantiles: dict
    alpha_low: float | None
    alpha_high: float | None

    def as_dict(self):
        return {"n": self.n, "K": self.K, "mean": {"value": self.mean, "stderr": self.stderr},
                "quantiles": self.quantiles, "alpha_low": self.alpha_low, "alpha_high": self.alpha_high}

    def rows(self):
        yield ("mean", self.mean)
        yield ("stderr", self.stderr)
        for k, v in self.quantiles.items():
            yield (k, v)
        yield ("alpha_low", self.alpha_low)
        yield ("alpha_high", self.alpha_high)


def weighted_quantile(values, weights, q: float) -> float:
    """Inverse-CDF quantile: the smallest value whose cumulative weight reaches q."""
    order = np.argsort(values, kind="stable")
    v = np.asarray(values, dtype=float)[order]
    cw = np.cumsum(np.asarray(weights, dtype=float)[order])
    cw /= cw[-1]
    j = int(np.searchsorted(cw, q - 1e-12, side="left"))
    return float(v[min(j, v.size - 1)])


def concentration_profile(F, P: DiscreteMeasure, n: int, K=1000, seed: int = 0,
                          threads: int | None = None) -> ConcentrationProfile:
    """Mean and quantiles of sup_F |Pf - P_n f| over K samples.

    ``K="exact"`` weighs every possible sample by its probability instead.
    The alphas are quantile/mean - 1 at the 1% and 99% quantiles.
    """
    if K == "exact":
        counts, w = enumerate_counts(P, n)
    else:
        if int(K) < 100:
            raise PreconditionError("K must be at least 100")
        counts = draw_counts(P, n, int(K), seed, "concentration", threads)
        w = np.ones(counts.shape[0])
    p, emp, hull = deviation_profile(F, P, counts, n)
    sups = np.abs(p[None, :] - emp).max(axis=1)
    if hull:
        sups = np.maximum(sups, 0.0)
    w = w / w.sum()
    mean = float(np.dot(w, sups))
    if K == "exact":
        stderr = 0.0
    else:
        stderr = float(sups.std(ddof=1) / math.sqrt(sups.size))
    qs = {_qname(q): weighted_quantile(sups, w, q) for q in QUANTILES}
    lo = qs["q01"] / mean - 1 if mean > 0 else None
    hi = qs["q99"] / mean - 1 if mean > 0 else None
    return ConcentrationProfile(n, K, mean, stderr, qs, lo, hi)
