import math

import numpy as np
import pytest
from conftest import all_samples

from ermlab.classes import DiscreteMeasure, FunctionClass, StarHull, make_measure
from ermlab.complexity import ComplexityCurve, exact_xi_curve
from ermlab.empirical import Sample, minimize_empirical
from ermlab.errors import PreconditionError
from ermlab.scenarios import Scenario, build_gap_class, gap_scenario
from ermlab.theorems import (
    concentration_profile,
    ratio_check,
    theorem12_bound,
    validate_theorem12,
    validate_theorem31,
    weighted_quantile,
)

PROBS = [0.1, 0.2, 0.3, 0.4]
BASE = [[1.0, 0.0, 0.0, 0.5], [0.0, 1.0, 0.0, 0.0], [0.2, 0.2, 1.0, 0.0]]


def _curve(grid, values, n=10):
    return ComplexityCurve(grid, values, np.zeros(len(grid)), 10, n)


def test_bound_takes_larger_term():
    c = _curve([0.01, 0.1, 0.5], [0.5, 0.01, 0.0], n=100)
    rep = theorem12_bound(c, b=1.0, B=1.0, x=1.0, n=100)
    assert rep.fixed_point_term == 0.1
    assert rep.confidence_term == pytest.approx(0.02)
    assert rep.bound == 0.1
    rep = theorem12_bound(c, b=1.0, B=1.0, x=50.0, n=100)
    assert rep.bound == pytest.approx(1.0)
    assert rep.target_rate == pytest.approx(math.exp(-50))


def test_bound_rejects_bad_x():
    with pytest.raises(ValueError):
        theorem12_bound(_curve([0.1], [0.0]), 1, 1, 0.0, 10)


def test_bound_validation_requires_hull_and_bernstein():
    P = DiscreteMeasure([0.5, 0.5])
    with pytest.raises(PreconditionError):
        validate_theorem12(FunctionClass([[1.0, 0.0]]), P, 10, 1.0)
    with pytest.raises(PreconditionError):
        validate_theorem12(StarHull(FunctionClass([[1.0, -1.0]])), P, 10, 1.0)


def test_exceedance_rate_on_small_hull_matches_enumeration():
    """Measured exceedance rate agrees with the exact probability over all 64 samples."""
    P = DiscreteMeasure(PROBS)
    # sign-changing base, so the zero function does not always win
    H = StarHull(FunctionClass([[1.0, -0.4, 0.0, 0.5], [-0.3, 1.0, 0.0, 0.2], [0.2, 0.2, 1.0, -0.5]]))
    n = 3
    curve = exact_xi_curve(H, P, n, np.geomspace(0.02, 1, 30))
    rep = validate_theorem12(H, P, n, 0.5, replicates=4000, seed=1, curve=curve, c=0.2)
    exact = 0.0
    for w, counts in all_samples(PROBS, n):
        s = Sample.from_indices(np.repeat(np.arange(4), counts), 4)
        if minimize_empirical(H, P, s).true_value > rep.bound + 1e-12:
            exact += w
    assert 0.05 < exact < 0.5
    sigma = math.sqrt(exact * (1 - exact) / 4000)
    assert abs(rep.violation_rate - exact) <= 3 * sigma + 1e-12


def test_ratio_check_exact_equality_has_no_violations():
    P = DiscreteMeasure([0.25, 0.25, 0.5])
    s = Sample.from_indices([0, 1, 2, 2], 3)
    F = FunctionClass([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    rep = ratio_check(F, P, s, 0.01)
    assert rep.checked == 3 and rep.violations == []


def test_ratio_check_flags_both_sides():
    P = DiscreteMeasure([0.5, 0.5])
    s = Sample.from_indices([0, 0, 0, 1], 2)
    F = FunctionClass([[1.0, 0.0], [0.0, 1.0]])
    rep = ratio_check(F, P, s, 0.1)
    sides = {(m, side) for m, _, _, side in rep.violations}
    assert sides == {(0, "lower"), (1, "upper")}
    # r_min above every Pf checks nothing
    assert ratio_check(F, P, s, 0.1, r_min=0.6).checked == 0


def test_ratio_additive_slack_b_is_vacuous_for_nonnegative_classes():
    rng = np.random.default_rng(2)
    P = make_measure(rng.uniform(0.1, 1, 5))
    F = FunctionClass(rng.uniform(0, 1, (6, 5)))
    for _ in range(20):
        s = Sample.from_indices(rng.integers(0, 5, 7), 5)
        assert ratio_check(F, P, s, 0.5, additive_r=F.sup_bound).violations == []


def test_ratio_check_hull_uses_base():
    P = DiscreteMeasure([0.5, 0.5])
    s = Sample.from_indices([0, 0, 0, 1], 2)
    rep = ratio_check(StarHull(FunctionClass([[1.0, 0.0]])), P, s, 0.1)
    assert rep.note and len(rep.violations) == 1


def test_brackets_degenerate_single_function():
    # the hull of one nonnegative f: the zero function always wins, so P f_hat = 0
    P = DiscreteMeasure([0.5, 0.5])
    sc = Scenario(StarHull(FunctionClass([[1.0, 0.0]])), P, "single", 20)
    rep = validate_theorem31(sc, replicates=100, K=200)
    assert np.all(rep.pfhat == 0.0)
    assert rep.brackets.r_minus == 0.0
    assert rep.inside_fraction == 1.0


def test_bracket_gate_controls_lower_bracket():
    spec = build_gap_class(64)
    rep = validate_theorem31(gap_scenario(spec), replicates=100, K=200, seed=3)
    d = rep.as_dict()
    assert d["lower_bracket_applied"] == rep.gate_holds
    if not rep.gate_holds:
        assert rep.lower_fraction is None
    assert d["condition_met"] and d["status"] == "evaluated"
    # below the threshold the verdict is withheld
    low = validate_theorem31(gap_scenario(spec), epsilon=rep.threshold / 2, replicates=100, K=200)
    assert low.passed is None and low.as_dict()["status"] == "condition unmet"


def test_weighted_quantile():
    assert weighted_quantile([3, 1, 2], [1, 1, 1], 0.5) == 2
    assert weighted_quantile([1, 2], [0.9, 0.1], 0.5) == 1
    assert weighted_quantile([1, 2], [0.9, 0.1], 0.95) == 2


def test_concentration_exact_matches_enumeration():
    P = DiscreteMeasure(PROBS)
    F = FunctionClass(BASE)
    prof = concentration_profile(F, P, 3, K="exact")
    base = np.array(BASE)
    vals, ws = [], []
    for w, counts in all_samples(PROBS, 3):
        e = base @ np.array(counts) / 3
        vals.append(float(np.max(np.abs(base @ np.array(PROBS) - e))))
        ws.append(w)
    vals, ws = np.array(vals), np.array(ws)
    assert prof.mean == pytest.approx(float(vals @ ws), abs=1e-12)
    order = np.argsort(vals, kind="stable")
    cw = np.cumsum(ws[order])
    for q, key in ((0.1, "q10"), (0.5, "q50"), (0.9, "q90")):
        want = vals[order][np.searchsorted(cw, q - 1e-12)]
        assert prof.quantiles[key] == pytest.approx(want, abs=1e-12)


def test_concentration_needs_enough_replicates():
    with pytest.raises(PreconditionError):
        concentration_profile(FunctionClass(BASE), DiscreteMeasure(PROBS), 10, K=50)
