import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ermlab.classes import FunctionClass, JointDistribution, LossSpec
from ermlab.empirical import Sample, draw_sample
from ermlab.errors import InclusionError
from ermlab.rng import make_stream
from ermlab.scenarios import nested_classification_problem
from ermlab.selection import (
    eps_from_complexity,
    hypotheses_check,
    implication_audit,
    make_nested,
    oracle_check,
    select,
)

JOINT = JointDistribution.from_pairs([(0, 0.0, 0.3), (0, 1.0, 0.1), (1, 0.0, 0.2), (1, 1.0, 0.4)])
F1 = FunctionClass([[0.0, 0.0]])
F2 = FunctionClass([[0.0, 0.0], [0.0, 1.0]])
F3 = FunctionClass([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])


def test_inclusion_is_checked():
    with pytest.raises(InclusionError) as err:
        make_nested([F2, F1], LossSpec.discrete(), JOINT, [0.1, 0.2])
    assert err.value.class_index == 0 and err.value.member_index == 1


def test_eps_must_be_monotone():
    with pytest.raises(ValueError):
        make_nested([F1, F2], LossSpec.discrete(), JOINT, [0.2, 0.1])


def test_risks_and_minimizers():
    prob = make_nested([F1, F2, F3], LossSpec.discrete(), JOINT, [0.0, 0.01, 0.02])
    assert prob.best_risks() == pytest.approx([0.5, 0.3, 0.3])
    assert prob.oracle_target() == pytest.approx(min(0.5, 0.3 + 0.09, 0.3 + 0.18))


def test_select_uses_seven_halves_penalty():
    prob = make_nested([F1, F2, F3], LossSpec.discrete(), JOINT, [0.0, 0.02, 0.04])
    s = Sample.from_indices([0, 3], 4)
    sel = select(prob, s)
    for row, e in zip(sel.per_class, prob.eps):
        assert row["penalty"] == 3.5 * e
    # the all-zero labeling errs on pair (1,1); labeling (0,1) fits both points
    assert [r["emp_risk"] for r in sel.per_class] == [0.5, 0.0, 0.0]
    assert sel.chosen_k == 2 and sel.chosen_index == 1


def test_select_ties_go_to_smaller_k():
    prob = make_nested([F2, F3], LossSpec.discrete(), JOINT, [0.0, 0.0])
    s = Sample.from_indices([0, 1, 2, 3], 4)
    assert select(prob, s).chosen_k == 1


def test_hypotheses_margins_by_hand():
    prob = make_nested([F2], LossSpec.discrete(), JOINT, [0.05])
    # pairs: (0,0) (0,1) (1,0) (1,1); the sample hits (0,1) and (1,1) twice each
    s = Sample.from_indices([1, 1, 3, 3], 4)
    h = hypotheses_check(prob, s)
    # member 0 minus best member 1: excess risk 0.2, empirical excess 1 - 1/2
    assert h.margin1 == pytest.approx(max(0.2 - 1.0 - 0.05, -0.05))
    assert h.margin2 == pytest.approx(0.5 - 0.4 - 0.05)
    assert h.h1 and not h.h2


def _random_problem(rng, atoms=3):
    labels = [tuple(rng.integers(0, 2, atoms).astype(float)) for _ in range(6)]
    labels = list(dict.fromkeys(labels))
    k1, k2 = max(1, len(labels) // 3), max(1, 2 * len(labels) // 3)
    classes = [FunctionClass(labels[:k1]), FunctionClass(labels[:k2]), FunctionClass(labels)]
    w = rng.uniform(0.1, 1, 2 * atoms)
    w /= w.sum()
    pairs = [(x, float(y), float(w[2 * x + y])) for x in range(atoms) for y in (0, 1)]
    eps = np.sort(rng.uniform(0, 0.3, 3))
    return make_nested(classes, LossSpec.discrete(), JointDistribution.from_pairs(pairs), eps)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(5, 40))
def test_oracle_inequality_whenever_hypotheses_hold(seed, n):
    rng = np.random.default_rng(seed)
    prob = _random_problem(rng)
    for r in range(10):
        s = draw_sample(prob.measure, n, make_stream(seed, "prop", r))
        h = hypotheses_check(prob, s)
        if h.h1 and h.h2:
            assert oracle_check(prob, select(prob, s)) <= 1e-12


def test_audit_on_nested_scenario():
    prob = nested_classification_problem()
    rep = implication_audit(prob, 100, replicates=200, seed=0)
    assert rep.hypotheses_true > 0
    assert rep.violations == 0 and rep.passed
    assert sum(rep.chosen_counts.values()) == 200


def test_audit_independent_of_threads():
    prob = nested_classification_problem()
    a = implication_audit(prob, 50, replicates=40, seed=1, threads=1)
    b = implication_audit(prob, 50, replicates=40, seed=1, threads=3)
    assert a.as_dict() == b.as_dict()


def test_eps_from_complexity_is_monotone():
    prob = nested_classification_problem()
    s = draw_sample(prob.measure, 100, make_stream(0, "eps"))
    eps = eps_from_complexity(prob, s, draws=200)
    assert eps.shape == (3,) and np.all(np.diff(eps) >= 0) and np.all(eps > 0)
