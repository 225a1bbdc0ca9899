import numpy as np
import pytest
from conftest import brute_rademacher
from hypothesis import given, settings
from hypothesis import strategies as st

from ermlab.classes import DiscreteMeasure, FunctionClass, StarHull, make_measure
from ermlab.empirical import (
    Sample,
    draw_counts,
    draw_sample,
    empirical_mean,
    minimize_empirical,
    rademacher_average,
    sup_deviation,
)
from ermlab.errors import ResourceError
from ermlab.rng import make_stream


def test_sample_json_round_trip():
    s = Sample.from_indices([2, 0, 2, 1], 3, seed=17)
    doc = s.to_json()
    assert list(doc) == ["seed", "n", "indices"]
    back = Sample.from_json(doc, 3)
    assert back == s
    assert list(back.counts) == [1, 1, 2]


def test_sample_rejects_out_of_range():
    with pytest.raises(ValueError):
        Sample.from_indices([0, 3], 3)
    with pytest.raises(ValueError):
        Sample.from_json({"seed": 0, "n": 3, "indices": [0, 1]}, 2)


def test_draw_sample_is_deterministic():
    P = make_measure([1, 2, 3])
    a = draw_sample(P, 50, make_stream(5, "t", 2))
    b = draw_sample(P, 50, make_stream(5, "t", 2))
    c = draw_sample(P, 50, make_stream(5, "t", 3))
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)
    assert a.seed == b.seed


def test_draw_counts_independent_of_threads():
    P = make_measure([1, 2, 3, 4])
    a = draw_counts(P, 20, 40, 3, "x", threads=1)
    b = draw_counts(P, 20, 40, 3, "x", threads=4)
    assert np.array_equal(a, b)
    assert np.all(a.sum(axis=1) == 20)


def test_draw_sample_frequencies():
    P = DiscreteMeasure([0.2, 0.8])
    s = draw_sample(P, 20000, make_stream(0, "freq"))
    assert s.counts[1] / s.n == pytest.approx(0.8, abs=0.015)


def test_empirical_mean():
    s = Sample.from_indices([0, 1, 1, 1], 2)
    assert empirical_mean([4.0, 0.0], s) == 1.0


def test_exact_minimizer_explicit():
    P = DiscreteMeasure([0.5, 0.25, 0.25])
    F = FunctionClass([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    s = Sample.from_indices([0, 0, 2], 3)
    res = minimize_empirical(F, P, s)
    assert res.member_id == 1 and res.empirical_value == 0.0 and res.true_value == 0.25


def test_adversarial_modes_explicit():
    P = DiscreteMeasure([0.25, 0.25, 0.5])
    F = FunctionClass([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
    s = Sample.from_indices([0, 1, 1, 1], 3)
    # P_n = 0, 1/4, 3/4; slack rho/n = 1/4 admits members 0 and 1
    low = minimize_empirical(F, P, s, rho=1.0, mode="adversarial-low")
    high = minimize_empirical(F, P, s, rho=1.0, mode="adversarial-high")
    assert (low.member_id, high.member_id) == (1, 0)


def test_hull_exact_minimizer_prefers_zero():
    P = DiscreteMeasure([0.5, 0.5])
    H = StarHull(FunctionClass([[1.0, 0.0], [0.0, 1.0]]))
    s = Sample.from_indices([0, 0], 2)
    res = minimize_empirical(H, P, s)
    assert res.member_id is None and res.true_value == 0.0


def test_hull_exact_minimizer_negative_infimum():
    P = DiscreteMeasure([0.5, 0.5])
    H = StarHull(FunctionClass([[1.0, -1.0], [0.5, 0.5]]))
    s = Sample.from_indices([1, 1, 1], 2)
    res = minimize_empirical(H, P, s)
    assert res.member_id == 0 and res.scale == 1.0 and res.empirical_value == -1.0


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(1, 8), st.floats(0, 3),
       st.integers(0, 10_000))
def test_hull_adversarial_against_scale_grid(m, k, n, rho, seed):
    rng = np.random.default_rng(seed)
    P = make_measure(rng.uniform(0.1, 1, m))
    base = rng.uniform(-1, 1, size=(k, m))
    H = StarHull(FunctionClass(base))
    s = Sample.from_indices(rng.integers(0, m, n), m)
    p = base @ P.probs
    e = base @ s.counts / n
    scales = np.linspace(0, 1, 4001)
    emp = np.outer(e, scales)
    tru = np.outer(p, scales)
    inf = emp.min()
    feas = emp <= inf + rho / n + 1e-12
    low = minimize_empirical(H, P, s, rho, "adversarial-low")
    high = minimize_empirical(H, P, s, rho, "adversarial-high")
    step = np.abs(p).max() / 4000 + 1e-12
    assert low.empirical_value <= inf + rho / n + 1e-9
    assert high.empirical_value <= inf + rho / n + 1e-9
    # the analytic optimum is at least as extreme as any grid point, and close to the best one
    assert low.true_value <= tru[feas].min() + 1e-12
    assert high.true_value >= tru[feas].max() - 1e-12
    assert low.true_value >= tru[feas].min() - 2 * step - 1e-9
    assert high.true_value <= tru[feas].max() + 2 * step + 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_exact_rademacher_against_loops(seed):
    rng = np.random.default_rng(seed)
    m, n = 5, 8
    members = rng.uniform(-1, 1, size=(3, m))
    s = Sample.from_indices(rng.integers(0, m, n), m)
    est = rademacher_average(members, s)
    assert est.exact
    assert est.value == pytest.approx(brute_rademacher(members.tolist(), s.indices.tolist()), abs=1e-12)


def test_rademacher_known_values():
    s = Sample.from_indices([0, 1], 2)
    # a single function has zero average
    assert rademacher_average([[1.0, 2.0]], s).value == 0.0
    # {f, -f} gives E|sigma . f|/n: for f = (1, 1) that is 1/2
    assert rademacher_average([[1.0, 1.0], [-1.0, -1.0]], s).value == pytest.approx(0.5)
    assert rademacher_average(np.zeros((0, 2)), s).value == 0.0


def test_rademacher_exact_cap():
    s = Sample.from_indices(np.zeros(21, dtype=int), 1)
    with pytest.raises(ResourceError):
        rademacher_average([[1.0]], s)


def test_rademacher_monte_carlo_close_to_exact():
    rng = np.random.default_rng(9)
    members = rng.uniform(-1, 1, size=(6, 4))
    s = Sample.from_indices(rng.integers(0, 4, 12), 4)
    ex = rademacher_average(members, s)
    mc = rademacher_average(members, s, draws=20000, stream=make_stream(1, "rad"))
    assert abs(ex.value - mc.value) <= 4 * mc.stderr


def test_sup_deviation():
    P = DiscreteMeasure([0.5, 0.5])
    F = FunctionClass([[1.0, 0.0], [0.0, 1.0]])
    s = Sample.from_indices([0, 0, 0, 1], 2)
    d = sup_deviation(F, P, s)
    assert d.signed == pytest.approx(0.25) and d.absolute == pytest.approx(0.25)
    # over the hull the zero function keeps the signed sup nonnegative
    s2 = Sample.from_indices([0, 1], 2)
    assert sup_deviation(StarHull(F), P, s2).signed == 0.0
