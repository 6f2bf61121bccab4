import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from hetbo.optimizer import (
    LOG_FLOOR,
    ParetoFront,
    dominates,
    ehvi,
    hypervolume_2d,
    log_expected_improvement,
    pareto_front,
    reference_point,
)
from oracles import brute_force_front, improvement_integral, mc_expected_improvement, union_area

point_sets = st.lists(
    st.tuples(st.integers(0, 12).map(float), st.integers(0, 12).map(float)), min_size=1, max_size=40
)


# -- Pareto front ---------------------------------------------------------------


def test_front_example():
    f = pareto_front([(1, 3), (2, 2), (3, 1), (2.5, 2.5)])
    assert f.points.tolist() == [[1, 3], [2, 2], [3, 1]]
    assert f.indices == (0, 1, 2)
    assert pareto_front([(4, 5)]).indices == (0,)


def test_duplicates_keep_lowest_index():
    f = pareto_front([(2, 2), (1, 3), (2, 2)], indices=[7, 8, 3])
    assert f.indices == (8, 3)


def test_dominates():
    assert dominates((1, 1), (1, 2)) and not dominates((1, 2), (1, 2)) and not dominates((0, 3), (1, 2))


@given(point_sets)
def test_front_matches_brute_force(points):
    f = pareto_front(points)
    assert sorted(f.indices) == brute_force_front(points)
    # sorted by first objective, strictly decreasing second objective
    assert np.all(np.diff(f.points[:, 0]) > 0) and np.all(np.diff(f.points[:, 1]) < 0)
    for p in f.points:
        assert not any(dominates(q, p) for q in f.points)


# -- hypervolume ----------------------------------------------------------------


def test_hypervolume_examples():
    assert hypervolume_2d(pareto_front([(1, 1)]), (2, 2)) == 1.0
    assert hypervolume_2d(pareto_front([(1, 2), (2, 1)]), (3, 3)) == 3.0
    assert hypervolume_2d(pareto_front(np.empty((0, 2))), (3, 3)) == 0.0
    assert hypervolume_2d(pareto_front([(3, 1)]), (3, 3)) == 0.0
    with pytest.raises(ValueError):
        hypervolume_2d(pareto_front([(4, 1)]), (3, 3))


@given(point_sets)
def test_hypervolume_matches_union_of_boxes(points):
    ref = (13.0, 13.0)
    assert hypervolume_2d(np.array(points), ref) == pytest.approx(union_area(points, ref), rel=1e-12, abs=1e-12)


@given(point_sets, st.tuples(st.floats(0, 12), st.floats(0, 12)))
def test_hypervolume_monotone(points, p):
    ref = (13.0, 13.0)
    assert hypervolume_2d(np.array(points + [p]), ref) >= hypervolume_2d(np.array(points), ref) - 1e-12


def test_reference_point_margin():
    assert reference_point(np.array([[0.0, 1.0], [2.0, 3.0]])) == pytest.approx((2.2, 3.2))
    assert reference_point(np.array([[5.0, -2.0]])) == pytest.approx((5.5, -1.8))


# -- LogEI ----------------------------------------------------------------------


def test_log_ei_examples():
    assert log_expected_improvement(-1.0, 0.0, 0.0) == pytest.approx(0.0)
    assert log_expected_improvement(0.0, 1.0, 0.0) == pytest.approx(math.log(norm.pdf(0)), abs=1e-12)
    assert log_expected_improvement(0.0, 1.0, 0.0) == pytest.approx(-0.91894, abs=1e-5)
    assert log_expected_improvement(1.0, 0.0, 0.0) == LOG_FLOOR


def test_log_ei_deep_tail_against_direct_formula():
    # Where the direct formula is still representable it must agree.
    for z in (-2.0, -5.0, -8.0):
        direct = norm.pdf(z) + z * norm.cdf(z)
        assert log_expected_improvement(-z, 1.0, 0.0) == pytest.approx(math.log(direct), rel=1e-9)


def test_log_ei_extreme_tail_finite_and_monotone():
    z = -np.logspace(0, 6, 200)
    vals = log_expected_improvement(-z, np.ones_like(z), 0.0)
    assert np.all(np.isfinite(vals)) and np.all(vals >= LOG_FLOOR)
    assert np.all(np.diff(vals) <= 0)
    # asymptotic form: log h(z) ~ -z^2/2 - log(sqrt(2 pi)) - 2 log|z|
    zz = 1.2e3  # past the asymptotic switch, still above the floor
    assert log_expected_improvement(zz, 1.0, 0.0) == pytest.approx(-zz * zz / 2 - 0.5 * math.log(2 * math.pi) - 2 * math.log(zz), rel=1e-9)


@given(mu=st.floats(-5, 5), sd=st.floats(1e-3, 3), best=st.floats(-5, 5))
def test_log_ei_matches_closed_form(mu, sd, best):
    z = (best - mu) / sd
    ei = sd * (norm.pdf(z) + z * norm.cdf(z))
    if ei > 1e-250:
        assert float(np.exp(log_expected_improvement(mu, sd * sd, best))) == pytest.approx(ei, rel=1e-7)


def test_log_ei_monte_carlo_small():
    rng = np.random.default_rng(0)
    for mu, sd, best in [(0.0, 1.0, 0.5), (1.0, 0.5, 0.0), (2.0, 0.25, 0.0)]:
        est, se = mc_expected_improvement(mu, sd, best, 200_000, rng)
        assert abs(float(np.exp(log_expected_improvement(mu, sd * sd, best))) - est) <= 3 * se


# -- EHVI -----------------------------------------------------------------------

FRONT = pareto_front([(1.0, 4.0), (2.0, 2.5), (3.5, 1.0)])
REF = (5.0, 5.0)


def test_ehvi_deterministic_limits():
    dominated = ehvi([[3.0, 3.0]], [[0.0, 0.0]], FRONT, REF)
    assert dominated[0] == 0.0
    on_front = ehvi([[2.0, 2.5]], [[0.0, 0.0]], FRONT, REF)
    assert on_front[0] == 0.0
    p = (1.5, 2.0)
    gain = hypervolume_2d(np.vstack([FRONT.points, p]), REF) - hypervolume_2d(FRONT, REF)
    assert ehvi([p], [[0.0, 0.0]], FRONT, REF)[0] == pytest.approx(gain, rel=1e-12)


def test_ehvi_empty_front_is_product_of_moments():
    empty = ParetoFront(np.empty((0, 2)), ())
    mu, var = np.array([[1.0, 2.0]]), np.array([[0.5, 0.2]])
    s = np.sqrt(var[0])
    g = [(REF[k] - mu[0, k]) * norm.cdf((REF[k] - mu[0, k]) / s[k]) + s[k] * norm.pdf((REF[k] - mu[0, k]) / s[k]) for k in range(2)]
    assert ehvi(mu, var, empty, REF)[0] == pytest.approx(g[0] * g[1], rel=1e-12)


@given(
    st.lists(st.tuples(st.floats(0, 4), st.floats(0, 4)), min_size=1, max_size=6),
    st.tuples(st.floats(-1, 5), st.floats(-1, 5)),
)
def test_ehvi_deterministic_matches_integral(front_pts, p):
    front = pareto_front(front_pts)
    got = ehvi([p], [[0.0, 0.0]], front, REF)[0]
    want = improvement_integral(np.array([p]), front.points, REF)[0]
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_ehvi_monte_carlo_small():
    rng = np.random.default_rng(1)
    mu, sd = np.array([1.8, 2.2]), np.array([0.6, 0.8])
    draws = mu + sd * rng.standard_normal((100_000, 2))
    vals = improvement_integral(draws, FRONT.points, REF)
    got = ehvi([mu], [sd**2], FRONT, REF)[0]
    assert abs(got - vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(len(vals))


@given(st.lists(st.tuples(st.floats(0, 4), st.floats(0, 4)), min_size=1, max_size=6), st.integers(0, 1000))
def test_ehvi_non_negative(front_pts, seed):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-1, 6, (16, 2))
    var = rng.uniform(0, 2, (16, 2))
    assert np.all(ehvi(mu, var, pareto_front(front_pts), REF) >= 0)
