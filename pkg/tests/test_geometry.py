import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustmot.geometry import (INF, CostSpec, Metric, balls_intersect, c_A, compare_distance, cost, cost_eps,
                                cost_n, distance, merge_excess, min_enclosing_ball)

quarter = st.integers(-12, 12).map(lambda k: F(k, 4))
budgets = st.integers(0, 6).map(lambda k: F(k, 4))
metrics = st.sampled_from([Metric.L2, Metric.LINF])


def points(dim):
    return st.tuples(*[quarter] * dim)


# ----------------------------------------------------------------- distance

def test_distance_examples():
    assert distance((F(0), F(0)), (F(3), F(4)), Metric.L2) == 5
    assert distance((F(0), F(0)), (F(3), F(4)), Metric.LINF) == 4
    assert distance((F(1),), (F(1),), Metric.L2) == 0


def test_irrational_distance_is_float_but_comparisons_exact():
    p, q = (F(0), F(0)), (F(1), F(1))
    assert isinstance(distance(p, q, Metric.L2), float)
    assert compare_distance(p, q, F(141421, 100000), Metric.L2) == 1
    assert compare_distance(p, q, F(141422, 100000), Metric.L2) == -1


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        distance((F(0),), (F(0), F(1)), Metric.L2)


@given(points(2), points(2), points(2), metrics)
def test_metric_axioms(p, q, r, m):
    assert distance(p, q, m) == distance(q, p, m)
    assert (distance(p, q, m) == 0) == (p == q)
    assert distance(p, r, m) <= distance(p, q, m) + distance(q, r, m) + 1e-12


# -------------------------------------------------------------------- costs

def test_cost_eps_boundary_included():
    spec = CostSpec(Metric.L2, F(1, 2))
    assert cost_eps((F(0),), (F(1, 2),), spec) == 0
    assert cost_eps((F(3),), (F(3),), spec) == 0
    assert cost_eps((F(0),), (F(1),), spec) == INF
    # 3-4-5 triangle scaled: distance exactly 1/2
    assert cost_eps((F(0), F(0)), (F(3, 10), F(2, 5)), spec) == 0


@pytest.mark.parametrize("d, expected", [(F(3, 10), 0), (F(1), 1), (F(3), 2)])
def test_cost_n_examples(d, expected):
    spec = CostSpec(Metric.L2, F(1, 2), 2)
    assert cost_n((F(0),), (d,), spec) == expected


def brute_cost_n(d: F, eps: F, n: int, step: F = F(1, 20)) -> F:
    """Grid minimization of c(x~, x~') + n d(x, x~) + n d(x', x~'), capped at n."""
    grid = [F(-1) + k * step for k in range(int((d + 2) / step) + 1)]
    best = None
    for a in grid:
        for b in grid:
            if abs(a - b) <= eps:
                v = n * abs(a) + n * abs(d - b)
                best = v if best is None or v < best else best
    return min(best, F(n))


@pytest.mark.parametrize("d", [F(0), F(1, 4), F(1, 2), F(7, 10), F(1), F(3, 2), F(3)])
@pytest.mark.parametrize("n", [1, 2, 5])
def test_cost_n_closed_form_matches_defining_infimum(d, n):
    eps = F(1, 2)
    assert cost_n((F(0),), (d,), CostSpec(Metric.L2, eps, n)) == brute_cost_n(d, eps, n)


@given(points(2), points(2), budgets, metrics, st.integers(1, 20))
def test_cost_n_monotone_and_below_budget_cost(p, q, eps, m, n):
    a = cost(p, q, CostSpec(m, eps, n))
    b = cost(p, q, CostSpec(m, eps, n + 1))
    assert 0 <= a <= b <= cost(p, q, CostSpec(m, eps))
    assert cost(p, q, CostSpec(m, eps, n)) == cost(q, p, CostSpec(m, eps, n))
    assert cost(p, q, CostSpec(m, eps)) == cost(q, p, CostSpec(m, eps))


@given(points(2), points(2), budgets, metrics, st.integers(1, 50))
def test_cost_n_diverges_outside_budget(p, q, eps, m, big):
    spec = CostSpec(m, eps, 1)
    if cost_eps(p, q, spec.with_n(None)) == 0:
        assert cost_n(p, q, spec.with_n(1000)) == 0
    else:
        unit = cost_n(p, q, spec)  # = min(d - eps, 1) > 0
        n0 = math.ceil(big / unit)
        assert cost_n(p, q, spec.with_n(n0)) >= big


# ------------------------------------------------------------ enclosing ball

def grid_enclosing_key(pts, metric, lo=-1, hi=3, step=F(1, 8)):
    """Smallest max-distance key over centers on a rational grid."""
    ticks = [lo + k * step for k in range(int((hi - lo) / step) + 1)]
    best = None
    for x in ticks:
        for y in ticks:
            c = (x, y)
            if metric == Metric.L2:
                k = max(sum((a - b) ** 2 for a, b in zip(c, p)) for p in pts)
            else:
                k = max(max(abs(a - b) for a, b in zip(c, p)) for p in pts)
            best = k if best is None or k < best else best
    return best


def test_meb_examples():
    b = min_enclosing_ball([(F(0), F(0)), (F(2), F(0))], Metric.L2)
    assert b.center == (1, 0) and b.radius == 1
    tri = [(F(0), F(0)), (F(2), F(0)), (F(1), F(2))]
    b = min_enclosing_ball(tri, Metric.L2)
    assert b.center == (1, F(3, 4)) and b.radius == F(5, 4)
    assert grid_enclosing_key(tri, Metric.L2) == b.key
    b = min_enclosing_ball(tri, Metric.LINF)
    assert b.center == (1, 1) and b.radius == 1
    assert grid_enclosing_key(tri, Metric.LINF) == b.key


def test_meb_empty_rejected():
    with pytest.raises(ValueError):
        min_enclosing_ball([], Metric.L2)


@given(st.lists(points(2), min_size=1, max_size=6), metrics)
def test_meb_properties(pts, m):
    b = min_enclosing_ball(pts, m)
    assert all(b.contains(p) for p in pts)
    diam = max(distance(p, q, m) for p in pts for q in pts)
    assert diam / 2 - 1e-12 <= b.radius <= diam + 1e-12
    # nothing on a coarse grid beats it
    assert grid_enclosing_key(pts, m, lo=-3, hi=3, step=F(1, 4)) >= b.key


@given(st.lists(points(3), min_size=1, max_size=5), metrics)
def test_meb_three_dims_contains(pts, m):
    b = min_enclosing_ball(pts, m)
    assert all(b.contains(p) for p in pts)


# --------------------------------------------------------------------- c_A

def test_c_a_examples():
    spec = CostSpec(Metric.L2, F(1, 2))
    assert c_A([(F(3),)], spec) == (0, (3,))
    assert c_A([(F(0),), (F(1),)], spec) == (0, (F(1, 2),))
    val, w = c_A([(F(0),), (F(1, 2),), (F(1),)], CostSpec(Metric.L2, F(2, 5)))
    assert val == INF and w == (0,)


@given(st.lists(points(1), min_size=1, max_size=4), budgets, st.integers(1, 6))
def test_merge_excess_exact_in_one_dim(pts, eps, n):
    spec = CostSpec(Metric.L2, eps, n)
    h, w = merge_excess(pts, spec)

    def h_at(x):
        return sum(min(max(F(0), abs(x - p[0]) - eps), F(1)) for p in pts)

    assert h_at(w[0]) == h
    # breakpoints are on the 1/4 grid, so a 1/4 grid search is exhaustive
    assert min(h_at(F(k, 4)) for k in range(-24, 25)) == h
    assert c_A(pts, spec)[0] == n * h


@given(points(2), points(2), budgets, metrics)
def test_merge_excess_pair_closed_form(p, q, eps, m):
    h, w = merge_excess([p, q], CostSpec(m, eps, 1))
    d = distance(p, q, m)
    assert abs(float(h) - min(max(0.0, float(d) - 2 * float(eps)), 1.0)) < 1e-9


@given(st.lists(points(2), min_size=3, max_size=4), budgets, metrics)
def test_merge_excess_numeric_matches_grid(pts, eps, m):
    h, w = merge_excess(pts, CostSpec(m, eps, 1))
    arr = np.array([[float(c) for c in p] for p in pts])
    order = 2 if m == Metric.L2 else np.inf
    step = 0.05
    xs = np.arange(-4, 4 + step / 2, step)
    gx, gy = np.meshgrid(xs, xs)
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d = np.linalg.norm(grid[:, None, :] - arr[None, :, :], ord=order, axis=2)
    vals = np.minimum(np.maximum(d - float(eps), 0.0), 1.0).sum(axis=1)
    lip = len(pts) * step  # h is |A|-Lipschitz; grid cells have half-diagonal < step
    assert float(h) <= vals.min() + 1e-6
    assert float(h) >= vals.min() - lip - 1e-6


@given(st.lists(points(2), min_size=1, max_size=4), budgets, metrics)
def test_c_a_finite_iff_enclosing_ball_fits(pts, eps, m):
    val, w = c_A(pts, CostSpec(m, eps))
    b = min_enclosing_ball(pts, m)
    assert (val == 0) == b.fits(eps)
    if val == 0:
        assert all(compare_distance(p, w, eps, m) <= 0 for p in pts)


@given(st.lists(points(2), min_size=2, max_size=2), budgets, metrics)
def test_c_a_n_monotone_limit(pts, eps, m):
    vals = [c_A(pts, CostSpec(m, eps, n))[0] for n in (1, 2, 4, 8, 64)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    if c_A(pts, CostSpec(m, eps))[0] == 0:
        assert vals[-1] == 0
    else:
        assert vals[-1] > vals[0] > 0


# ------------------------------------------------------------ ball overlap

def test_balls_intersect_examples():
    x, y = (F(0),), (F(1),)
    assert balls_intersect(x, y, F(1, 2), True, Metric.L2)
    assert not balls_intersect(x, y, F(1, 2), False, Metric.L2)
    assert balls_intersect(x, x, F(0), True, Metric.L2)
    assert balls_intersect(x, x, F(0), False, Metric.L2)


@given(points(2), points(2), budgets, metrics)
def test_balls_intersect_matches_midpoint(x, y, eps, m):
    mid = tuple((a + b) / 2 for a, b in zip(x, y))
    closed = compare_distance(x, mid, eps, m) <= 0
    assert balls_intersect(x, y, eps, True, m) == closed
