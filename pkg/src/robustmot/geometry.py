"""Metrics, budget costs and enclosing balls on exact rational points.

Points are tuples of :class:`fractions.Fraction`.  Euclidean distances are
generally irrational, so every threshold test goes through squared
quantities; only the final numeric value of a Euclidean distance is ever
approximated.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

Point = tuple  # tuple[Fraction, ...]
INF = math.inf

# Denominator grid (2**-40) used when an irrational cost must be rounded down.
APPROX_BITS = 40
# Absolute accuracy of the numerical minimization behind merge_excess for
# tuples of three or more points outside dimension one.
NUMERIC_TOL = 1e-7


class Metric(str, enum.Enum):
    L2 = "l2"
    LINF = "linf"


def as_point(coords: Iterable) -> Point:
    return tuple(Fraction(c) for c in coords)


def _check_dims(p: Sequence, q: Sequence) -> None:
    if len(p) != len(q):
        raise ValueError(f"dimension mismatch: {len(p)} vs {len(q)}")


def dist_key(p: Point, q: Point, metric: Metric) -> Fraction:
    """Exact monotone proxy of d(p, q): squared distance for l2, distance for linf."""
    _check_dims(p, q)
    if metric == Metric.L2:
        return sum(((a - b) * (a - b) for a, b in zip(p, q)), Fraction(0))
    return max((abs(a - b) for a, b in zip(p, q)), default=Fraction(0))


def radius_key(r: Fraction, metric: Metric) -> Fraction:
    r = Fraction(r)
    return r * r if metric == Metric.L2 else r


def key_to_length(key: Fraction, metric: Metric):
    """Turn a distance key back into a length (exact when rational)."""
    if metric == Metric.LINF:
        return key
    root = exact_sqrt(key)
    return root if root is not None else math.sqrt(key)


def compare_distance(p: Point, q: Point, r, metric: Metric) -> int:
    """Sign of d(p, q) - r, computed exactly for a nonnegative rational r."""
    a, b = dist_key(p, q, metric), radius_key(r, metric)
    return (a > b) - (a < b)


def exact_sqrt(q: Fraction):
    """Rational square root of q, or None when it is irrational."""
    q = Fraction(q)
    if q < 0:
        raise ValueError("negative argument")
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def sqrt_lower(q: Fraction, bits: int = APPROX_BITS) -> Fraction:
    """Largest multiple of 2**-bits that is <= sqrt(q)."""
    q = Fraction(q)
    root = exact_sqrt(q)
    if root is not None and (root * 2**bits).denominator == 1:
        return root
    scale = 4**bits
    return Fraction(math.isqrt(q.numerator * scale // q.denominator), 2**bits)


def distance(p: Point, q: Point, metric: Metric):
    """d(p, q); a Fraction whenever the value is rational, otherwise a float."""
    return key_to_length(dist_key(p, q, metric), metric)


def distance_lower(p: Point, q: Point, metric: Metric, bits: int = APPROX_BITS) -> Fraction:
    """d(p, q) when rational, otherwise rounded down to the 2**-bits grid."""
    key = dist_key(p, q, metric)
    if metric == Metric.LINF:
        return key
    root = exact_sqrt(key)
    return root if root is not None else sqrt_lower(key, bits)


@dataclass(frozen=True)
class CostSpec:
    """Metric, adversarial budget and optional Lipschitz-approximation index."""

    metric: Metric = Metric.L2
    epsilon: Fraction = Fraction(0)
    approx_n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.approx_n is not None and self.approx_n < 1:
            raise ValueError("approx_n must be a positive integer")

    def with_n(self, n: int | None) -> "CostSpec":
        return CostSpec(self.metric, self.epsilon, n)


def cost_eps(p: Point, q: Point, spec: CostSpec):
    """0 inside the closed budget ball, infinite outside."""
    return Fraction(0) if compare_distance(p, q, spec.epsilon, spec.metric) <= 0 else INF


def _excess_lower(p: Point, q: Point, slack: Fraction, metric: Metric) -> Fraction:
    # max(0, d(p,q) - slack) rounded down, but never to 0 when d > slack.
    if compare_distance(p, q, slack, metric) <= 0:
        return Fraction(0)
    bits = APPROX_BITS
    while True:
        excess = distance_lower(p, q, metric, bits) - slack
        if excess > 0:
            return excess
        bits *= 2


def cost_n(p: Point, q: Point, spec: CostSpec) -> Fraction:
    """Bounded Lipschitz approximation min(n * max(0, d - eps), n) of the budget cost.

    On a geodesic space the infimum over moved endpoints reduces to this closed
    form.  Irrational Euclidean values are rounded down to the 2**-40 grid, so
    the monotonicity in n stays exact.
    """
    if spec.approx_n is None:
        raise ValueError("cost_n needs spec.approx_n")
    return spec.approx_n * min(_excess_lower(p, q, spec.epsilon, spec.metric), Fraction(1))


def cost(p: Point, q: Point, spec: CostSpec):
    return cost_eps(p, q, spec) if spec.approx_n is None else cost_n(p, q, spec)


class Ball(NamedTuple):
    center: Point
    key: Fraction  # squared radius (l2) or radius (linf)
    metric: Metric

    @property
    def radius(self):
        return key_to_length(self.key, self.metric)

    def contains(self, p: Point) -> bool:
        return dist_key(self.center, p, self.metric) <= self.key

    def fits(self, eps, strict: bool = False) -> bool:
        """Radius <= eps, or < eps when strict; a single point always fits."""
        r = radius_key(eps, self.metric)
        return self.key < r or self.key == 0 if strict else self.key <= r


def _solve_exact(mat: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan on a square rational system; None if singular."""
    n = len(mat)
    a = [row[:] + [b] for row, b in zip(mat, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def _circumball(boundary: list[Point]) -> Ball | None:
    """Smallest l2 ball having every boundary point on its sphere."""
    p0 = boundary[0]
    if len(boundary) == 1:
        return Ball(p0, Fraction(0), Metric.L2)
    vecs = [tuple(a - b for a, b in zip(p, p0)) for p in boundary[1:]]
    # Keep a maximal affinely independent subset, the rest must be cospherical.
    basis: list[tuple] = []
    for v in vecs:
        trial = basis + [v]
        gram = [[sum(a * b for a, b in zip(u, w)) for w in trial] for u in trial]
        if _solve_exact(gram, [Fraction(0)] * len(trial)) is not None:
            basis = trial
    gram = [[sum(a * b for a, b in zip(u, w)) for w in basis] for u in basis]
    rhs = [sum(a * a for a in u) / 2 for u in basis]
    lam = _solve_exact(gram, rhs)
    if lam is None:
        return None
    center = tuple(c + sum((l * u[k] for l, u in zip(lam, basis)), Fraction(0))
                   for k, c in enumerate(p0))
    key = dist_key(center, p0, Metric.L2)
    if any(dist_key(center, p, Metric.L2) != key for p in boundary):
        return None
    return Ball(center, key, Metric.L2)


def _welzl(points: list[Point], boundary: list[Point], dim: int) -> Ball | None:
    if not points or len(boundary) == dim + 1:
        return _circumball(boundary) if boundary else None
    p = points[-1]
    ball = _welzl(points[:-1], boundary, dim)
    if ball is not None and ball.contains(p):
        return ball
    return _welzl(points[:-1], boundary + [p], dim)


def min_enclosing_ball(points: Sequence[Point], metric: Metric) -> Ball:
    """Smallest closed ball containing every point, computed exactly."""
    if not points:
        raise ValueError("min_enclosing_ball of an empty set")
    dim = len(points[0])
    for p in points:
        _check_dims(points[0], p)
    uniq = sorted(set(tuple(Fraction(c) for c in p) for p in points))
    if metric == Metric.LINF or dim == 1:
        lo = [min(p[k] for p in uniq) for k in range(dim)]
        hi = [max(p[k] for p in uniq) for k in range(dim)]
        center = tuple((a + b) / 2 for a, b in zip(lo, hi))
        half = max((b - a) / 2 for a, b in zip(lo, hi))
        return Ball(center, radius_key(half, metric), Metric(metric))
    ball = _welzl(uniq, [], dim)
    assert ball is not None and all(ball.contains(p) for p in uniq)
    return ball


def _excess_sum(x: Point, points: Sequence[Point], spec: CostSpec) -> Fraction:
    return sum((min(_excess_lower(x, p, spec.epsilon, spec.metric), Fraction(1))
                for p in points), Fraction(0))


def _floor_grid(v: float, bits: int = APPROX_BITS) -> Fraction:
    return Fraction(math.floor(v * 2**bits), 2**bits)


def merge_excess(points: Sequence[Point], spec: CostSpec) -> tuple[Fraction, Point]:
    """min over x' of sum_i min(max(0, d(x', x_i) - eps), 1), with a minimizer.

    The approximate merge cost of a tuple is n times this value, so it is
    computed once per tuple and reused for every n.  Exact for feasible tuples,
    pairs (up to 2**-40 rounding for irrational l2 lengths) and dimension one;
    numerical with tolerance NUMERIC_TOL otherwise, clipped below by the
    certified bound min(R - eps, 1) with R the enclosing radius.
    """
    pts = list(points)
    eps, metric = spec.epsilon, spec.metric
    ball = min_enclosing_ball(pts, metric)
    if ball.fits(eps):
        return Fraction(0), ball.center
    if len(pts) == 2:
        a, b = pts
        gap = _excess_lower(a, b, 2 * eps, metric)
        if gap < 1:
            return gap, tuple((u + v) / 2 for u, v in zip(a, b))
        return Fraction(1), a
    dim = len(pts[0])
    if dim == 1:
        knots = sorted({p[0] + s for p in pts for s in (eps, -eps, eps + 1, -eps - 1)})
        return min((_excess_sum((t,), pts, spec), (t,)) for t in knots)
    return _merge_excess_numeric(pts, ball, spec)


def _merge_excess_numeric(pts: list[Point], ball: Ball, spec: CostSpec):
    import numpy as np
    from scipy.optimize import minimize

    eps = float(spec.epsilon)
    arr = np.array([[float(c) for c in p] for p in pts])
    order = 2 if spec.metric == Metric.L2 else np.inf

    def h(z):
        d = np.linalg.norm(arr - z, ord=order, axis=1)
        return float(np.minimum(np.maximum(d - eps, 0.0), 1.0).sum())

    starts = [np.array([float(c) for c in ball.center])] + list(arr)
    starts += [(a + b) / 2 for a, b in itertools.combinations(arr, 2)]
    best_val, best_z = math.inf, starts[0]
    for z0 in starts:
        res = minimize(h, z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        for z, v in ((res.x, float(res.fun)), (z0, h(z0))):
            if v < best_val:
                best_val, best_z = v, z
    witness = tuple(Fraction(float(c)).limit_denominator(10**9) for c in best_z)
    # Lower certificate: the farthest point is at least the enclosing radius away.
    floor_bound = min(_excess_lower(ball.center, _far_point(ball, pts), spec.epsilon, spec.metric),
                      Fraction(1))
    value = max(_floor_grid(max(best_val - NUMERIC_TOL, 0.0)), floor_bound)
    return value, witness


def _far_point(ball: Ball, pts: list[Point]) -> Point:
    return max(pts, key=lambda p: dist_key(ball.center, p, ball.metric))


def c_A(points: Sequence[Point], spec: CostSpec):
    """Cheapest cost of merging the points at a common location, with the location.

    Budget cost: 0 at the enclosing-ball center when that ball fits in the
    budget, otherwise infinite (witness is the first point).  Approximate cost:
    n times :func:`merge_excess`.
    """
    pts = list(points)
    if not pts:
        raise ValueError("c_A of an empty tuple")
    if spec.approx_n is not None:
        h, w = merge_excess(pts, spec)
        return spec.approx_n * h, w
    ball = min_enclosing_ball(pts, spec.metric)
    if ball.fits(spec.epsilon):
        return Fraction(0), ball.center
    return INF, pts[0]


def balls_intersect(x: Point, y: Point, eps, closed: bool, metric: Metric) -> bool:
    """Whether B(x, eps) meets B(y, eps); open mode has one of the balls open."""
    if x == y:
        return True
    s = compare_distance(x, y, 2 * Fraction(eps), metric)
    return s <= 0 if closed else s < 0
