"""Brute-force verifiers that share no code with the LP solver.

* ``matching_oracle``: for two classes the adversarial risk is the largest
  mass that can be paired across classes with ``d <= 2 eps``; computed with
  Edmonds-Karp on exact rationals.
* ``partition_oracle``: split every atom into equal unit masses and try every
  set partition of the units; feasible groups fit in one closed ball.
* ``grid_attack_oracle``: dense rational grid over each attack ball.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .classifier import BallMaxClassifier, _arrangement_1d
from .data import EmpiricalDistribution
from .geometry import CostSpec, Point, balls_intersect, compare_distance, min_enclosing_ball


class OracleError(ValueError):
    """Oracle preconditions not met."""


@dataclass
class OracleResult:
    value: Fraction
    certificate: Any
    exact: bool = True


# ------------------------------------------------------------------ matching

def _max_flow(n: int, cap: dict[tuple[int, int], Fraction], s: int, t: int):
    adj: list[set[int]] = [set() for _ in range(n)]
    res: dict[tuple[int, int], Fraction] = {}
    for (u, v), c in cap.items():
        adj[u].add(v)
        adj[v].add(u)
        res[(u, v)] = res.get((u, v), Fraction(0)) + c
        res.setdefault((v, u), Fraction(0))
    total = Fraction(0)
    while True:
        prev = {s: s}
        q = deque([s])
        while q and t not in prev:
            u = q.popleft()
            for v in sorted(adj[u]):
                if v not in prev and res[(u, v)] > 0:
                    prev[v] = u
                    q.append(v)
        if t not in prev:
            return total, res
        path = []
        v = t
        while v != s:
            path.append((prev[v], v))
            v = prev[v]
        push = min(res[e] for e in path)
        for u, v in path:
            res[(u, v)] -= push
            res[(v, u)] += push
        total += push


def matching_oracle(mu: EmpiricalDistribution, spec: CostSpec) -> OracleResult:
    """Maximum cross-class mass pairable with intersecting closed balls (K = 2)."""
    if mu.K != 2:
        raise OracleError("matching oracle needs K == 2")
    if spec.approx_n is not None:
        raise OracleError("matching oracle needs the budget cost")
    a, b = mu.classes
    s, t = 0, 1 + len(a) + len(b)
    big = Fraction(2)  # exceeds any single atom mass
    cap = {}
    for j, wp in enumerate(a):
        cap[(s, 1 + j)] = wp.mass
    for k, wp in enumerate(b):
        cap[(1 + len(a) + k, t)] = wp.mass
    for j, x in enumerate(a):
        for k, y in enumerate(b):
            if balls_intersect(x.point, y.point, spec.epsilon, True, spec.metric):
                cap[(1 + j, 1 + len(a) + k)] = big
    value, res = _max_flow(t + 1, cap, s, t)
    edges = []
    for (u, v), c in sorted(cap.items()):
        if 1 <= u <= len(a) and v > len(a) and v != t:
            flow = c - res[(u, v)]
            if flow > 0:
                edges.append((u - 1, v - 1 - len(a), flow))
    return OracleResult(value, edges)


def matching_value(mu: EmpiricalDistribution, edges) -> Fraction:
    """Re-evaluate a matching certificate (checks masses are respected)."""
    used = [[Fraction(0)] * len(c) for c in mu.classes]
    for j, k, m in edges:
        used[0][j] += m
        used[1][k] += m
    for i, c in enumerate(mu.classes):
        for j, wp in enumerate(c):
            if used[i][j] > wp.mass:
                raise OracleError("certificate exceeds atom mass")
    return sum((m for _, _, m in edges), Fraction(0))


# ----------------------------------------------------------------- partition

def unit_decomposition(mu: EmpiricalDistribution) -> tuple[Fraction, list[tuple[int, int]]]:
    """Common unit mass and the list of units as (class, atom) pairs."""
    masses = [wp.mass for _, _, wp in mu.atoms()]
    den = math.lcm(*(m.denominator for m in masses))
    num = math.gcd(*(m.numerator * (den // m.denominator) for m in masses))
    unit = Fraction(num, den)
    units = []
    for i, j, wp in mu.atoms():
        units.extend([(i, j)] * int(wp.mass / unit))
    return unit, units


def _group_score(group, K: int) -> int:
    counts = [0] * K
    for i, _ in group:
        counts[i] += 1
    return max(counts)


def partition_oracle(mu: EmpiricalDistribution, spec: CostSpec, cap: int = 10) -> OracleResult:
    """Best integral barycenter over set partitions of the unit atoms.

    Returns the risk ``1 - min lambda``; an LP optimum can only do better.
    """
    if spec.approx_n is not None:
        raise OracleError("partition oracle needs the budget cost")
    unit, units = unit_decomposition(mu)
    if len(units) > cap:
        raise OracleError(f"{len(units)} units exceed cap {cap}")
    feasible_cache: dict[frozenset, bool] = {}

    def feasible(members: frozenset) -> bool:
        if members not in feasible_cache:
            pts = [mu.classes[i][j].point for i, j in members]
            feasible_cache[members] = len(pts) == 1 or min_enclosing_ball(pts, spec.metric).fits(spec.epsilon)
        return feasible_cache[members]

    best = [len(units) + 1, None]
    groups: list[list[tuple[int, int]]] = []
    def rec(k: int, current: int):
        if current >= best[0]:
            return
        if k == len(units):
            best[0], best[1] = current, [list(g) for g in groups]
            return
        u = units[k]
        for g in groups:
            if feasible(frozenset(g) | {u}):
                before = _group_score(g, mu.K)
                g.append(u)
                rec(k + 1, current - before + _group_score(g, mu.K))
                g.pop()
        groups.append([u])
        rec(k + 1, current + 1)
        groups.pop()

    rec(0, 0)
    lam = best[0] * unit
    assert best[0] == sum(_group_score(g, mu.K) for g in best[1])
    return OracleResult(1 - lam, best[1])


def partition_value(mu: EmpiricalDistribution, spec: CostSpec, groups) -> Fraction:
    unit, units = unit_decomposition(mu)
    if sorted(u for g in groups for u in g) != sorted(units):
        raise OracleError("certificate is not a partition of the units")
    for g in groups:
        pts = [mu.classes[i][j].point for i, j in g]
        if len(set(g)) > 1 and not min_enclosing_ball(pts, spec.metric).fits(spec.epsilon):
            raise OracleError("certificate group does not fit in one ball")
    return 1 - unit * sum(_group_score(g, mu.K) for g in groups)


# --------------------------------------------------------------------- grid

def _grid_ball(x: Point, eps: Fraction, res: int, closed: bool, spec: CostSpec) -> list[Point]:
    steps = [eps * Fraction(k, res) for k in range(-res, res + 1)]
    if len(x) == 1:
        cand = [(x[0] + s,) for s in steps]
    else:
        cand = [(x[0] + s, x[1] + t) for s in steps for t in steps]
    out = []
    for z in cand:
        if z == x:
            out.append(z)
            continue
        c = compare_distance(x, z, eps, spec.metric)
        if c < 0 or (closed and c == 0):
            out.append(z)
    return out


def grid_attack_oracle(f: BallMaxClassifier, mu: EmpiricalDistribution, spec: CostSpec,
                       resolution: int = 32, closed: bool = True, refine: bool = True) -> OracleResult:
    """Grid lower bound on the closed (or open) ball risk of f.

    In dimension one with ``refine`` the grid is merged with the breakpoint
    arrangement of f, which makes the value exact.
    """
    if mu.dimension > 2:
        raise OracleError("grid attack supports dimension <= 2")
    eps = spec.epsilon
    value = Fraction(0)
    cert = []
    for i, j, wp in mu.atoms():
        if eps == 0:
            pts = [wp.point]
        else:
            pts = _grid_ball(wp.point, eps, resolution, closed, spec)
            if refine and mu.dimension == 1:
                breaks = [c[0] + s for c in f.centers for s in (f.radius, -f.radius)]
                pts += _arrangement_1d(breaks, wp.point, eps, closed)
        worst = max(pts, key=lambda z: (1 - f(z)[i], z))
        loss = 1 - f(worst)[i]
        cert.append((i, j, worst, loss))
        value += loss * wp.mass
    return OracleResult(value, cert, exact=mu.dimension == 1 and refine)
