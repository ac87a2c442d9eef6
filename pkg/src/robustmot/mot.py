"""Stratified multimarginal transport on empirical data.

One LP variable per *tuple atom*: a nonempty label subset together with one
support atom per label in it, merged at a common witness point.  The optimal
value is the mass of the smallest generalized barycenter; one minus it is the
adversarial (DRO) risk.  The equality-constraint multipliers are the dual
potentials, i.e. the heights of the robust classifier.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .data import EmpiricalDistribution, Move, PerturbedDistribution, WeightedPoint, _merge
from .geometry import (INF, CostSpec, Point, compare_distance, cost, merge_excess,
                       min_enclosing_ball)
from .lp import LpInstance, LpResult, Status, solve

DEFAULT_TUPLE_CAP = 2_000_000


class TupleCapExceeded(RuntimeError):
    """The number of tuple atoms exceeds the configured cap."""


@dataclass(frozen=True)
class TupleAtom:
    members: tuple[tuple[int, int], ...]  # (class, atom index), increasing class
    witness: Point
    cost: Fraction
    excess: Fraction = Fraction(0)  # approximate path: cost == n * excess

    @property
    def subset(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.members)


def _points(mu: EmpiricalDistribution, members) -> list[Point]:
    return [mu.classes[i][j].point for i, j in members]


def _combination_count(mu: EmpiricalDistribution) -> int:
    return math.prod(len(c) + 1 for c in mu.classes) - 1


def enumerate_tuples(mu: EmpiricalDistribution, spec: CostSpec, *, strict: bool = False,
                     cap: int = DEFAULT_TUPLE_CAP) -> list[TupleAtom]:
    """All tuple atoms with finite merge cost.

    With the budget cost only tuples whose enclosing ball fits in the budget
    survive (``strict`` asks for a radius strictly below it: the open-ball
    model); feasibility is inherited by sub-tuples, so infeasible partial
    tuples are pruned while extending class by class.  With the approximate
    cost every combination is kept.
    """
    if spec.approx_n is not None:
        total = _combination_count(mu)
        if total > cap:
            raise TupleCapExceeded(f"{total} tuples exceed cap {cap}")
        return _all_tuples(mu, spec)

    partial: list[tuple[tuple[tuple[int, int], ...], Point | None]] = [((), None)]
    for i, atoms in enumerate(mu.classes):
        grown = []
        for members, _ in partial:
            grown.append((members, _))
            for j in range(len(atoms)):
                ext = members + ((i, j),)
                if len(ext) == 1:
                    grown.append((ext, atoms[j].point))
                    continue
                ball = min_enclosing_ball(_points(mu, ext), spec.metric)
                if ball.fits(spec.epsilon, strict=strict):
                    grown.append((ext, ball.center))
            if len(grown) > cap + 1:
                raise TupleCapExceeded(f"more than {cap} tuples")
        partial = grown
    return [TupleAtom(m, w, Fraction(0)) for m, w in partial if m]


def _all_tuples(mu: EmpiricalDistribution, spec: CostSpec) -> list[TupleAtom]:
    partial: list[tuple] = [()]
    for i, atoms in enumerate(mu.classes):
        partial = [m for base in partial for m in [base] + [base + ((i, j),) for j in range(len(atoms))]]
    out = []
    for members in partial:
        if not members:
            continue
        h, w = merge_excess(_points(mu, members), spec)
        out.append(TupleAtom(members, w, spec.approx_n * h, h))
    return out


@dataclass
class MotSolution:
    mu: EmpiricalDistribution
    spec: CostSpec
    tuples: list[TupleAtom]
    masses: list[Fraction]
    primal_value: Fraction
    duals: list[list[Fraction]]  # duals[i][j]: potential of class i at atom j
    strict: bool = False
    lp_result: LpResult | None = field(default=None, repr=False)

    @property
    def dro_risk(self) -> Fraction:
        return 1 - self.primal_value

    @property
    def dual_value(self) -> Fraction:
        return sum((self.duals[i][j] * wp.mass for i, j, wp in self.mu.atoms()), Fraction(0))

    def active(self):
        return [(t, m) for t, m in zip(self.tuples, self.masses) if m > 0]


def build_lp(mu: EmpiricalDistribution, tuples: Sequence[TupleAtom]) -> LpInstance:
    index = {(i, j): r for r, (i, j, _) in enumerate(mu.atoms())}
    rows: list[dict[int, Fraction]] = [dict() for _ in index]
    for k, t in enumerate(tuples):
        for m in t.members:
            rows[index[m]][k] = Fraction(1)
    rhs = [wp.mass for _, _, wp in mu.atoms()]
    return LpInstance([1 + t.cost for t in tuples], rows, rhs, ["="] * len(rows))


def _within(x: Point, z: Point, spec: CostSpec, strict: bool) -> bool:
    if x == z:
        return True
    s = compare_distance(x, z, spec.epsilon, spec.metric)
    return s < 0 if strict else s <= 0


def repair_duals(mu: EmpiricalDistribution, spec: CostSpec, tuples: Sequence[TupleAtom],
                 g: list[list[Fraction]], strict: bool = False) -> list[list[Fraction]]:
    """Clamp to [0, inf) then apply the c-bar and c transforms on the witness grid.

    The result dominates the input pointwise; at an optimal dual it must leave
    the objective unchanged, anything else is a bug and raises.
    """
    gp = [[max(v, Fraction(0)) for v in row] for row in g]

    def f(i: int, z: Point) -> Fraction:
        vals = [gp[i][j] for j, wp in enumerate(mu.classes[i]) if _within(wp.point, z, spec, strict)]
        return max(vals + [Fraction(0)])

    witnesses = sorted({t.witness for t in tuples})
    out = []
    for i, atoms in enumerate(mu.classes):
        row = []
        for wp in atoms:
            cands = [wp.point] + [w for w in witnesses if _within(wp.point, w, spec, strict)]
            row.append(min(f(i, z) for z in cands))
        out.append(row)
    before = sum((g[i][j] * wp.mass for i, j, wp in mu.atoms()), Fraction(0))
    after = sum((out[i][j] * wp.mass for i, j, wp in mu.atoms()), Fraction(0))
    if after != before:
        raise RuntimeError(f"dual repair changed the objective: {before} -> {after}")
    return out


def solve_mot(mu: EmpiricalDistribution, spec: CostSpec, *, strict: bool = False,
              cap: int = DEFAULT_TUPLE_CAP, tuples: list[TupleAtom] | None = None) -> MotSolution:
    """Solve the stratified MOT exactly and return couplings and dual potentials."""
    if tuples is None:
        tuples = enumerate_tuples(mu, spec, strict=strict, cap=cap)
    lp = build_lp(mu, tuples)
    res = solve(lp)
    if res.status != Status.OPTIMAL:
        raise RuntimeError(f"MOT LP not optimal: {res.status}")  # singletons make it feasible
    duals: list[list[Fraction]] = []
    it = iter(res.dual)
    for atoms in mu.classes:
        duals.append([next(it) for _ in atoms])
    if spec.approx_n is None:
        duals = repair_duals(mu, spec, tuples, duals, strict)
    return MotSolution(mu, spec, tuples, res.primal, res.value, duals, strict, res)


def solve_mot_approx_sequence(mu: EmpiricalDistribution, spec: CostSpec, n_list: Sequence[int],
                              cap: int = DEFAULT_TUPLE_CAP) -> list[tuple[int, Fraction]]:
    """MOT values for the Lipschitz costs c_n, n in ``n_list`` (increasing)."""
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    base = enumerate_tuples(mu, spec.with_n(1), cap=cap)
    out = []
    for n in n_list:
        tuples = [TupleAtom(t.members, t.witness, n * t.excess, t.excess) for t in base]
        res = solve(build_lp(mu, tuples))
        out.append((n, res.value))
    return out


def approx_threshold(mu: EmpiricalDistribution, spec: CostSpec, cap: int = DEFAULT_TUPLE_CAP) -> int:
    """Smallest n guaranteeing the c_n value equals the budget-cost value.

    Once every infeasible tuple A costs at least |A| - 1, splitting it into
    singletons never costs more, so the c_n optimum is attained on feasible
    tuples only.
    """
    need = 1
    for t in enumerate_tuples(mu, spec.with_n(1), cap=cap):
        if t.excess > 0:
            need = max(need, math.ceil(Fraction(len(t.members) - 1) / t.excess))
    return need


@dataclass
class Barycenter:
    lam: tuple[WeightedPoint, ...]
    mu_tilde: tuple[tuple[WeightedPoint, ...], ...]
    couplings: tuple[Move, ...]

    @property
    def mass(self) -> Fraction:
        return sum((wp.mass for wp in self.lam), Fraction(0))

    def objective(self, mu: EmpiricalDistribution, spec: CostSpec):
        """lambda(X) plus the transport cost of the stored couplings."""
        total = self.mass
        for mv in self.couplings:
            c = cost(mu.classes[mv.cls][mv.source].point, mv.dest, spec)
            if c == INF:
                return INF
            total += c * mv.mass
        return total

    def perturbed(self, mu: EmpiricalDistribution) -> PerturbedDistribution:
        return PerturbedDistribution.from_moves(mu, self.couplings)


def barycenter_from_mot(sol: MotSolution, tuples: Sequence[TupleAtom] | None = None) -> Barycenter:
    """Place each tuple's mass at its witness: lambda gets it once, every member class once."""
    tuples = sol.tuples if tuples is None else tuples
    lam: list[tuple[Point, Fraction]] = []
    per: list[list[tuple[Point, Fraction]]] = [[] for _ in range(sol.mu.K)]
    moves: dict[tuple[int, int, Point], Fraction] = defaultdict(Fraction)
    for t, m in zip(tuples, sol.masses):
        if m == 0:
            continue
        lam.append((t.witness, m))
        for i, j in t.members:
            per[i].append((t.witness, m))
            moves[(i, j, t.witness)] += m
    couplings = tuple(Move(i, j, w, m) for (i, j, w), m in sorted(moves.items()))
    return Barycenter(_merge(lam), tuple(_merge(c) for c in per), couplings)


def exceptional_radii(mu: EmpiricalDistribution, spec: CostSpec, cap: int = DEFAULT_TUPLE_CAP) -> set[Fraction]:
    """Radius keys (squared for l2) of enclosing balls of cross-class tuples.

    Optimal open- and closed-ball risks can only differ at budgets whose key
    lies in this set.
    """
    if _combination_count(mu) > cap:
        raise TupleCapExceeded("too many tuples for the exceptional set")
    keys = set()
    partial: list[tuple] = [()]
    for i, atoms in enumerate(mu.classes):
        partial = [m for base in partial for m in [base] + [base + ((i, j),) for j in range(len(atoms))]]
    for members in partial:
        if len(members) >= 2:
            keys.add(min_enclosing_ball(_points(mu, members), spec.metric).key)
    return keys
