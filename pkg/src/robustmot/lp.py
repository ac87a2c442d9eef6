"""Exact rational linear programming (two-phase dense-tableau simplex).

Minimization form ``min c.x  s.t.  A x (=, <=, >=) b,  x >= 0``.  Bland's
least-index rule guarantees termination on degenerate instances.  Dual
multipliers come from the reduced costs of the columns that formed the
initial identity basis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

ZERO = Fraction(0)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpInstance:
    objective: list[Fraction]
    rows: list[Mapping[int, Fraction]]  # sparse rows: column -> coefficient
    rhs: list[Fraction]
    senses: list[str]  # "=", "<=" or ">="

    def __post_init__(self):
        self.objective = [Fraction(v) for v in self.objective]
        self.rows = [{int(j): Fraction(v) for j, v in row.items() if v != 0} for row in self.rows]
        self.rhs = [Fraction(v) for v in self.rhs]
        if not (len(self.rows) == len(self.rhs) == len(self.senses)):
            raise ValueError("rows, rhs and senses must have equal length")
        n = len(self.objective)
        for row in self.rows:
            if any(j < 0 or j >= n for j in row):
                raise ValueError("column index out of range")
        for s in self.senses:
            if s not in ("=", "<=", ">="):
                raise ValueError(f"unknown sense {s!r}")

    @property
    def n_vars(self) -> int:
        return len(self.objective)


@dataclass
class LpResult:
    status: Status
    primal: list[Fraction] = field(default_factory=list)
    dual: list[Fraction] = field(default_factory=list)
    value: Fraction | None = None


def _pivot(tab: list[list[Fraction]], z: list[Fraction], r: int, e: int) -> None:
    prow = tab[r]
    inv = 1 / prow[e]
    prow = [v * inv for v in prow]
    tab[r] = prow
    nz = [j for j, v in enumerate(prow) if v]
    for k, row in enumerate(tab):
        if k != r:
            f = row[e]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
    f = z[e]
    if f:
        for j in nz:
            z[j] -= f * prow[j]


def _run(tab, z, basis, allowed) -> bool:
    """Simplex iterations with Bland's rule; False when unbounded."""
    while True:
        e = next((j for j in range(len(z) - 1) if allowed[j] and z[j] < 0), None)
        if e is None:
            return True
        best = None
        for r, row in enumerate(tab):
            a = row[e]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            return False
        r = best[1]
        _pivot(tab, z, r, e)
        basis[r] = e


def solve(lp: LpInstance) -> LpResult:
    m, n = len(lp.rows), lp.n_vars
    flip = [b < 0 for b in lp.rhs]
    senses = []
    for s, f in zip(lp.senses, flip):
        senses.append({"<=": ">=", ">=": "<=", "=": "="}[s] if f else s)

    # Column layout: structural | slacks | artificials.
    slack_col, art_col = {}, {}
    ncols = n
    for r, s in enumerate(senses):
        if s != "=":
            slack_col[r] = ncols
            ncols += 1
    for r, s in enumerate(senses):
        if s != "<=":
            art_col[r] = ncols
            ncols += 1

    tab = []
    basis = []
    for r, row in enumerate(lp.rows):
        sign = -1 if flip[r] else 1
        t = [ZERO] * (ncols + 1)
        for j, v in row.items():
            t[j] = sign * v
        if r in slack_col:
            t[slack_col[r]] = Fraction(1) if senses[r] == "<=" else Fraction(-1)
        if r in art_col:
            t[art_col[r]] = Fraction(1)
        t[-1] = sign * lp.rhs[r]
        tab.append(t)
        basis.append(art_col.get(r, slack_col.get(r)))
    init_col = list(basis)
    is_art = [False] * ncols
    for c in art_col.values():
        is_art[c] = True

    # Phase 1: minimize the sum of artificials.
    z = [ZERO] * (ncols + 1)
    for c in art_col.values():
        z[c] = Fraction(1)
    for r in art_col:
        z = [a - b for a, b in zip(z, tab[r])]
    _run(tab, z, basis, [True] * ncols)
    if -z[-1] != 0:
        return LpResult(Status.INFEASIBLE)

    # Drive zero-level artificials out of the basis; rows where that is
    # impossible are redundant and keep their artificial at level 0.
    for r in range(m):
        if is_art[basis[r]]:
            e = next((j for j in range(ncols) if not is_art[j] and tab[r][j] != 0), None)
            if e is not None:
                _pivot(tab, z, r, e)
                basis[r] = e

    # Phase 2.
    z = [ZERO] * (ncols + 1)
    for j, c in enumerate(lp.objective):
        z[j] = c
    for r in range(m):
        cb = lp.objective[basis[r]] if basis[r] < n else ZERO
        if cb:
            z = [a - cb * b for a, b in zip(z, tab[r])]
    if not _run(tab, z, basis, [not a for a in is_art]):
        return LpResult(Status.UNBOUNDED)

    x = [ZERO] * n
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = tab[r][-1]
    dual = []
    for r in range(m):
        y = -z[init_col[r]]
        dual.append(-y if flip[r] else y)
    value = sum((c * v for c, v in zip(lp.objective, x)), ZERO)
    return LpResult(Status.OPTIMAL, x, dual, value)


def verify(lp: LpInstance, res: LpResult) -> bool:
    """Independent exact check of primal feasibility, value and strong duality."""
    if res.status != Status.OPTIMAL or res.value is None:
        return False
    x, y = res.primal, res.dual
    if len(x) != lp.n_vars or len(y) != len(lp.rows):
        return False
    if any(v < 0 for v in x):
        return False
    for row, b, s, yr in zip(lp.rows, lp.rhs, lp.senses, y):
        ax = sum((v * x[j] for j, v in row.items()), ZERO)
        if (s == "=" and ax != b) or (s == "<=" and ax > b) or (s == ">=" and ax < b):
            return False
        if (s == "<=" and yr > 0) or (s == ">=" and yr < 0):
            return False
    if sum((c * v for c, v in zip(lp.objective, x)), ZERO) != res.value:
        return False
    reduced = list(lp.objective)
    for row, yr in zip(lp.rows, y):
        if yr:
            for j, v in row.items():
                reduced[j] -= yr * v
    if any(d < 0 for d in reduced):
        return False
    return sum((b * yr for b, yr in zip(lp.rhs, y)), ZERO) == res.value


def transport_lp(supply: Sequence[Fraction], demand: Sequence[Fraction],
                 costs: Mapping[tuple[int, int], Fraction]) -> tuple[LpInstance, list[tuple[int, int]]]:
    """Balanced transportation LP over the finite-cost pairs in ``costs``."""
    pairs = sorted(costs)
    rows: list[dict[int, Fraction]] = [dict() for _ in range(len(supply) + len(demand))]
    for k, (a, b) in enumerate(pairs):
        rows[a][k] = Fraction(1)
        rows[len(supply) + b][k] = Fraction(1)
    lp = LpInstance([costs[p] for p in pairs], rows, list(supply) + list(demand),
                    ["="] * (len(supply) + len(demand)))
    return lp, pairs
