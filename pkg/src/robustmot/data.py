"""Empirical multiclass distributions: validation, file I/O and transport costs.

Class labels are 1-based in files and 0-based in memory.
"""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .geometry import INF, CostSpec, Point, as_point, cost
from .lp import Status, solve, transport_lp


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def parse_rational(text) -> Fraction:
    """Exact rational from "p/q", a decimal string or an int ("0.1" -> 1/10)."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, float):
        text = repr(text)  # shortest decimal form, as written in JSON
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DataError(f"not a rational number: {text!r}") from exc


@dataclass(frozen=True)
class WeightedPoint:
    point: Point
    mass: Fraction


@dataclass(frozen=True)
class Move:
    """``mass`` of class ``cls`` moved from source atom ``source`` to ``dest``."""

    cls: int
    source: int
    dest: Point
    mass: Fraction


def _merge(atoms: Iterable[tuple[Point, Fraction]]) -> tuple[WeightedPoint, ...]:
    acc: dict[Point, Fraction] = defaultdict(Fraction)
    for p, m in atoms:
        acc[p] += m
    return tuple(WeightedPoint(p, m) for p, m in sorted(acc.items()) if m != 0)


@dataclass(frozen=True)
class EmpiricalDistribution:
    classes: tuple[tuple[WeightedPoint, ...], ...]
    dimension: int

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[Sequence, int, object]], n_classes: int | None = None,
                   normalize: bool = False) -> "EmpiricalDistribution":
        """Build from ``(coords, label, mass)`` triples with 0-based labels."""
        rows = [(as_point(c), int(lbl), parse_rational(m)) for c, lbl, m in atoms]
        if not rows:
            raise DataError("no atoms")
        dim = len(rows[0][0])
        k = n_classes if n_classes is not None else max(r[1] for r in rows) + 1
        per: list[list[tuple[Point, Fraction]]] = [[] for _ in range(k)]
        for p, lbl, m in rows:
            if len(p) != dim or dim < 1:
                raise DataError(f"point {p} has dimension {len(p)}, expected {dim}")
            if not 0 <= lbl < k:
                raise DataError(f"label {lbl + 1} out of range 1..{k}")
            if m <= 0:
                raise DataError(f"nonpositive mass {m}")
            per[lbl].append((p, m))
        total = sum(m for _, _, m in rows)
        if total != 1:
            if not normalize:
                raise DataError(f"total mass is {total}, expected 1 (use normalize to rescale)")
            per = [[(p, m / total) for p, m in c] for c in per]
        return cls(tuple(_merge(c) for c in per), dim)

    def __post_init__(self):
        if len(self.classes) < 2:
            raise DataError("need at least two classes")
        for c in self.classes:
            for wp in c:
                if len(wp.point) != self.dimension:
                    raise DataError("inconsistent dimension")
                if wp.mass <= 0:
                    raise DataError("nonpositive mass")
        if self.total_mass != 1:
            raise DataError(f"total mass is {self.total_mass}, expected 1")

    @property
    def K(self) -> int:
        return len(self.classes)

    @property
    def total_mass(self) -> Fraction:
        return sum((wp.mass for c in self.classes for wp in c), Fraction(0))

    def class_mass(self, i: int) -> Fraction:
        return sum((wp.mass for wp in self.classes[i]), Fraction(0))

    def atoms(self):
        """Iterate ``(class, index, WeightedPoint)`` in canonical order."""
        for i, c in enumerate(self.classes):
            for j, wp in enumerate(c):
                yield i, j, wp

    def points(self) -> list[Point]:
        return [wp.point for _, _, wp in self.atoms()]

    def n_atoms(self) -> int:
        return sum(len(c) for c in self.classes)


@dataclass(frozen=True)
class PerturbedDistribution:
    classes: tuple[tuple[WeightedPoint, ...], ...]
    provenance: tuple[Move, ...] = ()

    @classmethod
    def from_moves(cls, mu: EmpiricalDistribution, moves: Iterable[Move]) -> "PerturbedDistribution":
        moves = tuple(moves)
        per: list[list[tuple[Point, Fraction]]] = [[] for _ in range(mu.K)]
        moved = defaultdict(Fraction)
        for mv in moves:
            per[mv.cls].append((mv.dest, mv.mass))
            moved[(mv.cls, mv.source)] += mv.mass
        for (i, j), m in moved.items():
            if m != mu.classes[i][j].mass:
                raise DataError(f"moves of atom ({i + 1}, {j}) carry {m}, atom has {mu.classes[i][j].mass}")
        if len(moved) != mu.n_atoms():
            raise DataError("every atom must be moved (possibly to itself)")
        return cls(tuple(_merge(c) for c in per), moves)

    @classmethod
    def identity(cls, mu: EmpiricalDistribution) -> "PerturbedDistribution":
        return cls.from_moves(mu, (Move(i, j, wp.point, wp.mass) for i, j, wp in mu.atoms()))

    @property
    def K(self) -> int:
        return len(self.classes)

    def class_mass(self, i: int) -> Fraction:
        return sum((wp.mass for wp in self.classes[i]), Fraction(0))


def transport_cost(mu: EmpiricalDistribution, nu: PerturbedDistribution, spec: CostSpec):
    """Sum over classes of the optimal transport cost; ``INF`` when no coupling is finite."""
    if mu.K != nu.K:
        raise DataError("class counts differ")
    total = Fraction(0)
    for i in range(mu.K):
        src, dst = mu.classes[i], nu.classes[i]
        if any(len(wp.point) != mu.dimension for wp in dst):
            raise DataError("dimension mismatch")
        if mu.class_mass(i) != nu.class_mass(i):
            return INF
        if not src:
            continue
        costs = {}
        for a, s in enumerate(src):
            for b, d in enumerate(dst):
                c = cost(s.point, d.point, spec)
                if c != INF:
                    costs[(a, b)] = c
        lp, _ = transport_lp([s.mass for s in src], [d.mass for d in dst], costs)
        res = solve(lp)
        if res.status != Status.OPTIMAL:
            return INF
        total += res.value
    return total


def coupling_cost(mu: EmpiricalDistribution, nu: PerturbedDistribution, spec: CostSpec):
    """Cost of the coupling recorded in ``nu.provenance`` (an upper bound on the optimum)."""
    total = Fraction(0)
    for mv in nu.provenance:
        c = cost(mu.classes[mv.cls][mv.source].point, mv.dest, spec)
        if c == INF:
            return INF
        total += c * mv.mass
    return total


# ---------------------------------------------------------------- file formats

def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _load_csv(text: str, normalize: bool) -> EmpiricalDistribution:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty CSV")
    try:
        parse_rational(rows[0][0])
    except DataError:
        rows = rows[1:]  # header
    atoms = []
    for n, r in enumerate(rows, 1):
        if len(r) < 3:
            raise DataError(f"row {n}: expected coord_1..coord_d,label,mass")
        try:
            label = int(r[-2].strip())
        except ValueError as exc:
            raise DataError(f"row {n}: label {r[-2]!r} is not an integer") from exc
        if label < 1:
            raise DataError(f"row {n}: label {label} out of range")
        coords = [parse_rational(c) for c in r[:-2]]
        atoms.append((coords, label - 1, parse_rational(r[-1])))
    dims = {len(a[0]) for a in atoms}
    if len(dims) != 1:
        raise DataError(f"inconsistent dimensions {sorted(dims)}")
    return EmpiricalDistribution.from_atoms(atoms, normalize=normalize)


def _load_json(text: str, normalize: bool) -> EmpiricalDistribution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "classes" not in doc:
        raise DataError("JSON must be an object with a 'classes' list")
    classes = doc["classes"]
    if not isinstance(classes, list) or len(classes) < 2:
        raise DataError("need at least two classes")
    dim = doc.get("dimension")
    atoms = []
    for i, cl in enumerate(classes):
        for a in cl:
            try:
                pt, m = a["point"], a["mass"]
            except (KeyError, TypeError) as exc:
                raise DataError(f"class {i + 1}: atom needs 'point' and 'mass'") from exc
            if dim is not None and len(pt) != dim:
                raise DataError(f"class {i + 1}: point {pt} does not have dimension {dim}")
            atoms.append(([parse_rational(c) for c in pt], i, parse_rational(m)))
    return EmpiricalDistribution.from_atoms(atoms, n_classes=len(classes), normalize=normalize)


def load_distribution(source, fmt: str = "csv", normalize: bool = False) -> EmpiricalDistribution:
    """Parse a distribution from bytes, text or a file object."""
    text = _read_text(source)
    if fmt == "csv":
        return _load_csv(text, normalize)
    if fmt == "json":
        return _load_json(text, normalize)
    raise DataError(f"unknown format {fmt!r}")


def dump_distribution(mu: EmpiricalDistribution, fmt: str = "csv") -> str:
    if fmt == "csv":
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([f"coord_{k + 1}" for k in range(mu.dimension)] + ["label", "mass"])
        for i, _, wp in mu.atoms():
            w.writerow([str(c) for c in wp.point] + [i + 1, str(wp.mass)])
        return out.getvalue()
    if fmt == "json":
        doc = {"dimension": mu.dimension,
               "classes": [[{"point": [str(c) for c in wp.point], "mass": str(wp.mass)} for wp in c]
                           for c in mu.classes]}
        return json.dumps(doc, indent=2) + "\n"
    raise DataError(f"unknown format {fmt!r}")
