"""Robust ball-max classifiers and their adversarial risks.

A ball-max classifier is ``f_i(z) = max{h : (c, i, h) an atom, d(c, z) <= r}``
(0 when no ball reaches ``z``).  Risks need ``inf f_i`` over an attack ball.
In dimension one this is exact: ``f`` is piecewise constant between the
breakpoints ``c +- r``, so breakpoints and cell midpoints inside the ball are
enough.  In higher dimension the infimum is taken over a finite candidate set
(centers, witnesses, midpoints, pushed-away and boundary samples), which gives
a lower bound on the risk.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .data import EmpiricalDistribution, Move, PerturbedDistribution, coupling_cost, transport_cost
from .geometry import INF, CostSpec, Metric, Point, compare_distance
from .mot import Barycenter, MotSolution

SHRINK = Fraction(1023, 1024)


@dataclass(frozen=True)
class BallAtom:
    center: Point
    cls: int
    height: Fraction


@dataclass
class BallMaxClassifier:
    atoms: tuple[BallAtom, ...]
    radius: Fraction
    K: int
    metric: Metric = Metric.L2
    open_balls: bool = False
    binary_slack: bool = False  # K == 2: report f_2 as 1 - f_1
    _by_class: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.radius = Fraction(self.radius)
        self.metric = Metric(self.metric)
        if self.binary_slack and self.K != 2:
            raise ValueError("binary slack assignment needs K == 2")
        for a in self.atoms:
            if not 0 <= a.height <= 1 or not 0 <= a.cls < self.K:
                raise ValueError(f"bad atom {a}")
        self._by_class = [sorted(((a.height, a.center) for a in self.atoms if a.cls == i),
                                 key=lambda t: -t[0]) for i in range(self.K)]

    def reaches(self, center: Point, z: Point) -> bool:
        if center == z:
            return True
        s = compare_distance(center, z, self.radius, self.metric)
        return s < 0 if self.open_balls else s <= 0

    def raw(self, z: Point) -> list[Fraction]:
        out = []
        for atoms in self._by_class:
            out.append(next((h for h, c in atoms if self.reaches(c, z)), Fraction(0)))
        return out

    def __call__(self, z: Point) -> list[Fraction]:
        v = self.raw(z)
        if self.binary_slack:
            v[1] = 1 - v[0]
        return v

    @property
    def centers(self) -> list[Point]:
        return sorted({a.center for a in self.atoms})

    def normalized(self) -> "BallMaxClassifier":
        """Assign the slack 1 - f_1 - f_2 to class 2 (binary problems only)."""
        return BallMaxClassifier(self.atoms, self.radius, self.K, self.metric, self.open_balls, True)

    def scaled(self, t: Fraction) -> "BallMaxClassifier":
        atoms = tuple(BallAtom(a.center, a.cls, a.height * t) for a in self.atoms)
        return BallMaxClassifier(atoms, self.radius, self.K, self.metric, self.open_balls, self.binary_slack)


def build_classifier(sol: MotSolution, drop_zero: bool = True) -> BallMaxClassifier:
    """Heights are the dual potentials, balls have the budget radius.

    A solution of the open-ball (strict) problem yields open balls.
    """
    atoms = tuple(BallAtom(wp.point, i, sol.duals[i][j]) for i, j, wp in sol.mu.atoms()
                  if sol.duals[i][j] > 0 or not drop_zero)
    return BallMaxClassifier(atoms, sol.spec.epsilon, sol.mu.K, sol.spec.metric, sol.strict)


def classifier_from_duals(mu: EmpiricalDistribution, duals, spec: CostSpec,
                          open_balls: bool = False) -> BallMaxClassifier:
    atoms = tuple(BallAtom(wp.point, i, Fraction(duals[i][j])) for i, j, wp in mu.atoms()
                  if duals[i][j] > 0)
    return BallMaxClassifier(atoms, spec.epsilon, mu.K, spec.metric, open_balls)


def witnesses(sol: MotSolution | None) -> list[Point]:
    return [] if sol is None else sorted({t.witness for t in sol.tuples})


# ------------------------------------------------------------ candidate points

def _inside(x: Point, z: Point, eps: Fraction, closed: bool, metric: Metric) -> bool:
    if x == z:
        return True
    s = compare_distance(x, z, eps, metric)
    return s <= 0 if closed else s < 0


def _arrangement_1d(breaks: Iterable[Fraction], x: Point, eps: Fraction, closed: bool) -> list[Point]:
    (c,) = x
    lo, hi = c - eps, c + eps
    knots = sorted({lo, hi, c} | {b for b in breaks if lo < b < hi})
    pts = set(knots[1:-1]) | {c}
    if closed:
        pts |= {lo, hi}
    pts |= {(a + b) / 2 for a, b in zip(knots, knots[1:])}
    return [(p,) for p in sorted(pts)]


def _norm(v: Sequence[float], metric: Metric) -> float:
    return math.sqrt(sum(t * t for t in v)) if metric == Metric.L2 else max(abs(t) for t in v)


def _push(x: Point, v: Sequence[float], length: Fraction, eps: Fraction, closed: bool,
          metric: Metric) -> Point | None:
    """Rational point about ``length`` from x in direction v, kept inside the ball."""
    nv = _norm(v, metric)
    if nv == 0:
        return None
    scale = float(length) / nv
    for _ in range(8):
        z = tuple(c + Fraction(t * scale).limit_denominator(1 << 30) for c, t in zip(x, v))
        if _inside(x, z, eps, closed, metric):
            return z
        scale *= float(SHRINK)
    return None


def _directions(dim: int) -> list[tuple[float, ...]]:
    dirs = []
    for k in range(dim):
        for s in (1.0, -1.0):
            dirs.append(tuple(s if m == k else 0.0 for m in range(dim)))
    if dim == 2:
        dirs += [(math.cos(2 * math.pi * k / 16), math.sin(2 * math.pi * k / 16)) for k in range(16)]
    elif dim <= 4:
        for mask in range(1 << dim):
            dirs.append(tuple(-1.0 if mask >> m & 1 else 1.0 for m in range(dim)))
    return dirs


def ball_points(ref: BallMaxClassifier, x: Point, eps: Fraction, closed: bool,
                extra: Sequence[Point] = ()) -> list[Point]:
    """Finite set of points of the attack ball around x (closed or open).

    Exhaustive for the values of any classifier sharing ``ref``'s centers and
    radius when the dimension is one.
    """
    eps = Fraction(eps)
    if eps == 0:
        return [x]
    metric, r = ref.metric, ref.radius
    if len(x) == 1:
        breaks = [c[0] + s for c in ref.centers for s in (r, -r)]
        return _arrangement_1d(breaks, x, eps, closed)
    pts = {x}
    for z in list(extra) + ref.centers:
        if _inside(x, z, eps, closed, metric):
            pts.add(z)
    fx = [float(c) for c in x]
    for c in ref.centers:
        if c == x:
            continue
        mid = tuple((a + b) / 2 for a, b in zip(x, c))
        if _inside(x, mid, eps, closed, metric):
            pts.add(mid)
        away = [a - float(b) for a, b in zip(fx, c)]
        for length in (eps, eps / 2):
            z = _push(x, away, length if closed else length * SHRINK, eps, closed, metric)
            if z is not None:
                pts.add(z)
    for d in _directions(len(x)):
        for length in (eps, eps / 2):
            z = _push(x, d, length if closed else length * SHRINK, eps, closed, metric)
            if z is not None:
                pts.add(z)
    return sorted(pts)


def inf_over_ball(f: BallMaxClassifier, i: int, x: Point, eps: Fraction, closed: bool,
                  extra: Sequence[Point] = (), ref: BallMaxClassifier | None = None) -> Fraction:
    return min(f(z)[i] for z in ball_points(ref or f, x, eps, closed, extra))


# ------------------------------------------------------------------- risks

def nominal_risk(f: BallMaxClassifier, mu: EmpiricalDistribution) -> Fraction:
    return sum(((1 - f(wp.point)[i]) * wp.mass for i, _, wp in mu.atoms()), Fraction(0))


def _attack_risk(f, mu, eps, closed, extra=(), ref=None) -> Fraction:
    return sum(((1 - inf_over_ball(f, i, wp.point, eps, closed, extra, ref)) * wp.mass
                for i, _, wp in mu.atoms()), Fraction(0))


def closed_ball_risk_bounds(f: BallMaxClassifier, mu: EmpiricalDistribution,
                            sol: MotSolution | None = None, eps: Fraction | None = None,
                            ref: BallMaxClassifier | None = None) -> tuple[Fraction, Fraction]:
    """(lower, upper) bounds on the closed-ball adversarial risk of f.

    The lower bound maximizes over candidate attacks (exact in dimension one).
    The upper bound is the dual bound sum (1 - g) mass when ``sol`` is the
    solution f was built from, otherwise the exact value in dimension one and
    the trivial 1 elsewhere.
    """
    eps = Fraction(eps if eps is not None else (sol.spec.epsilon if sol else f.radius))
    lower = _attack_risk(f, mu, eps, True, witnesses(sol), ref)
    if sol is not None:
        upper = sum(((1 - sol.duals[i][j]) * wp.mass for i, j, wp in mu.atoms()), Fraction(0))
    elif mu.dimension == 1:
        upper = lower
    else:
        upper = Fraction(1)
    return lower, upper


def open_ball_risk_lower(f: BallMaxClassifier, mu: EmpiricalDistribution, eps: Fraction | None = None,
                         extra: Sequence[Point] = (), ref: BallMaxClassifier | None = None) -> Fraction:
    """Lower bound on the open-ball adversarial risk of f (exact in dimension one)."""
    eps = Fraction(eps if eps is not None else f.radius)
    return _attack_risk(f, mu, eps, False, extra, ref)


def risk_on(f: BallMaxClassifier, nu: PerturbedDistribution) -> Fraction:
    return sum(((1 - f(wp.point)[i]) * wp.mass for i, c in enumerate(nu.classes) for wp in c),
               Fraction(0))


def dro_objective(f: BallMaxClassifier, mu: EmpiricalDistribution, nu: PerturbedDistribution,
                  spec: CostSpec):
    """R(f, nu) - C(mu, nu); ``-inf`` when no finite coupling exists."""
    c = transport_cost(mu, nu, spec)
    if c == INF:
        return -INF
    return risk_on(f, nu) - c


# ---------------------------------------------------------------- checks

def simplex_violations(f: BallMaxClassifier, points: Iterable[Point]) -> list[Point]:
    bad = []
    for z in points:
        v = f.raw(z)
        if any(t < 0 or t > 1 for t in v) or sum(v) > 1:
            bad.append(z)
    return bad


def evaluation_points(f: BallMaxClassifier, mu: EmpiricalDistribution, eps: Fraction,
                      extra: Sequence[Point] = ()) -> list[Point]:
    pts = set(extra) | set(f.centers)
    for _, _, wp in mu.atoms():
        pts.update(ball_points(f, wp.point, eps, True, extra))
    return sorted(pts)


def c_transform_mismatches(f: BallMaxClassifier, sol: MotSolution) -> list[tuple[int, int, Fraction, Fraction]]:
    """Atoms where g_i(x) differs from min over the attack ball of f_i(z) + c(x, z)."""
    extra = witnesses(sol)
    out = []
    for i, j, wp in sol.mu.atoms():
        val = inf_over_ball(f, i, wp.point, sol.spec.epsilon, not sol.strict, extra)
        if val != sol.duals[i][j]:
            out.append((i, j, sol.duals[i][j], val))
    return out


@dataclass
class SaddleReport:
    dro: Fraction
    at_barycenter: Fraction
    best_response: Fraction
    trials: int
    left_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (not self.left_violations and self.at_barycenter == self.dro
                and self.dro <= self.best_response)


def _random_offset(rng: random.Random, dim: int, eps: Fraction, metric: Metric) -> tuple[Fraction, ...]:
    den = 64
    while True:
        v = [Fraction(rng.randint(-den, den), den) for _ in range(dim)]
        if metric == Metric.LINF or dim == 1 or sum(t * t for t in v) <= 1:
            return tuple(eps * t for t in v)


def random_perturbation(mu: EmpiricalDistribution, spec: CostSpec, rng: random.Random,
                        targets: Sequence[Point] = ()) -> PerturbedDistribution:
    """Move each atom (possibly split in two) to random points of its closed budget ball."""
    moves = []
    for i, j, wp in mu.atoms():
        reach = [t for t in targets if _inside(wp.point, t, spec.epsilon, True, spec.metric)]
        parts = [wp.mass] if rng.random() < 0.5 else [wp.mass / 2, wp.mass / 2]
        for m in parts:
            if reach and rng.random() < 0.3:
                dest = rng.choice(reach)
            else:
                dest = tuple(a + b for a, b in zip(wp.point, _random_offset(rng, mu.dimension, spec.epsilon, spec.metric)))
            moves.append(Move(i, j, dest, m))
    return PerturbedDistribution.from_moves(mu, moves)


def saddle_check(f: BallMaxClassifier, bary: Barycenter, mu: EmpiricalDistribution, spec: CostSpec,
                 trials: int = 100, seed: int = 0, exact_lp_trials: int = 3) -> SaddleReport:
    """Both saddle inequalities for (f, barycenter adversary).

    Left: random feasible perturbations never beat the DRO value.  Right: the
    best classifier against the barycenter perturbation (pointwise argmax for
    the 0-1 loss) does no better than the DRO value.
    """
    rng = random.Random(seed)
    dro = 1 - bary.objective(mu, spec)
    star = bary.perturbed(mu)
    at_star = dro_objective(f, mu, star, spec)
    targets = sorted({wp.point for wp in bary.lam} | set(f.centers))
    violations = []
    for k in range(trials):
        nu = random_perturbation(mu, spec, rng, targets)
        c = transport_cost(mu, nu, spec) if k < exact_lp_trials else coupling_cost(mu, nu, spec)
        if c != 0:  # moves stay within budget, so the optimal cost is 0 as well
            violations.append(("nonzero cost", k, c))
            continue
        val = risk_on(f, nu)
        if val > dro:
            violations.append(("left inequality", k, val))
    by_point: dict[Point, list[Fraction]] = {}
    for i, cl in enumerate(star.classes):
        for wp in cl:
            by_point.setdefault(wp.point, [Fraction(0)] * mu.K)[i] += wp.mass
    best = 1 - sum((max(v) for v in by_point.values()), Fraction(0)) - transport_cost(mu, star, spec)
    return SaddleReport(dro, at_star, best, trials, violations)


@dataclass
class TvReport:
    fidelity: Fraction
    tv_terms: list[Fraction]
    recombined: Fraction
    open_risk: Fraction
    exact: bool

    @property
    def ok(self) -> bool:
        return self.recombined == self.open_risk and all(t >= 0 for t in self.tv_terms)


def tv_decomposition(f: BallMaxClassifier, mu: EmpiricalDistribution, eps: Fraction,
                     extra: Sequence[Point] = ()) -> TvReport:
    """Nominal risk plus eps times the nonlocal total variation of each class."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("total variation needs a positive budget")
    fidelity = Fraction(0)
    tv = [Fraction(0)] * mu.K
    open_risk = Fraction(0)
    for i, _, wp in mu.atoms():
        here = f(wp.point)[i]
        low = inf_over_ball(f, i, wp.point, eps, False, extra)
        fidelity += (1 - here) * wp.mass
        tv[i] += (here - low) * wp.mass / eps
        open_risk += (1 - low) * wp.mass
    recombined = fidelity + eps * sum(tv, Fraction(0))
    return TvReport(fidelity, tv, recombined, open_risk, mu.dimension == 1)


@dataclass
class CoareaReport:
    soft_risk: Fraction
    bands: list[tuple[Fraction, Fraction, Fraction]]  # (lo, hi, hard risk on (lo, hi])
    weighted: Fraction
    exact: bool
    optimal: Fraction | None = None

    @property
    def identity_holds(self) -> bool:
        return self.weighted == self.soft_risk

    @property
    def all_bands_optimal(self) -> bool:
        return self.optimal is not None and all(r == self.optimal for lo, hi, r in self.bands if hi > lo)


def threshold_classifier(f: BallMaxClassifier, t: Fraction) -> BallMaxClassifier:
    """Hard pair (1{f_1 >= t}, 1{f_1 < t}) in ball-max form, t > 0."""
    atoms = tuple(BallAtom(a.center, 0, Fraction(1)) for a in f.atoms if a.cls == 0 and a.height >= t)
    return BallMaxClassifier(atoms, f.radius, 2, f.metric, f.open_balls, True)


def threshold_and_coarea(f: BallMaxClassifier, mu: EmpiricalDistribution, eps: Fraction,
                         optimal: Fraction | None = None, extra: Sequence[Point] = ()) -> CoareaReport:
    """Closed-ball risk of (f_1, 1 - f_1) versus the band-weighted risks of its thresholds."""
    if f.K != 2 or mu.K != 2:
        raise ValueError("thresholding needs K == 2")
    soft = f.normalized()
    eps = Fraction(eps)

    def risk(g: BallMaxClassifier) -> Fraction:
        return _attack_risk(g, mu, eps, True, extra, ref=f)

    levels = sorted({Fraction(0), Fraction(1)} | {a.height for a in f.atoms if a.cls == 0})
    bands = []
    for lo, hi in zip(levels, levels[1:]):
        bands.append((lo, hi, risk(threshold_classifier(f, hi))))
    weighted = sum(((hi - lo) * r for lo, hi, r in bands), Fraction(0))
    return CoareaReport(risk(soft), bands, weighted, mu.dimension == 1, optimal)


@dataclass
class RiskReport:
    nominal: Fraction
    closed_lower: Fraction
    closed_upper: Fraction
    open_lower: Fraction
    dro: Fraction
    open_optimal: Fraction | None
    tv_terms: list[Fraction]
    exact: bool
    flags: dict[str, bool] = field(default_factory=dict)


def reporting_classifier(f: BallMaxClassifier) -> BallMaxClassifier:
    """Binary problems report f_2 = 1 - f_1; K >= 3 stays raw."""
    return f.normalized() if f.K == 2 else f


def risk_report(sol: MotSolution, open_sol: MotSolution | None = None) -> tuple[BallMaxClassifier, RiskReport]:
    """Risks of the classifier built from ``sol`` (normalized when K == 2)."""
    f = build_classifier(sol)
    fr = reporting_classifier(f)
    mu, eps = sol.mu, sol.spec.epsilon
    extra = witnesses(sol)
    lower, upper = closed_ball_risk_bounds(fr, mu, sol, ref=f)
    open_lower = open_ball_risk_lower(fr, mu, eps, extra, ref=f)
    tv = tv_decomposition(fr, mu, eps, extra).tv_terms if eps > 0 else [Fraction(0)] * mu.K
    rep = RiskReport(nominal_risk(fr, mu), lower, upper, open_lower, sol.dro_risk,
                     open_sol.dro_risk if open_sol else None, tv, mu.dimension == 1)
    rep.flags = {
        "closed_lower<=dro": lower <= sol.dro_risk,
        "dro==closed_upper": sol.dro_risk == upper,
        "closed_bounds_meet": lower == upper,
        "open_lower<=closed_lower": open_lower <= lower,
    }
    return fr, rep
