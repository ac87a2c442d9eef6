"""Curated and seeded random instances used by tests and the CLI."""
from __future__ import annotations

import random
from fractions import Fraction

from .data import EmpiricalDistribution
from .geometry import CostSpec, Metric

HALF = Fraction(1, 2)


def two_diracs() -> EmpiricalDistribution:
    """Class 1 at 0, class 2 at 1, mass 1/2 each."""
    return EmpiricalDistribution.from_atoms([([0], 0, HALF), ([1], 1, HALF)])


def collinear_triple() -> EmpiricalDistribution:
    """Three classes at 0, 1/2, 1 with mass 1/3 each."""
    third = Fraction(1, 3)
    return EmpiricalDistribution.from_atoms([([0], 0, third), ([HALF], 1, third), ([1], 2, third)])


def two_pairs() -> EmpiricalDistribution:
    """Class 1 at {0, 10}, class 2 at {1, 11}, mass 1/4 each."""
    q = Fraction(1, 4)
    return EmpiricalDistribution.from_atoms([([0], 0, q), ([10], 0, q), ([1], 1, q), ([11], 1, q)])


def separable(gap: int = 4) -> EmpiricalDistribution:
    q = Fraction(1, 4)
    return EmpiricalDistribution.from_atoms([([0], 0, q), ([1], 0, q), ([1 + gap], 1, q), ([2 + gap], 1, q)])


def corpus_2d() -> list[tuple[str, EmpiricalDistribution, CostSpec]]:
    """Small planar instances whose candidate lower bound is tight."""
    q, s, t = Fraction(1, 4), Fraction(1, 6), Fraction(1, 3)
    square = EmpiricalDistribution.from_atoms(
        [([0, 0], 0, q), ([1, 0], 1, q), ([0, 1], 0, q), ([1, 1], 1, q)])
    triangle = EmpiricalDistribution.from_atoms(
        [([0, 0], 0, t), ([2, 0], 1, t), ([1, 2], 2, t)])
    cross = EmpiricalDistribution.from_atoms(
        [([0, 0], 0, s), ([2, 0], 0, s), ([1, 1], 1, s), ([1, -1], 1, s), ([4, 0], 2, s), ([5, 1], 2, s)])
    lopsided = EmpiricalDistribution.from_atoms(
        [([0, 0], 0, Fraction(1, 2)), ([1, 0], 1, Fraction(1, 8)), ([3, 0], 1, Fraction(3, 8))])
    return [
        ("square-l2", square, CostSpec(Metric.L2, HALF)),
        ("square-linf", square, CostSpec(Metric.LINF, HALF)),
        ("square-small", square, CostSpec(Metric.L2, Fraction(1, 3))),
        ("triangle-l2", triangle, CostSpec(Metric.L2, Fraction(5, 4))),
        ("triangle-linf", triangle, CostSpec(Metric.LINF, Fraction(1))),
        ("cross-l2", cross, CostSpec(Metric.L2, Fraction(1))),
        ("lopsided-l2", lopsided, CostSpec(Metric.L2, Fraction(1))),
    ]


def random_instance(seed: int, unit_mass: bool | None = None) -> tuple[EmpiricalDistribution, CostSpec]:
    """Seeded instance: K in {2, 3}, at most 8 atoms, dimension 1 or 2, l2 or linf.

    Coordinates sit on a half-integer grid and budgets on quarter values so
    that boundary cases (d == 2 eps, radius == eps) occur often.
    """
    rng = random.Random(seed)
    K = rng.choice([2, 3])
    dim = rng.choice([1, 2])
    metric = rng.choice([Metric.L2, Metric.LINF])
    if unit_mass is None:
        unit_mass = rng.random() < 0.5
    n = rng.randint(K, 8)
    labels = list(range(K)) + [rng.randrange(K) for _ in range(n - K)]
    weights = [1] * n if unit_mass else [rng.randint(1, 4) for _ in range(n)]
    total = sum(weights)
    atoms = []
    for lbl, w in zip(labels, weights):
        coords = [Fraction(rng.randint(0, 6), 2) for _ in range(dim)]
        atoms.append((coords, lbl, Fraction(w, total)))
    eps = Fraction(rng.choice([0, 1, 2, 3, 4, 5, 6]), 4)
    return EmpiricalDistribution.from_atoms(atoms, n_classes=K), CostSpec(metric, eps)
