from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustmot.classifier import BallMaxClassifier, build_classifier, closed_ball_risk_bounds
from robustmot.data import EmpiricalDistribution
from robustmot.geometry import CostSpec, Metric
from robustmot.instances import collinear_triple, random_instance, two_diracs, two_pairs
from robustmot.mot import solve_mot
from robustmot.oracle import (OracleError, grid_attack_oracle, matching_oracle, matching_value, partition_oracle,
                              partition_value, unit_decomposition)

L2 = Metric.L2
HALF = F(1, 2)


def test_matching_examples():
    assert matching_oracle(two_diracs(), CostSpec(L2, HALF)).value == HALF
    res = matching_oracle(two_diracs(), CostSpec(L2, F(2, 5)))
    assert res.value == 0 and res.certificate == []
    res = matching_oracle(two_pairs(), CostSpec(L2, HALF))
    assert res.value == HALF
    assert sorted(res.certificate) == [(0, 0, F(1, 4)), (1, 1, F(1, 4))]
    assert matching_value(two_pairs(), res.certificate) == HALF


def test_matching_preconditions():
    with pytest.raises(OracleError):
        matching_oracle(collinear_triple(), CostSpec(L2, HALF))
    with pytest.raises(OracleError):
        matching_oracle(two_diracs(), CostSpec(L2, HALF, 2))


def test_partition_examples():
    res = partition_oracle(collinear_triple(), CostSpec(L2, HALF))
    assert res.value == F(2, 3) and len(res.certificate) == 1
    assert partition_oracle(two_diracs(), CostSpec(L2, F(2, 5))).value == 0
    res = partition_oracle(two_diracs(), CostSpec(L2, HALF))
    assert res.value == HALF
    assert partition_value(two_diracs(), CostSpec(L2, HALF), res.certificate) == HALF


def test_partition_unit_decomposition_and_cap():
    mu = EmpiricalDistribution.from_atoms([([0], 0, F(1, 3)), ([1], 1, F(2, 3))])
    unit, units = unit_decomposition(mu)
    assert unit == F(1, 3) and units == [(0, 0), (1, 0), (1, 0)]
    with pytest.raises(OracleError):
        partition_oracle(mu, CostSpec(L2, HALF), cap=2)


def test_partition_certificate_checked():
    mu, spec = two_diracs(), CostSpec(L2, F(2, 5))
    with pytest.raises(OracleError):
        partition_value(mu, spec, [[(0, 0), (1, 0)]])
    with pytest.raises(OracleError):
        partition_value(mu, spec, [[(0, 0)]])


def test_grid_attack_examples():
    mu, spec = two_diracs(), CostSpec(L2, HALF)
    f = build_classifier(solve_mot(mu, spec)).normalized()
    closed = grid_attack_oracle(f, mu, spec, 8)
    assert closed.value == HALF and closed.exact
    assert grid_attack_oracle(f, mu, spec, 8, closed=False).value == 0
    zero = BallMaxClassifier((), HALF, 2)
    assert grid_attack_oracle(zero, mu, spec, 4).value == 1
    assert not grid_attack_oracle(f, mu, spec, 4, refine=False).exact


def test_grid_attack_dimension_limit():
    mu = EmpiricalDistribution.from_atoms([([0, 0, 0], 0, HALF), ([1, 1, 1], 1, HALF)])
    with pytest.raises(OracleError):
        grid_attack_oracle(BallMaxClassifier((), HALF, 2), mu, CostSpec(L2, HALF))


seeds = st.integers(0, 10_000)


@given(seeds)
def test_matching_equals_lp(seed):
    mu, spec = random_instance(seed)
    if mu.K != 2:
        return
    res = matching_oracle(mu, spec)
    assert res.value == solve_mot(mu, spec).dro_risk
    assert matching_value(mu, res.certificate) == res.value


@given(seeds)
def test_partition_bounds_lp(seed):
    mu, spec = random_instance(seed)
    try:
        res = partition_oracle(mu, spec)
    except OracleError:
        return
    assert partition_value(mu, spec, res.certificate) == res.value
    assert res.value <= solve_mot(mu, spec).dro_risk


@given(seeds)
def test_grid_never_exceeds_upper_bound(seed):
    mu, spec = random_instance(seed)
    sol = solve_mot(mu, spec)
    f = build_classifier(sol)
    fr = f.normalized() if mu.K == 2 else f
    g = grid_attack_oracle(fr, mu, spec, 6)
    lo, up = closed_ball_risk_bounds(fr, mu, sol, ref=f)
    assert g.value <= up
    if mu.dimension == 1:
        assert g.exact and g.value == lo
