from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robustmot.classifier import (BallAtom, BallMaxClassifier, build_classifier, c_transform_mismatches,
                                  closed_ball_risk_bounds, dro_objective, evaluation_points, inf_over_ball,
                                  nominal_risk, open_ball_risk_lower, risk_report, saddle_check,
                                  simplex_violations, threshold_and_coarea, tv_decomposition)
from robustmot.data import EmpiricalDistribution, Move, PerturbedDistribution
from robustmot.geometry import INF, CostSpec, Metric, compare_distance
from robustmot.instances import collinear_triple, corpus_2d, random_instance, two_diracs
from robustmot.mot import barycenter_from_mot, solve_mot

L2 = Metric.L2
HALF = F(1, 2)


def one_ball(height=F(1), open_balls=False):
    return BallMaxClassifier((BallAtom((F(0),), 0, height),), HALF, 2, L2, open_balls)


def test_evaluation_closed_and_open():
    f = one_ball()
    assert f((HALF,)) == [1, 0]
    assert f((F(3, 4),)) == [0, 0]
    assert one_ball(open_balls=True)((HALF,)) == [0, 0]
    assert f.normalized()((F(3, 4),)) == [0, 1]
    assert f.scaled(F(1, 4))((F(0),)) == [F(1, 4), 0]


def test_max_over_overlapping_balls():
    f = BallMaxClassifier((BallAtom((F(0),), 0, F(1, 4)), BallAtom((F(1, 2),), 0, F(3, 4))), HALF, 2)
    assert f((F(1, 4),)) == [F(3, 4), 0]
    assert f((F(-1, 4),)) == [F(1, 4), 0]


def test_invalid_classifiers():
    with pytest.raises(ValueError):
        BallMaxClassifier((BallAtom((F(0),), 0, F(2)),), HALF, 2)
    with pytest.raises(ValueError):
        BallMaxClassifier((BallAtom((F(0),), 3, F(1)),), HALF, 2)
    with pytest.raises(ValueError):
        BallMaxClassifier((), HALF, 3, binary_slack=True)


def test_two_diracs_risks():
    mu, spec = two_diracs(), CostSpec(L2, HALF)
    sol = solve_mot(mu, spec)
    f = build_classifier(sol).normalized()
    assert closed_ball_risk_bounds(f, mu, sol) == (HALF, HALF)
    assert open_ball_risk_lower(f, mu, HALF) == 0
    assert nominal_risk(f, mu) == 0
    fr, rep = risk_report(sol, solve_mot(mu, spec, strict=True))
    assert rep.dro == rep.closed_lower == rep.closed_upper == HALF
    assert rep.open_lower == 0 == rep.open_optimal
    assert all(rep.flags.values())


def test_closed_lower_uses_minimum_of_f():
    # a single class-1 point attacked by a half-covering ball: inf f = 0
    mu = EmpiricalDistribution.from_atoms([([0], 0, HALF), ([5], 1, HALF)])
    f = BallMaxClassifier((BallAtom((F(1, 2),), 0, F(1)),), HALF, 2)
    lo, up = closed_ball_risk_bounds(f, mu, eps=F(1))
    assert lo == up == 1  # class 1 can escape to -1, class 2 has f_2 = 0 everywhere


def test_risk_of_zero_classifier_is_one():
    mu = collinear_triple()
    f = BallMaxClassifier((), HALF, 3)
    assert closed_ball_risk_bounds(f, mu, eps=HALF) == (1, 1)
    assert nominal_risk(f, mu) == 1


def test_dro_objective_infinite_cost():
    mu, spec = two_diracs(), CostSpec(L2, F(1, 4))
    f = one_ball()
    far = PerturbedDistribution.from_moves(mu, [Move(0, 0, (F(1),), HALF), Move(1, 0, (F(1),), HALF)])
    assert dro_objective(f, mu, far, spec) == -INF
    assert dro_objective(f, mu, PerturbedDistribution.identity(mu), spec) == HALF


@st.composite
def classifiers_1d(draw):
    K = draw(st.integers(2, 3))
    r = F(draw(st.integers(0, 4)), 4)
    atoms = tuple(BallAtom((F(draw(st.integers(-8, 8)), 4),), draw(st.integers(0, K - 1)),
                           F(draw(st.integers(0, 4)), 4)) for _ in range(draw(st.integers(0, 5))))
    return BallMaxClassifier(atoms, r, K, L2, draw(st.booleans()))


@given(classifiers_1d(), st.integers(-8, 8), st.integers(0, 6), st.booleans())
def test_one_dim_candidates_are_exhaustive(f, x4, e4, closed):
    x, eps = (F(x4, 4),), F(e4, 4)
    # all breakpoints lie on the 1/4 grid, so a 1/8 grid hits every cell of the arrangement
    grid = [(F(k, 8),) for k in range(-80, 81)]
    inside = [z for z in grid if z == x or (compare_distance(x, z, eps, L2) <= 0 if closed
                                            else compare_distance(x, z, eps, L2) < 0)]
    for i in range(f.K):
        assert inf_over_ball(f, i, x, eps, closed) == min(f(z)[i] for z in inside)


@given(st.integers(0, 10_000))
def test_simplex_membership_and_c_transform(seed):
    mu, spec = random_instance(seed)
    sol = solve_mot(mu, spec)
    f = build_classifier(sol)
    pts = evaluation_points(f, mu, spec.epsilon, [t.witness for t in sol.tuples])
    assert simplex_violations(f, pts) == []
    assert c_transform_mismatches(f, sol) == []


@given(st.integers(0, 10_000))
def test_closed_risk_sandwich(seed):
    mu, spec = random_instance(seed)
    sol = solve_mot(mu, spec)
    f = build_classifier(sol)
    fr = f.normalized() if mu.K == 2 else f
    lo, up = closed_ball_risk_bounds(fr, mu, sol, ref=f)
    assert up == sol.dro_risk
    if mu.dimension == 1:
        assert lo == up
    else:
        assert lo <= up


@pytest.mark.parametrize("name, mu, spec", corpus_2d(), ids=[c[0] for c in corpus_2d()])
def test_curated_2d_bounds_meet(name, mu, spec):
    sol = solve_mot(mu, spec)
    _, rep = risk_report(sol)
    assert rep.closed_lower == rep.closed_upper == sol.dro_risk


@given(st.integers(0, 10_000))
def test_open_optimum_attained_by_open_ball_classifier(seed):
    mu, spec = random_instance(seed)
    if mu.dimension != 1:
        return
    osol = solve_mot(mu, spec, strict=True)
    fo = build_classifier(osol)
    fo = fo.normalized() if mu.K == 2 else fo
    assert open_ball_risk_lower(fo, mu, spec.epsilon) == osol.dro_risk


def test_saddle_on_curated():
    for mu, eps in ((two_diracs(), HALF), (collinear_triple(), HALF), (two_diracs(), F(2, 5))):
        spec = CostSpec(L2, eps)
        sol = solve_mot(mu, spec)
        rep = saddle_check(build_classifier(sol), barycenter_from_mot(sol), mu, spec, trials=30, seed=1)
        assert rep.ok and rep.best_response == sol.dro_risk


def test_saddle_detects_bad_classifier():
    mu, spec = two_diracs(), CostSpec(L2, HALF)
    sol = solve_mot(mu, spec)
    bad = BallMaxClassifier((BallAtom((F(1),), 1, F(1)), BallAtom((F(0),), 0, F(1))), F(1, 4), 2)
    rep = saddle_check(bad, barycenter_from_mot(sol), mu, spec, trials=50, seed=0)
    assert not rep.ok


def test_tv_identities():
    mu, eps = two_diracs(), HALF
    f = BallMaxClassifier((BallAtom((F(1, 4),), 0, F(3, 4)),), HALF, 2)
    base = tv_decomposition(f, mu, eps)
    assert base.ok
    assert base.tv_terms == [F(3, 4), 0]  # class 1 at 0 escapes the ball towards -1/2
    for t in (F(0), F(1, 4), HALF, F(1)):
        scaled = tv_decomposition(f.scaled(t), mu, eps)
        assert scaled.ok
        assert scaled.tv_terms == [t * v for v in base.tv_terms]
    const = BallMaxClassifier((), eps, 2)
    assert tv_decomposition(const, mu, eps).tv_terms == [0, 0]
    with pytest.raises(ValueError):
        tv_decomposition(f, mu, F(0))


@given(st.integers(0, 10_000))
def test_tv_recombination_random(seed):
    mu, spec = random_instance(seed)
    if spec.epsilon == 0:
        return
    f = build_classifier(solve_mot(mu, spec))
    rep = tv_decomposition(f, mu, spec.epsilon)
    assert rep.ok


def test_coarea_half_height_example():
    mu, spec = two_diracs(), CostSpec(L2, HALF)
    f = one_ball(HALF)
    rep = threshold_and_coarea(f, mu, spec.epsilon, optimal=HALF)
    assert [(lo, hi, r) for lo, hi, r in rep.bands] == [(0, HALF, HALF), (HALF, 1, HALF)]
    assert rep.identity_holds and rep.all_bands_optimal


def test_coarea_hard_classifier_is_identity():
    mu = two_diracs()
    f = one_ball(F(1))
    rep = threshold_and_coarea(f, mu, HALF)
    assert len(rep.bands) == 1 and rep.identity_holds


def test_coarea_needs_two_classes():
    with pytest.raises(ValueError):
        threshold_and_coarea(build_classifier(solve_mot(collinear_triple(), CostSpec(L2, HALF))),
                             collinear_triple(), HALF)


@given(st.integers(0, 10_000))
def test_coarea_random_binary(seed):
    mu, spec = random_instance(seed)
    if mu.K != 2 or mu.dimension != 1:
        return
    sol = solve_mot(mu, spec)
    rep = threshold_and_coarea(build_classifier(sol), mu, spec.epsilon, optimal=sol.dro_risk)
    assert rep.identity_holds and rep.all_bands_optimal


@given(classifiers_1d(), st.integers(0, 10_000))
def test_coarea_identity_for_arbitrary_binary_classifiers(f, seed):
    if f.K != 2:
        return
    mu, spec = random_instance(seed)
    if mu.K != 2 or mu.dimension != 1:
        return
    assert threshold_and_coarea(f, mu, spec.epsilon).identity_holds
