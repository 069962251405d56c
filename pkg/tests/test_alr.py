import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activestack.alr import (
    BudgetExceededError,
    LabelOracle,
    emcm_score,
    select_gsx,
    select_igs,
    select_random,
    select_rd,
    select_rd_emcm,
)
from activestack.numerics import RandomSource

from conftest import make_subject
from oracles import emcm_recompute, gsx_brute, igs_recompute


def test_gsx_collinear_example():
    assert select_gsx([[0], [5], [10]], 2).labeled == [1, 0]


def test_gsx_full_budget_is_permutation():
    X = np.random.default_rng(0).normal(size=(9, 3))
    assert sorted(select_gsx(X, 9).labeled) == list(range(9))


@given(st.integers(0, 2**31), st.integers(2, 12))
@settings(max_examples=40, deadline=None)
def test_gsx_equals_brute_force(seed, K):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(0, 5, (int(rng.integers(K, 30)), 3)), 1)  # rounding provokes ties
    assert select_gsx(X, K).labeled == gsx_brute(X.tolist(), K)


def test_gsx_duplicates_only_after_distinct_rows():
    rng = np.random.default_rng(4)
    base = rng.normal(0, 3, (6, 2))
    X = np.repeat(base, 2, axis=0)
    picks = select_gsx(X, 6).labeled
    assert len({p // 2 for p in picks}) == 6


def test_random_examples():
    X = np.zeros((5, 1))
    assert sorted(select_random(X, 5, RandomSource(1)).labeled) == list(range(5))
    assert select_random(X, 3, RandomSource(2)).labeled == select_random(X, 3, RandomSource(2)).labeled
    rng = RandomSource(10)
    counts = np.zeros(10)
    for _ in range(10000):
        counts[select_random(np.zeros((10, 1)), 2, rng).labeled] += 1
    p = 0.2
    assert np.all(np.abs(counts / 10000 - p) <= 3 * np.sqrt(p * (1 - p) / 10000))


def test_rd_examples():
    X = np.array([[0, 0], [0, 1], [1, 0], [20, 20], [20, 21]], dtype=float)
    picks = select_rd(X, 2, RandomSource(0)).labeled
    assert {p < 3 for p in picks} == {True, False}
    assert sorted(select_rd(X, 5, RandomSource(0)).labeled) == list(range(5))
    same = select_rd(np.ones((6, 2)), 2, RandomSource(0)).labeled
    assert len(set(same)) == 2


def test_budget_checks():
    with pytest.raises(ValueError):
        select_gsx(np.zeros((3, 1)), 4)
    with pytest.raises(ValueError):
        select_gsx(np.zeros((3, 1)), 1)


def test_label_oracle():
    o = LabelOracle([70, 71, 72], budget=2)
    assert o.query(1) == 71 and o.query(1) == 71 and o.n_queries == 1
    o.query(0)
    with pytest.raises(BudgetExceededError):
        o.query(2)


def test_emcm_score_examples():
    assert emcm_score([3, 4], 70, [70, 70]) == 0
    assert emcm_score([3, 4], 70, [72, 68]) == pytest.approx(10.0)
    assert emcm_score([6, 8], 70, [72, 68]) == pytest.approx(20.0)


@pytest.mark.parametrize("seed", range(10))
def test_degeneracy_at_two_labels(seed):
    rec = make_subject(seed, n=25, m=4)
    X, y = rec.predictions, rec.references
    a = select_rd_emcm(X, 2, LabelOracle(y), RandomSource(seed))
    b = select_rd(X, 2, RandomSource(seed))
    assert a.labeled == b.labeled
    assert select_igs(X, 2, LabelOracle(y)).labeled == select_gsx(X, 2).labeled


def test_emcm_zero_scores_pick_smallest_index():
    rec = make_subject(3, n=30, m=3)
    X = rec.predictions
    state = select_rd_emcm(X, 4, LabelOracle(np.full(30, 70.0)), RandomSource(1))
    for step in state.trace:
        assert np.all(step["scores"] == 0)
        assert step["chosen"] == int(np.min(step["candidates"]))


@pytest.mark.parametrize("seed", range(8))
def test_emcm_steps_match_recomputation(seed):
    rec = make_subject(seed, n=8 if seed == 0 else 30, m=4)
    X, y = rec.predictions, rec.references
    K = 5 if seed else 4
    state = select_rd_emcm(X, K, LabelOracle(y, budget=K), RandomSource(seed))
    assert len(state.labeled) == K == len(set(state.labeled))
    emcm_recompute(X, y, state)


@pytest.mark.parametrize("seed", range(8))
def test_igs_steps_match_recomputation(seed):
    rec = make_subject(seed, n=30, m=4)
    X, y = rec.predictions, rec.references
    state = select_igs(X, 6, LabelOracle(y, budget=6))
    igs_recompute(X, y, state)


def test_igs_hand_enumerated_instance():
    X = np.array([[0.0], [1], [2], [3], [4], [10]])
    y = X[:, 0].copy()
    state = select_igs(X, 3, LabelOracle(y))
    assert state.labeled[:2] == [3, 5]
    step = state.trace[0]
    assert list(step["pool"]) == [0, 1, 2, 4]
    assert np.allclose(step["scores"], [9, 4, 1, 1], atol=1e-6)
    assert state.labeled[2] == 0


def test_igs_zero_score_never_beats_positive():
    X = np.array([[0.0], [1], [2], [3], [10]])
    y = np.array([0.0, 1, 2, 3, 10])
    state = select_igs(X, 4, LabelOracle(y))
    for step in state.trace:
        if np.any(step["scores"] > 1e-9):
            assert step["scores"][list(step["pool"]).index(step["chosen"])] > 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_query_counts(seed):
    rec = make_subject(seed, n=20, m=3)
    X, y = rec.predictions, rec.references
    for fn in (lambda o: select_rd_emcm(X, 5, o, RandomSource(seed)), lambda o: select_igs(X, 5, o)):
        o = LabelOracle(y, budget=5)
        s = fn(o)
        assert o.n_queries == 5 and s.labels == [y[i] for i in s.labeled]
    s = select_gsx(X, 5)
    assert s.labels == []
