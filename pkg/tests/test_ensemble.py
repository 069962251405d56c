import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activestack.core import Aggregator, LinearModel
from activestack.ensemble import (
    FallbackPolicy,
    aggregate_average,
    aggregate_median,
    apply_aggregator,
    build_aggregator,
    find_consistent,
)
from activestack.regressors import fit_svr


def test_average_and_median_examples():
    X = [[60, 70, 80], [100, 100, 0]]
    assert np.array_equal(aggregate_average(X), [70, 200 / 3])
    assert np.array_equal(aggregate_median(X), [70, 100])
    assert np.array_equal(aggregate_median([[1, 2, 3, 4]]), [2.5])


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_median_matches_sorted_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(80, 30, (int(rng.integers(1, 10)), int(rng.integers(1, 8))))
    for row, got in zip(X, aggregate_median(X)):
        s = sorted(row)
        n = len(s)
        assert got == (s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2)


def test_find_consistent_tolerance_boundary():
    y = np.array([64.0, 128.0])
    X = np.column_stack([y, y + 2.0**-30, y + 2.0**-29, y + [0, 5]])  # exact offsets either side of 1e-9
    assert find_consistent(X, y) == (0, 1)
    assert find_consistent(X, y, tol=0) == (0,)
    assert find_consistent(X, y, tol=10) == (0, 1, 2, 3)


def test_median_variant_uses_consistent_columns():
    X_S = np.array([[70.0, 0, 70], [80, 90, 80]])
    agg = build_aggregator(X_S, [70, 80])
    assert agg.kind == "median_fallback" and agg.consistent_estimators == (0, 2)
    X = np.array([[50.0, 1000, 54], [60, 60, 60]])
    assert np.array_equal(apply_aggregator(agg, X), np.median(X[:, [0, 2]], axis=1))


def test_subset_and_all_variants():
    rng = np.random.default_rng(3)
    y = rng.uniform(60, 100, 6)
    X_S = np.column_stack([y, y + rng.normal(0, 5, 6), rng.uniform(0, 1200, 6)])
    sub = build_aggregator(X_S, y, FallbackPolicy("subset"))
    direct = fit_svr(X_S[:, [0]], y)
    assert sub.kind == "linear"
    assert np.array_equal(sub.model.weights, [direct.weights[0], 0, 0])
    assert sub.model.intercept == direct.intercept
    full = build_aggregator(X_S, y, FallbackPolicy("all"))
    ref = fit_svr(X_S, y)
    assert np.array_equal(full.model.weights, ref.weights) and full.model.intercept == ref.intercept


def test_no_match_fits_svr():
    X_S = np.array([[71.0, 69], [81, 79]])
    agg = build_aggregator(X_S, [70, 80])
    assert agg.kind == "linear"


def test_linear_application_example():
    agg = Aggregator("linear", model=LinearModel(np.zeros(3), 75.0))
    assert np.array_equal(apply_aggregator(agg, np.ones((4, 3))), np.full(4, 75.0))


def test_fallback_policy_validation():
    with pytest.raises(ValueError):
        FallbackPolicy("bogus")
    with pytest.raises(ValueError):
        FallbackPolicy(match_tolerance=-1)
    agg = Aggregator("median_fallback", consistent_estimators=(4,))
    with pytest.raises(ValueError):
        apply_aggregator(agg, np.ones((2, 3)))
