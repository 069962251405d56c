"""Final-estimate aggregation.

Unsupervised row-wise mean and median, plus the active-stacking rule: when
some base estimators reproduce every queried label, use them directly
(``median``), refit on just them (``subset``), or ignore the match (``all``);
otherwise fit a linear SVR on all estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import Aggregator, LinearModel
from .regressors import SvrConfig, fit_svr, predict_many


@dataclass(frozen=True)
class FallbackPolicy:
    variant: Literal["median", "subset", "all"] = "median"
    match_tolerance: float = 1e-9

    def __post_init__(self):
        if self.variant not in ("median", "subset", "all"):
            raise ValueError(f"unknown fallback variant {self.variant!r}")
        if not self.match_tolerance >= 0:
            raise ValueError("match_tolerance must be >= 0")


def _matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def aggregate_average(X) -> np.ndarray:
    return _matrix(X).mean(axis=1)


def aggregate_median(X) -> np.ndarray:
    return np.median(_matrix(X), axis=1)


def find_consistent(X_S, y_S, tol: float = 1e-9) -> tuple[int, ...]:
    """Columns whose value is within ``tol`` of the label on every labeled trial."""
    X_S = _matrix(X_S)
    y_S = np.asarray(y_S, dtype=float)
    if X_S.shape[0] < 1:
        raise ValueError("need at least one labeled trial")
    ok = np.all(np.abs(X_S - y_S[:, None]) <= tol, axis=0)
    return tuple(int(m) for m in np.flatnonzero(ok))


def build_aggregator(
    X_S,
    y_S,
    policy: FallbackPolicy = FallbackPolicy(),
    svr_cfg: SvrConfig = SvrConfig(),
) -> Aggregator:
    X_S = _matrix(X_S)
    y_S = np.asarray(y_S, dtype=float)
    consistent = find_consistent(X_S, y_S, policy.match_tolerance)
    if consistent and policy.variant == "median":
        return Aggregator("median_fallback", consistent_estimators=consistent)
    if consistent and policy.variant == "subset":
        cols = list(consistent)
        sub = fit_svr(X_S[:, cols], y_S, svr_cfg)
        w = np.zeros(X_S.shape[1])
        w[cols] = sub.weights
        return Aggregator("linear", model=LinearModel(w, sub.intercept, sub.converged))
    return Aggregator("linear", model=fit_svr(X_S, y_S, svr_cfg))


def apply_aggregator(agg: Aggregator, X) -> np.ndarray:
    X = _matrix(X)
    if agg.kind == "median_fallback":
        if max(agg.consistent_estimators) >= X.shape[1]:
            raise ValueError("aggregator refers to a column the data lacks")
        return aggregate_median(X[:, list(agg.consistent_estimators)])
    return predict_many(agg.model, X)
