"""Trial-selection strategies for active learning for regression.

Label-free: random sampling, GSx (greedy max-min distance) and RD (k-means
representatives). Supervised: RD-EMCM (expected model change inside the
largest unlabeled cluster) and iGS (greedy on the product of input and output
distances). Every strategy breaks ties toward the smallest trial index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import SelectionState
from .numerics import RandomSource, bootstrap_indices, kmeans, nearest_to_centroid
from .regressors import RidgeConfig, SvrConfig, fit_ridge, fit_svr, predict_many


class BudgetExceededError(RuntimeError):
    pass


class LabelOracle:
    """Answers label queries from stored references and counts distinct queries."""

    def __init__(self, references, budget: int | None = None):
        self._refs = np.asarray(references, dtype=float)
        self.budget = budget
        self._asked: dict[int, float] = {}

    @property
    def n_queries(self) -> int:
        return len(self._asked)

    def query(self, index: int) -> float:
        index = int(index)
        if index in self._asked:
            return self._asked[index]
        if self.budget is not None and len(self._asked) >= self.budget:
            raise BudgetExceededError(f"label budget {self.budget} exhausted")
        value = float(self._refs[index])
        self._asked[index] = value
        return value


@dataclass(frozen=True)
class EmcmConfig:
    p: int = 4
    base_fit: Literal["ridge", "svr"] = "ridge"

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("need at least 2 bootstrap models")
        if self.base_fit not in ("ridge", "svr"):
            raise ValueError(f"unknown base_fit {self.base_fit!r}")


def _check_budget(X: np.ndarray, K: int) -> None:
    if not 2 <= K <= X.shape[0]:
        raise ValueError(f"K={K} out of range [2, {X.shape[0]}]")


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def select_random(X, K: int, rng: RandomSource) -> SelectionState:
    """K distinct indices, uniformly without replacement (partial Fisher-Yates)."""
    X = _as_matrix(X)
    _check_budget(X, K)
    n = X.shape[0]
    perm = list(range(n))
    for i in range(K):
        j = i + rng.integers(n - i)
        perm[i], perm[j] = perm[j], perm[i]
    state = SelectionState(n)
    for idx in perm[:K]:
        state.add(idx)
    return state


def _gsx_order(X: np.ndarray, K: int) -> list[int]:
    n = X.shape[0]
    first = nearest_to_centroid(X)
    chosen = [first]
    taken = np.zeros(n, dtype=bool)
    taken[first] = True
    dmin = np.sqrt(np.sum((X - X[first]) ** 2, axis=1))
    while len(chosen) < K:
        cand = np.where(taken, -np.inf, dmin)
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        taken[nxt] = True
        dmin = np.minimum(dmin, np.sqrt(np.sum((X - X[nxt]) ** 2, axis=1)))
    return chosen


def select_gsx(X, K: int) -> SelectionState:
    """Nearest-to-centroid first, then repeatedly the trial farthest from all picks."""
    X = _as_matrix(X)
    _check_budget(X, K)
    state = SelectionState(X.shape[0])
    for idx in _gsx_order(X, K):
        state.add(idx)
    return state


def _representative(X: np.ndarray, members: np.ndarray, centroid: np.ndarray) -> int:
    d = np.sqrt(np.sum((X[members] - centroid) ** 2, axis=1))
    return int(members[int(np.argmin(d))])


def select_rd(X, K: int, rng: RandomSource) -> SelectionState:
    """k-means with k=K; from each cluster (by id) the member nearest its centroid."""
    X = _as_matrix(X)
    _check_budget(X, K)
    cl = kmeans(X, K, rng)
    state = SelectionState(X.shape[0])
    for c in range(K):
        state.add(_representative(X, cl.members(c), cl.centroids[c]))
    return state


def emcm_score(x, y_main: float, y_boot) -> float:
    """Mean model change ``(1/P) sum_p |y_boot[p] - y_main| * ||x||``."""
    y_boot = np.asarray(y_boot, dtype=float)
    if y_boot.size < 1:
        raise ValueError("need at least one bootstrap prediction")
    return float(np.mean(np.abs(y_boot - y_main)) * np.linalg.norm(np.asarray(x, dtype=float)))


def _emcm_scores(Xc: np.ndarray, y_main: np.ndarray, y_boot: np.ndarray) -> np.ndarray:
    # y_boot: (P, n_candidates)
    return np.mean(np.abs(y_boot - y_main[None, :]), axis=0) * np.linalg.norm(Xc, axis=1)


def _target_cluster(assignments: np.ndarray, k: int, labeled: list[int]) -> np.ndarray | None:
    """Members of the largest cluster holding no labeled trial.

    Size ties go to the cluster whose smallest member index is lowest.
    Returns None when every cluster holds a labeled trial.
    """
    hit = set(int(assignments[i]) for i in labeled)
    best = None
    for c in range(k):
        if c in hit:
            continue
        members = np.flatnonzero(assignments == c)
        key = (-members.size, int(members[0]))
        if best is None or key < best[0]:
            best = (key, members)
    return None if best is None else best[1]


def select_rd_emcm(
    X,
    K: int,
    oracle: LabelOracle,
    rng: RandomSource,
    cfg: EmcmConfig = EmcmConfig(),
    svr_cfg: SvrConfig = SvrConfig(),
    ridge_cfg: RidgeConfig = RidgeConfig(),
) -> SelectionState:
    """RD for the first two labels, then EMCM inside the largest unlabeled cluster.

    At the step that picks label ``k`` (k >= 3) the trials are re-clustered
    into ``k`` groups. If every cluster already holds a labeled trial, the
    whole unlabeled pool is scored instead. The main model is a linear SVR;
    the bootstrap committee uses ``cfg.base_fit``. ``rng`` is consumed in
    order: initial RD clustering, then per step the k-means run followed by
    the ``P`` bootstrap draws.

    Each step appends a dict to ``state.trace`` with the candidate indices,
    bootstrap index sets, scores and the chosen index.
    """
    X = _as_matrix(X)
    _check_budget(X, K)
    state = select_rd(X, 2, rng)
    state.labels = [oracle.query(i) for i in state.labeled]
    state.trace = []
    fit_boot = (
        (lambda A, b: fit_ridge(A, b, ridge_cfg))
        if cfg.base_fit == "ridge"
        else (lambda A, b: fit_svr(A, b, svr_cfg))
    )
    for k in range(3, K + 1):
        S = np.array(state.labeled)
        yS = np.array(state.labels)
        main = fit_svr(X[S], yS, svr_cfg)
        cl = kmeans(X, k, rng)
        members = _target_cluster(cl.assignments, k, state.labeled)
        cand = np.array(state.pool) if members is None else members
        boots = [bootstrap_indices(len(S), rng) for _ in range(cfg.p)]
        y_main = predict_many(main, X[cand])
        y_boot = np.array([predict_many(fit_boot(X[S][b], yS[b]), X[cand]) for b in boots])
        scores = _emcm_scores(X[cand], y_main, y_boot)
        pick = int(cand[int(np.argmax(scores))])
        state.trace.append(
            {
                "k": k,
                "assignments": cl.assignments.copy(),
                "candidates": cand.copy(),
                "bootstraps": boots,
                "scores": scores,
                "chosen": pick,
                "fallback_pool": members is None,
            }
        )
        state.add(pick, oracle.query(pick))
    return state


def igs_scores(Xpool: np.ndarray, f_pool: np.ndarray, XS: np.ndarray, yS: np.ndarray) -> np.ndarray:
    """``min_l ||x_n - x_l|| * |f(x_n) - y_l|`` for every pool row."""
    dx = np.sqrt(np.sum((Xpool[:, None, :] - XS[None, :, :]) ** 2, axis=2))
    dy = np.abs(f_pool[:, None] - yS[None, :])
    return np.min(dx * dy, axis=1)


def select_igs(
    X,
    K: int,
    oracle: LabelOracle,
    svr_cfg: SvrConfig = SvrConfig(),
) -> SelectionState:
    """GSx for the first two picks, then greedy on joint input/output distance.

    Both initial picks are made before any label is queried. Each later step
    refits a linear SVR on the labels so far and records a dict in
    ``state.trace``.
    """
    X = _as_matrix(X)
    _check_budget(X, K)
    state = SelectionState(X.shape[0])
    for idx in _gsx_order(X, 2):
        state.add(idx)
    state.labels = [oracle.query(i) for i in state.labeled]
    state.trace = []
    for k in range(3, K + 1):
        S = np.array(state.labeled)
        yS = np.array(state.labels)
        model = fit_svr(X[S], yS, svr_cfg)
        pool = np.array(state.pool)
        scores = igs_scores(X[pool], predict_many(model, X[pool]), X[S], yS)
        pick = int(pool[int(np.argmax(scores))])
        state.trace.append({"k": k, "pool": pool, "scores": scores, "chosen": pick, "model": model})
        state.add(pick, oracle.query(pick))
    return state
