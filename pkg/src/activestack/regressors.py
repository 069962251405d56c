"""Linear stacking regressors: closed-form ridge and linear SVR."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import LinearModel


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RidgeConfig:
    lam: float = 0.01

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")


@dataclass(frozen=True)
class SvrConfig:
    """Linear SVR settings.

    ``tube`` is the width of the insensitive zone in bpm; 0 gives the plain
    absolute-error loss. ``tol`` is the relative primal-dual gap at which
    the solver stops, which bounds the relative objective error.
    """

    c: float = 1.0
    tube: float = 0.0
    tol: float = 1e-8
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("C must be > 0")
        if not self.tube >= 0:
            raise ValueError("tube must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def _as_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1:
        raise ValueError("need at least one training row")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    return X, y


def fit_ridge(X, y, cfg: RidgeConfig = RidgeConfig()) -> LinearModel:
    """Minimise ``sum((y - Xw - b)**2) + lam * w'w`` with ``b`` unpenalised.

    Solved on centred data; with ``lam == 0`` and a rank-deficient design the
    minimum-norm weights are returned.
    """
    X, y = _as_xy(X, y)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    if cfg.lam > 0:
        A = Xc.T @ Xc + cfg.lam * np.eye(X.shape[1])
        w = np.linalg.solve(A, Xc.T @ yc)
    else:
        w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    return LinearModel(w, y_mean - x_mean @ w)


def ridge_objective(model: LinearModel, X, y, cfg: RidgeConfig = RidgeConfig()) -> float:
    X, y = _as_xy(X, y)
    r = y - X @ model.weights - model.intercept
    return float(r @ r + cfg.lam * model.weights @ model.weights)


def svr_objective(model: LinearModel, X, y, cfg: SvrConfig = SvrConfig()) -> float:
    return svr_objective_wb(model.weights, model.intercept, X, y, cfg)


def svr_objective_wb(w, b, X, y, cfg: SvrConfig = SvrConfig()) -> float:
    X, y = _as_xy(X, y)
    w = np.asarray(w, dtype=float)
    r = np.abs(y - X @ w - b) - cfg.tube
    return float(0.5 * w @ w + cfg.c * np.sum(np.maximum(r, 0.0)))


def _best_intercept(r: np.ndarray, c: float, tube: float) -> float:
    """Exact minimiser of ``c * sum(max(0, |r - b| - tube))`` over ``b``.

    The loss is convex piecewise-linear, so its minimum set is an interval
    whose ends are breakpoints; the interval midpoint is returned.
    """
    bps = np.unique(np.concatenate([r - tube, r + tube]))
    loss = np.array([np.sum(np.maximum(np.abs(r - b) - tube, 0.0)) for b in bps])
    best = loss.min()
    ok = bps[loss <= best + 1e-12 * (1.0 + abs(best))]
    return float(0.5 * (ok[0] + ok[-1]))


def _dual_value(beta, gram, y, tube) -> float:
    """Maximised SVR dual objective at ``beta``; a lower bound on the optimum."""
    return float(-0.5 * beta @ gram @ beta + y @ beta - tube * np.sum(np.abs(beta)))


def _solve_active_set(at_bound, free, signs, gram, y, c, tube):
    """Solve the KKT equations with bound duals at ``signs * c`` and free ones unknown.

    Non-bound, non-free duals are zero. The free duals satisfy
    ``G beta + b = y - signs * tube`` together with ``sum(beta) = 0``.
    Returns None when the result leaves the box.
    """
    fixed = np.where(at_bound, signs * c, 0.0)
    F = np.flatnonzero(free)
    if F.size == 0:
        return fixed if abs(fixed.sum()) <= 1e-6 * c else None
    A = np.zeros((F.size + 1, F.size + 1))
    A[: F.size, : F.size] = gram[np.ix_(F, F)]
    A[: F.size, F.size] = 1.0
    A[F.size, : F.size] = 1.0
    rhs = np.empty(F.size + 1)
    rhs[: F.size] = y[F] - signs[F] * tube - gram[F] @ fixed
    rhs[F.size] = -fixed.sum()
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    for _ in range(3):  # iterative refinement; A mixes O(1) and O(|x|^2) entries
        sol = sol + np.linalg.lstsq(A, rhs - A @ sol, rcond=None)[0]
    out = fixed.copy()
    out[F] = sol[: F.size]
    if not np.all(np.isfinite(out)) or np.any(np.abs(out) > c * (1 + 1e-12)):
        return None
    return np.clip(out, -c, c)


def _polish(beta, gram, y, c, tube):
    """Re-solve the KKT equations on the active set read off ``beta``.

    Bound duals (|beta| = C) and, with a positive tube, zero duals are held
    fixed. Returns None when the result leaves the box.
    """
    thr = 1e-6 * c
    at_bound = np.abs(beta) >= c - thr
    zero = (np.abs(beta) <= thr) if tube > 0 else np.zeros(beta.shape[0], dtype=bool)
    return _solve_active_set(at_bound, ~at_bound & ~zero, np.sign(beta), gram, y, c, tube)


def _polish_residuals(r, gram, y, c, tube):
    """Re-solve the KKT equations on the active set read off primal residuals.

    Trials outside the tube have bound duals, trials inside it zero duals and
    trials on its edge free duals. Unlike :func:`_polish` this does not depend
    on the scale of ``beta``, which can be tiny when the Gram matrix is large.
    """
    tol = 1e-6 * (1.0 + tube)
    excess = np.abs(r) - tube
    at_bound = excess > tol
    free = np.abs(excess) <= tol
    return _solve_active_set(at_bound, free, np.sign(r), gram, y, c, tube)


def fit_svr(X, y, cfg: SvrConfig = SvrConfig()) -> LinearModel:
    """Linear SVR minimising ``0.5 w'w + C sum(max(0, |y - Xw - b| - tube))``.

    The dual is solved by an interior-point method, then polished on its
    active set; the intercept is set exactly for the final weights.
    ``converged`` reports whether the primal-dual gap certificate reached
    ``tol`` relative to the objective. If not, a :class:`ConvergenceWarning`
    is emitted and the best iterate is returned.
    """
    X, y = _as_xy(X, y)
    gram = X @ X.T
    beta, _, _, ipm_ok = kernels.svr_ipm(gram, y, cfg.c, cfg.tube, cfg.tol, cfg.max_iter)
    beta = np.asarray(beta)
    if not np.all(np.isfinite(beta)):
        beta, ipm_ok = np.zeros_like(y), False
    candidates = [beta]
    polished = _polish(beta, gram, y, cfg.c, cfg.tube)
    if polished is not None and np.all(np.isfinite(polished)):
        candidates.append(polished)
    fits = []
    for cand in candidates:
        w = X.T @ cand
        b = _best_intercept(y - X @ w, cfg.c, cfg.tube)
        fits.append((svr_objective_wb(w, b, X, y, cfg), w, b))
    obj, w, b = min(fits, key=lambda f: f[0])
    polished = _polish_residuals(y - X @ w - b, gram, y, cfg.c, cfg.tube)
    if polished is not None:
        candidates.append(polished)
        w2 = X.T @ polished
        b2 = _best_intercept(y - X @ w2, cfg.c, cfg.tube)
        obj2 = svr_objective_wb(w2, b2, X, y, cfg)
        if obj2 < obj:
            obj, w, b = obj2, w2, b2
    lower = max(
        (_dual_value(cand, gram, y, cfg.tube) for cand in candidates
         if abs(cand.sum()) <= 1e-9 * cfg.c * len(cand)),
        default=-np.inf,
    )
    floor = 1e-14 * (1.0 + float(np.max(np.abs(y)))) ** 2
    converged = ipm_ok or obj - lower <= cfg.tol * abs(obj) + floor
    if not converged:
        warnings.warn(
            f"SVR solver did not reach tol={cfg.tol} (gap {obj - lower:.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    return LinearModel(w, b, converged=bool(converged))


def predict(model: LinearModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected {model.n_features} features, got shape {x.shape}")
    return float(model.weights @ x + model.intercept)


def predict_many(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} columns, got shape {X.shape}")
    return X @ model.weights + model.intercept
