"""End-to-end evaluation: per-subject active stacking, baselines and K-sweeps.

Every (subject, strategy, K) cell draws from its own random stream, seeded
from ``(seed, subject_id, family, K)``, so cells can run in any order or in
parallel and still produce the same table. ``as_rd_emcm`` shares the
``as_rd`` family because its first two labels are an RD selection; at K=2
the two strategies therefore pick the same trials.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .alr import EmcmConfig, LabelOracle, select_gsx, select_igs, select_random, select_rd, select_rd_emcm
from .core import (
    ACTIVE,
    SUPERVISED,
    UNSUPERVISED,
    Aggregator,
    EvalRow,
    EvalTable,
    SelectionState,
    SubjectRecord,
)
from .ensemble import FallbackPolicy, aggregate_average, aggregate_median, apply_aggregator, build_aggregator
from .numerics import RandomSource, derive_seed
from .regressors import ConvergenceWarning, RidgeConfig, SvrConfig, fit_ridge, predict_many

STRATEGIES = SUPERVISED + UNSUPERVISED
_FAMILY = {"as_rd_emcm": "as_rd"}


class NumericalFailure(RuntimeError):
    """A run produced non-finite estimates, or a solver failed under strict mode."""


class MissingCellError(KeyError):
    def __init__(self, subject_id: str, strategy: str, K: int, reason: str = "missing"):
        self.subject_id, self.strategy, self.K = subject_id, strategy, K
        super().__init__(f"{reason} cell: subject={subject_id} strategy={strategy} K={K}")

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class RunConfig:
    strategy: str = "as_gsx"
    K: int = 2
    fallback: FallbackPolicy = FallbackPolicy()
    seed: int = 0
    rs_repeats: int = 100
    rmse_scope: str = "pool_only"
    svr: SvrConfig = SvrConfig()
    ridge: RidgeConfig = RidgeConfig()
    emcm: EmcmConfig = EmcmConfig()
    rs_fallback: bool = True
    strict: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy in SUPERVISED and self.K < 2:
            raise ValueError("supervised strategies need K >= 2")
        if self.rs_repeats < 1:
            raise ValueError("rs_repeats must be >= 1")
        if self.rmse_scope not in ("pool_only", "all_trials"):
            raise ValueError(f"unknown rmse_scope {self.rmse_scope!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def rmse(estimates, references) -> float:
    e = np.asarray(estimates, dtype=float)
    r = np.asarray(references, dtype=float)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: {e.shape} vs {r.shape}")
    if e.size == 0:
        raise ValueError("rmse of zero trials")
    return float(np.sqrt(np.mean((e - r) ** 2)))


def cell_seed(seed: int, subject_id: str, strategy: str, K: int) -> int:
    return derive_seed(seed, subject_id, _FAMILY.get(strategy, strategy), K)


@dataclass
class SubjectResult:
    """Outcome of one run. Unpacks as ``(estimates, rmse, state, aggregator)``.

    ``estimates`` covers all N trials; ``scope`` lists the trials scored.
    For ``rs``, the estimates, state and aggregator are those of repeat 0 and
    ``rmse`` is the mean of ``repeat_rmses``.
    """

    estimates: np.ndarray
    rmse: float
    state: SelectionState | None
    aggregator: Aggregator | None
    scope: np.ndarray
    repeat_rmses: list[float] = field(default_factory=list)
    n_queries: int = 0

    def __iter__(self):
        return iter((self.estimates, self.rmse, self.state, self.aggregator))


def _select(X, y, strategy: str, K: int, rng: RandomSource, cfg: RunConfig):
    oracle = LabelOracle(y, budget=K)
    if strategy == "rs":
        state = select_random(X, K, rng)
    elif strategy == "as_gsx":
        state = select_gsx(X, K)
    elif strategy == "as_rd":
        state = select_rd(X, K, rng)
    elif strategy == "as_rd_emcm":
        state = select_rd_emcm(X, K, oracle, rng, cfg.emcm, cfg.svr, cfg.ridge)
    else:
        state = select_igs(X, K, oracle, cfg.svr)
    if not state.labels:
        state.labels = [oracle.query(i) for i in state.labeled]
    return state, oracle.n_queries


def _one_run(record: SubjectRecord, cfg: RunConfig, rng: RandomSource) -> SubjectResult:
    X, y = record.predictions, record.references
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        state, n_queries = _select(X, y, cfg.strategy, cfg.K, rng, cfg)
        S = np.array(state.labeled)
        yS = np.array(state.labels)
        policy = cfg.fallback
        if cfg.strategy == "rs" and not cfg.rs_fallback:
            policy = replace(policy, variant="all")
        agg = build_aggregator(X[S], yS, policy, cfg.svr)
    for w in caught:
        if cfg.strict and issubclass(w.category, ConvergenceWarning):
            raise NumericalFailure(f"subject {record.subject_id!r}: {w.message}")
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    est = apply_aggregator(agg, X)
    if cfg.rmse_scope == "pool_only":
        scope = np.array(state.pool, dtype=int)
    else:
        scope = np.arange(record.n_trials)
    if scope.size == 0:
        raise ValueError(f"subject {record.subject_id!r}: no trials left to score (K = N)")
    if not np.all(np.isfinite(est[scope])):
        raise NumericalFailure(f"subject {record.subject_id!r}: non-finite estimates")
    return SubjectResult(est, rmse(est[scope], y[scope]), state, agg, scope, n_queries=n_queries)


def run_subject(record: SubjectRecord, cfg: RunConfig) -> SubjectResult:
    """Run one strategy on one subject.

    Supervised strategies select ``cfg.K`` trials, label them, build the
    aggregator and score the trials in ``cfg.rmse_scope``. ``rs`` repeats the
    run ``cfg.rs_repeats`` times with seeds ``cfg.seed + r``. ``average`` and
    ``median`` need no labels and score all trials; ``loso`` needs other
    subjects and is only available through :func:`run_loso`.
    """
    X, y = record.predictions, record.references
    if cfg.strategy == "loso":
        raise ValueError("loso spans subjects; use run_loso")
    if cfg.strategy in ("average", "median"):
        est = aggregate_average(X) if cfg.strategy == "average" else aggregate_median(X)
        scope = np.arange(record.n_trials)
        return SubjectResult(est, rmse(est, y), None, None, scope)
    if cfg.K > record.n_trials:
        raise ValueError(f"K={cfg.K} exceeds the {record.n_trials} trials of {record.subject_id!r}")
    if cfg.strategy != "rs":
        return _one_run(record, cfg, RandomSource(cell_seed(cfg.seed, record.subject_id, cfg.strategy, cfg.K)))
    first = None
    scores = []
    for r in range(cfg.rs_repeats):
        seed = (cfg.seed + r) % 2**64
        res = _one_run(record, cfg, RandomSource(cell_seed(seed, record.subject_id, "rs", cfg.K)))
        scores.append(res.rmse)
        if first is None:
            first = res
    first.repeat_rmses = scores
    first.rmse = float(np.mean(scores))
    return first


def run_loso(subjects: Sequence[SubjectRecord], ridge_cfg: RidgeConfig = RidgeConfig()) -> list[float]:
    """Leave-one-subject-out ridge stacking; each held-out subject is scored on all trials."""
    if len(subjects) < 2:
        raise ValueError("LOSO needs at least two subjects")
    out = []
    for i, held in enumerate(subjects):
        X = np.concatenate([s.predictions for j, s in enumerate(subjects) if j != i])
        y = np.concatenate([s.references for j, s in enumerate(subjects) if j != i])
        model = fit_ridge(X, y, ridge_cfg)
        out.append(rmse(predict_many(model, held.predictions), held.references))
    return out


@dataclass
class SweepResult:
    table: EvalTable
    summary: list[dict]
    ratio_to_rs: list[dict]


def _cell(args) -> EvalRow:
    record, cfg = args
    if cfg.strategy in SUPERVISED:
        seed = cell_seed(cfg.seed, record.subject_id, cfg.strategy, cfg.K)
    else:
        seed = cfg.seed
    try:
        res = run_subject(record, cfg)
    except (NumericalFailure, ValueError, np.linalg.LinAlgError) as exc:
        return EvalRow(record.subject_id, cfg.strategy, cfg.K, float("nan"), seed, f"{type(exc).__name__}: {exc}")
    return EvalRow(record.subject_id, cfg.strategy, cfg.K, res.rmse, seed)


def summarize(table: EvalTable) -> list[dict]:
    """Mean, sample std (ddof=1) and count per (strategy, K), skipping error rows."""
    keys: dict[tuple[str, int], list[float]] = {}
    for r in table:
        vals = keys.setdefault((r.strategy, r.K), [])
        if not r.error:
            vals.append(r.rmse)
    out = []
    for (s, K), vals in keys.items():
        a = np.array(vals)
        out.append(
            {
                "strategy": s,
                "K": K,
                "mean": float(a.mean()) if a.size else float("nan"),
                "std": float(a.std(ddof=1)) if a.size > 1 else float("nan"),
                "n": int(a.size),
            }
        )
    return out


def ratios_to_rs(summary: list[dict]) -> list[dict]:
    rs = {d["K"]: d["mean"] for d in summary if d["strategy"] == "rs"}
    return [
        {"strategy": d["strategy"], "K": d["K"], "ratio": d["mean"] / rs[d["K"]]}
        for d in summary
        if d["strategy"] in ACTIVE and d["K"] in rs and rs[d["K"]] > 0
    ]


def sweep(
    subjects: Sequence[SubjectRecord],
    strategies: Iterable[str],
    K_range: Iterable[int],
    cfg: RunConfig = RunConfig(),
    baselines: Iterable[str] = UNSUPERVISED,
    jobs: int = 1,
) -> SweepResult:
    """Evaluate every (subject, strategy, K) cell plus unsupervised baselines.

    Rows are ordered subject-major: baselines first, then strategies in the
    given order, each over ``K_range``. A failing cell becomes a row with
    ``rmse = nan`` and an error message instead of aborting the sweep. LOSO
    rows are emitted only when there are at least two subjects.
    """
    subjects = list(subjects)
    strategies = list(strategies)
    K_range = list(K_range)
    baselines = list(baselines)
    if not subjects or not (strategies or baselines):
        raise ValueError("sweep needs subjects and at least one strategy")
    for s in strategies:
        if s not in SUPERVISED:
            raise ValueError(f"{s!r} is not a supervised strategy")
    for s in baselines:
        if s not in UNSUPERVISED:
            raise ValueError(f"{s!r} is not a baseline")
    if strategies and not K_range:
        raise ValueError("empty K range")

    loso = {}
    if "loso" in baselines and len(subjects) >= 2:
        loso = dict(zip(range(len(subjects)), run_loso(subjects, cfg.ridge)))

    layout = []  # (subject index, strategy, K); strategy "loso" is filled locally
    tasks = []
    for i, rec in enumerate(subjects):
        for b in baselines:
            if b == "loso":
                if loso:
                    layout.append((i, "loso", 0))
                continue
            layout.append((i, b, 0))
            tasks.append((rec, replace(cfg, strategy=b, K=0)))
        for s in strategies:
            for K in K_range:
                layout.append((i, s, K))
                tasks.append((rec, replace(cfg, strategy=s, K=K)))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_cell, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        results = [_cell(t) for t in tasks]

    it = iter(results)
    table = EvalTable()
    for i, s, K in layout:
        if s == "loso":
            table.append(EvalRow(subjects[i].subject_id, "loso", 0, loso[i], cfg.seed))
        else:
            table.append(next(it))
    summary = summarize(table)
    return SweepResult(table, summary, ratios_to_rs(summary))


def mean_rmse_over_K(table: EvalTable, strategy: str, K_set: Iterable[int], subjects: Sequence[str] | None = None) -> np.ndarray:
    """Per-subject mean RMSE over ``K_set``, in ``subjects`` order (default: table order).

    Raises :class:`MissingCellError` naming the first absent or failed cell.
    """
    K_set = list(K_set)
    if not K_set:
        raise ValueError("empty K set")
    subjects = list(subjects) if subjects is not None else table.subjects()
    cells = {(r.subject_id, r.K): r for r in table.select(strategy)}
    out = np.empty(len(subjects))
    for i, sid in enumerate(subjects):
        vals = []
        for K in K_set:
            row = cells.get((sid, K))
            if row is None:
                raise MissingCellError(sid, strategy, K)
            if row.error:
                raise MissingCellError(sid, strategy, K, "failed")
            vals.append(row.rmse)
        out[i] = np.mean(vals)
    return out
