"""Domain data model shared across the package.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be passed to worker processes and shared without copying concerns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when ingested subject data violates a record invariant.

    ``trial`` is the 0-based index of the first offending trial, when the
    violation is tied to one.
    """

    def __init__(self, message: str, trial: int | None = None):
        super().__init__(message)
        self.trial = trial


class DimensionMismatchError(DataError):
    pass


class NonFiniteValueError(DataError):
    pass


class NonPositiveReferenceError(DataError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """One subject: an N x M matrix of base-estimator bpm values plus N references.

    Construction does not validate; call :func:`validate_subject`.
    """

    subject_id: str
    predictions: np.ndarray
    references: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "predictions", _frozen(self.predictions))
        object.__setattr__(self, "references", _frozen(self.references))

    @property
    def n_trials(self) -> int:
        return int(self.predictions.shape[0])

    @property
    def n_estimators(self) -> int:
        return int(self.predictions.shape[1]) if self.predictions.ndim == 2 else 0

    def __eq__(self, other):
        if not isinstance(other, SubjectRecord):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.predictions.shape == other.predictions.shape
            and self.references.shape == other.references.shape
            and np.array_equal(self.predictions, other.predictions)
            and np.array_equal(self.references, other.references)
        )

    __hash__ = None


def validate_subject(record: SubjectRecord) -> SubjectRecord:
    """Check every :class:`SubjectRecord` invariant and return the record unchanged.

    Raises
    ------
    DimensionMismatchError
        Predictions are not a non-empty 2-D matrix, or the reference vector
        length differs from the number of trials.
    NonFiniteValueError
        Any NaN or infinite entry, or a negative prediction.
    NonPositiveReferenceError
        Any reference heart rate <= 0.
    """
    X = record.predictions
    y = record.references
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatchError(
            f"subject {record.subject_id!r}: predictions must be a non-empty "
            f"N x M matrix, got shape {X.shape}"
        )
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionMismatchError(
            f"subject {record.subject_id!r}: {y.shape[0] if y.ndim == 1 else y.shape} "
            f"references for {X.shape[0]} trials"
        )
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise NonFiniteValueError(
            f"subject {record.subject_id!r}: non-finite prediction at trial {bad[0]}, "
            f"estimator {bad[1]}",
            trial=int(bad[0]),
        )
    if np.any(X < 0):
        bad = np.argwhere(X < 0)[0]
        raise NonFiniteValueError(
            f"subject {record.subject_id!r}: negative prediction at trial {bad[0]}, "
            f"estimator {bad[1]}",
            trial=int(bad[0]),
        )
    if not np.all(np.isfinite(y)):
        t = int(np.argmax(~np.isfinite(y)))
        raise NonFiniteValueError(
            f"subject {record.subject_id!r}: non-finite reference at trial {t}", trial=t
        )
    if np.any(y <= 0):
        t = int(np.argmax(y <= 0))
        raise NonPositiveReferenceError(
            f"subject {record.subject_id!r}: non-positive reference at trial {t}", trial=t
        )
    return record


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Stacking regressor ``y_hat = weights @ x + intercept``.

    ``converged`` is False when an iterative solver stopped at its iteration
    cap and returned its best iterate.
    """

    weights: np.ndarray
    intercept: float
    converged: bool = True

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite 1-D vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class SelectionState:
    """Labeled indices (in query order), their labels, and the remaining pool.

    ``trace`` holds optional per-step diagnostics from supervised strategies.
    """

    n_trials: int
    labeled: list[int] = field(default_factory=list)
    labels: list[float] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)

    @property
    def pool(self) -> list[int]:
        chosen = set(self.labeled)
        return [i for i in range(self.n_trials) if i not in chosen]

    def add(self, index: int, label: float | None = None) -> None:
        if index in self.labeled:
            raise ValueError(f"trial {index} already labeled")
        if not 0 <= index < self.n_trials:
            raise IndexError(f"trial {index} out of range [0, {self.n_trials})")
        self.labeled.append(int(index))
        if label is not None:
            self.labels.append(float(label))

    def check(self) -> None:
        if len(set(self.labeled)) != len(self.labeled):
            raise AssertionError("duplicate labeled indices")
        if self.labels and len(self.labels) != len(self.labeled):
            raise AssertionError("labels out of step with labeled indices")


@dataclass(frozen=True)
class Aggregator:
    """Final-estimate rule: a median over consistent columns, or a linear model."""

    kind: Literal["median_fallback", "linear"]
    consistent_estimators: tuple[int, ...] = ()
    model: LinearModel | None = None

    def __post_init__(self):
        if self.kind == "median_fallback":
            if not self.consistent_estimators:
                raise ValueError("median_fallback needs a non-empty estimator set")
        elif self.kind == "linear":
            if self.model is None:
                raise ValueError("linear aggregator needs a model")
        else:
            raise ValueError(f"unknown aggregator kind {self.kind!r}")


@dataclass(frozen=True)
class EvalRow:
    subject_id: str
    strategy: str
    K: int
    rmse: float
    seed: int
    error: str = ""


SUPERVISED = ("rs", "as_gsx", "as_rd", "as_rd_emcm", "as_igs")
UNSUPERVISED = ("average", "median", "loso")
ACTIVE = SUPERVISED[1:]


class EvalTable:
    """Ordered collection of :class:`EvalRow` results."""

    def __init__(self, rows: Sequence[EvalRow] = ()):
        self.rows: list[EvalRow] = list(rows)
        for r in self.rows:
            self._check(r)

    @staticmethod
    def _check(row: EvalRow) -> None:
        if not row.error and not (row.rmse >= 0):
            raise ValueError(f"rmse must be >= 0, got {row.rmse}")
        if row.strategy in SUPERVISED and row.K < 2:
            raise ValueError("supervised rows need K >= 2")
        if row.strategy in UNSUPERVISED and row.K != 0:
            raise ValueError("unsupervised rows carry K = 0")

    def append(self, row: EvalRow) -> None:
        self._check(row)
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def select(self, strategy: str | None = None, K: int | None = None) -> list[EvalRow]:
        return [
            r
            for r in self.rows
            if (strategy is None or r.strategy == strategy) and (K is None or r.K == K)
        ]

    def subjects(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.rows:
            seen.setdefault(r.subject_id, None)
        return list(seen)
