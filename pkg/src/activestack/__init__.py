"""Active stacking of heart-rate estimators.

Select a few trials per subject to label, fit a linear stacking model (or
fall back to the median of estimators that reproduce every label), and
compare against unsupervised ensemble baselines.
"""

from .core import (
    Aggregator,
    DataError,
    EvalRow,
    EvalTable,
    LinearModel,
    SelectionState,
    SubjectRecord,
    validate_subject,
)
from .datagen import CohortSpec, generate_cohort
from .ensemble import FallbackPolicy
from .pipeline import RunConfig, run_loso, run_subject, sweep

__version__ = "0.1.0"

__all__ = [
    "Aggregator",
    "CohortSpec",
    "DataError",
    "EvalRow",
    "EvalTable",
    "FallbackPolicy",
    "LinearModel",
    "RunConfig",
    "SelectionState",
    "SubjectRecord",
    "generate_cohort",
    "run_loso",
    "run_subject",
    "sweep",
    "validate_subject",
]
