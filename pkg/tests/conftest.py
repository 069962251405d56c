import numpy as np
import pytest

from activestack.core import SubjectRecord
from activestack.datagen import CohortSpec, generate_cohort


def make_subject(seed, n=20, m=5, sid=None, spikes=True):
    """Small random subject at heart-rate scale with occasional breakdowns."""
    rng = np.random.default_rng(seed)
    ref = 60 + 40 * rng.random() + np.cumsum(rng.normal(0, 2, n))
    ref = np.clip(ref, 35, 200)
    X = ref[:, None] + rng.normal(0, 2, (n, m))
    if spikes:
        hit = rng.random((n, m)) < 0.08
        X[hit] = np.where(rng.random(hit.sum()) < 0.5, 0.0, 1000 + 400 * rng.random(hit.sum()))
    return SubjectRecord(sid or f"t{seed}", np.maximum(X, 0), ref)


@pytest.fixture(scope="session")
def small_cohort():
    return generate_cohort(CohortSpec(n_subjects=6, trials_per_subject=(25, 40), seed=11))


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE: dict[int, tuple[str, str]] = {}


def record_criterion(number: int, status: str, detail: str) -> None:
    """Store one acceptance outcome (PASS, FAIL or SKIP) for the end-of-run summary."""
    ACCEPTANCE[number] = (status, detail)
    print(f"criterion {number}: {status} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status} - {detail}")
