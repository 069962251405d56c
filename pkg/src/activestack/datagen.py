"""Seeded synthetic cohorts at heart-rate scale.

Each subject gets a baseline heart rate and a bounded random-walk drift
across trials. Estimator columns are the reference plus Gaussian noise and a
per-subject, per-estimator bias. Breakdowns (0 bpm, or 1000-1400 bpm) are
confined to a per-subject set of "fragile" estimators and to "artifact"
trials, so that some estimators are reliable for a given subject and
several fragile ones tend to fail on the same noisy trial. The conditional
rate is scaled so that the overall per-entry breakdown probability is
exactly ``breakdown_prob``. Optionally one column is made equal to the
reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SubjectRecord, validate_subject
from .numerics import RandomSource, derive_seed

REF_LOW, REF_HIGH = 30.0, 220.0


@dataclass(frozen=True)
class CohortSpec:
    """Cohort parameters. Ranges are inclusive ``(low, high)`` pairs.

    ``fragile_share`` is the fraction of estimators (rounded, at least one)
    that can break down for each subject. Each trial is an artifact trial
    with probability ``artifact_prob``; on artifact trials every fragile
    estimator breaks independently with probability
    ``breakdown_prob * m / (n_fragile * artifact_prob)``.
    ``fragile_share = artifact_prob = 1`` gives independent breakdowns at
    ``breakdown_prob`` on every entry. ``bias_sd`` is the spread of
    constant per-subject, per-estimator offsets.
    """

    n_subjects: int = 100
    trials_per_subject: tuple[int, int] = (40, 120)
    m_estimators: int = 12
    baseline_bpm: tuple[float, float] = (50.0, 120.0)
    drift_sd: float = 2.0
    drift_bound: float = 25.0
    estimator_noise_sd: float = 1.0
    bias_sd: float = 1.0
    breakdown_prob: float = 0.006
    fragile_share: float = 0.25
    artifact_prob: float = 0.03
    breakdown_zero_share: float = 0.5
    breakdown_high: tuple[float, float] = (1000.0, 1400.0)
    exact_estimator_prob: float = 0.1
    seed: int = 42

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if self.m_estimators < 2:
            raise ValueError("m_estimators must be >= 2")
        lo, hi = self.trials_per_subject
        if not 1 <= lo <= hi:
            raise ValueError("trials_per_subject must satisfy 1 <= low <= high")
        for name in ("baseline_bpm", "breakdown_high"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        for name in ("breakdown_prob", "exact_estimator_prob", "breakdown_zero_share", "fragile_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.artifact_prob <= 1.0:
            raise ValueError("artifact_prob must lie in (0, 1]")
        for name in ("drift_sd", "drift_bound", "estimator_noise_sd", "bias_sd"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.breakdown_prob > 0 and self.fragile_rate > 1.0:
            raise ValueError("breakdown_prob too large for fragile_share and artifact_prob")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_fragile(self) -> int:
        return max(1, int(round(self.fragile_share * self.m_estimators)))

    @property
    def fragile_rate(self) -> float:
        """Breakdown probability of a fragile estimator on an artifact trial."""
        return self.breakdown_prob * self.m_estimators / (self.n_fragile * self.artifact_prob)


def _subject(spec: CohortSpec, index: int) -> SubjectRecord:
    rng = RandomSource(derive_seed(spec.seed, "subject", index))
    lo, hi = spec.trials_per_subject
    n = lo + rng.integers(hi - lo + 1)
    m = spec.m_estimators
    base = spec.baseline_bpm[0] + (spec.baseline_bpm[1] - spec.baseline_bpm[0]) * rng.uniform()

    steps = spec.drift_sd * rng.normal(n)
    walk = np.empty(n)
    level = 0.0
    for t in range(n):
        level = float(np.clip(level + steps[t], -spec.drift_bound, spec.drift_bound))
        walk[t] = level
    ref = np.clip(base + walk, REF_LOW, REF_HIGH)

    bias = spec.bias_sd * rng.normal(m)
    rates = np.zeros(m)
    order = list(range(m))
    for i in range(spec.n_fragile):  # partial Fisher-Yates: the fragile columns
        j = i + rng.integers(m - i)
        order[i], order[j] = order[j], order[i]
    rates[order[: spec.n_fragile]] = spec.fragile_rate
    noise = spec.estimator_noise_sd * rng.normal(n * m).reshape(n, m)
    X = ref[:, None] + bias[None, :] + noise
    artifact = rng.uniform(n) < spec.artifact_prob
    hit = (rng.uniform(n * m).reshape(n, m) < rates[None, :]) & artifact[:, None]
    zero = rng.uniform(n * m).reshape(n, m) < spec.breakdown_zero_share
    hlo, hhi = spec.breakdown_high
    high = hlo + (hhi - hlo) * rng.uniform(n * m).reshape(n, m)
    X = np.where(hit, np.where(zero, 0.0, high), X)
    X = np.maximum(X, 0.0)
    if rng.uniform() < spec.exact_estimator_prob:
        X[:, rng.integers(m)] = ref
    return validate_subject(SubjectRecord(f"s{index:03d}", X, ref))


def generate_cohort(spec: CohortSpec = CohortSpec()) -> list[SubjectRecord]:
    """Deterministic in ``spec``; subject ``i`` depends only on ``(seed, i)``."""
    return [_subject(spec, i) for i in range(spec.n_subjects)]


PRESETS = {"default": CohortSpec()}
