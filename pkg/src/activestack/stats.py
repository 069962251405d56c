"""Dunn's pairwise rank test with Benjamini-Hochberg FDR correction."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata


@dataclass
class ComparisonMatrix:
    """Symmetric matrices over ``names``; diagonals are NaN."""

    names: list[str]
    z: np.ndarray
    raw_p: np.ndarray
    p: np.ndarray
    alpha: float

    @property
    def significant(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.p < self.alpha

    def pvalue(self, a: str, b: str) -> float:
        return float(self.p[self.names.index(a), self.names.index(b)])

    def to_dict(self) -> dict:
        def clean(m):
            return [[None if np.isnan(v) else float(v) for v in row] for row in m]

        return {
            "names": list(self.names),
            "alpha": self.alpha,
            "z": clean(self.z),
            "raw_p": clean(self.raw_p),
            "p": clean(self.p),
            "significant": [
                [None if i == j else bool(self.p[i, j] < self.alpha) for j in range(len(self.names))]
                for i in range(len(self.names))
            ],
        }


def bh_adjust(pvals) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, clipped to 1."""
    p = np.asarray(pvals, dtype=float)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def dunn_fdr(groups: Sequence, alpha: float = 0.05, names: Sequence[str] | None = None) -> ComparisonMatrix:
    """All-pairs Dunn test on pooled mid-ranks, two-sided, BH-corrected.

    The standard error uses Dunn's tie correction
    ``sqrt((N(N+1)/12 - sum(t^3 - t) / (12(N-1))) * (1/n_i + 1/n_j))``.
    """
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    k = len(groups)
    if k < 2:
        raise ValueError("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("empty group")
    names = list(names) if names is not None else [f"g{i}" for i in range(k)]
    if len(names) != k:
        raise ValueError("one name per group")
    sizes = np.array([g.size for g in groups])
    pooled = np.concatenate(groups)
    N = pooled.size
    ranks = rankdata(pooled)
    _, ties = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(ties**3 - ties)) / (12.0 * (N - 1)) if N > 1 else 0.0
    var = N * (N + 1) / 12.0 - tie_term
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    mean_rank = np.array([ranks[bounds[i] : bounds[i + 1]].mean() for i in range(k)])

    z = np.full((k, k), np.nan)
    raw = np.full((k, k), np.nan)
    pairs = list(combinations(range(k), 2))
    raw_list = []
    for i, j in pairs:
        se = np.sqrt(var * (1.0 / sizes[i] + 1.0 / sizes[j]))
        zij = (mean_rank[i] - mean_rank[j]) / se if se > 0 else 0.0
        pij = float(min(1.0, 2.0 * norm.sf(abs(zij))))
        z[i, j], z[j, i] = zij, -zij
        raw[i, j] = raw[j, i] = pij
        raw_list.append(pij)
    adj = bh_adjust(raw_list)
    p = np.full((k, k), np.nan)
    for (i, j), pij in zip(pairs, adj):
        p[i, j] = p[j, i] = pij
    return ComparisonMatrix(names, z, raw, p, alpha)
