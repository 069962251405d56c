"""Deterministic numerical primitives.

Distances, order statistics, bootstrap resampling, k-means, and the seeded
random source. Ties are always resolved in favour of the smallest index.

The random source is SplitMix64 (Steele, Lea & Flood 2014), chosen because it
is a few lines in any language, so result files can be reproduced outside
Python given the seed. Derived quantities are defined on top of the raw
64-bit stream:

* ``uniform``: ``(z >> 11) * 2**-53``, in [0, 1).
* ``integers(n)``: rejection sampling, draw ``z`` until
  ``z < 2**64 - (2**64 mod n)``, return ``z mod n``.
* ``normal``: Box-Muller on consecutive uniform pairs ``(u1, u2)``:
  ``sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)``.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class RandomSource:
    """SplitMix64 stream. Single owner; never share between workers."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw outputs as uint64, identical to ``n`` calls of next_u64."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GOLDEN) & _MASK
        return z

    def uniform(self, size: int | None = None):
        if size is None:
            return (self.next_u64() >> 11) * 2.0**-53
        return (self.raw(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def integers(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % n

    def normal(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.ravel()[:size]

    def spawn(self, *parts) -> "RandomSource":
        return RandomSource(derive_seed(self.seed, *parts))


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary printable parts (BLAKE2b of their repr)."""
    h = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def min_distance_to_set(x, S) -> tuple[float, int]:
    """Smallest distance from ``x`` to rows of ``S`` and the first index attaining it."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] == 0 or np.asarray(S).size == 0:
        raise ValueError("S is empty")
    x = np.asarray(x, dtype=float)
    if S.shape[1] != x.shape[0]:
        raise ValueError("length mismatch")
    d = np.sqrt(np.sum((S - x) ** 2, axis=1))
    i = int(np.argmin(d))
    return float(d[i]), i


def pairwise_distances(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return np.sqrt(np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2))


def nearest_to_centroid(points) -> int:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] == 0:
        raise ValueError("empty point list")
    d = np.sqrt(np.sum((P - P.mean(axis=0)) ** 2, axis=1))
    return int(np.argmin(d))


def median(values) -> float:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    n = v.size
    if n == 0:
        raise ValueError("median of empty list")
    mid = n // 2
    if n % 2:
        return float(v[mid])
    return float((v[mid - 1] + v[mid]) / 2.0)


def bootstrap_indices(n: int, rng: RandomSource) -> list[int]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [rng.integers(n) for _ in range(n)]


@dataclass
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int = 0
    trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == c)


def _kmeanspp(X: np.ndarray, k: int, rng: RandomSource) -> np.ndarray:
    n = X.shape[0]
    chosen = [rng.integers(n)]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        u = rng.uniform()
        if total > 0:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, u * total, side="right"))
            idx = min(idx, n - 1)
        else:
            free = [i for i in range(n) if i not in chosen]
            idx = free[int(u * len(free))]
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[chosen].copy()


_EXACT_MAX_LABELINGS = 4096


def _kmeans_exact(X: np.ndarray, k: int) -> Clustering:
    """Global inertia minimiser over all partitions into ``k`` non-empty clusters.

    Labelings are enumerated in lexicographic order and the first minimiser is
    kept, so the result is deterministic.
    """
    n = X.shape[0]
    labels = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.intp).reshape(-1, n)
    onehot = labels[:, None, :] == np.arange(k)[None, :, None]
    counts = onehot.sum(axis=2)
    keep = np.all(counts > 0, axis=1)
    onehot, counts, labels = onehot[keep], counts[keep], labels[keep]
    sums = onehot.astype(float) @ X
    within = np.sum(X * X) - np.sum(np.sum(sums * sums, axis=2) / counts, axis=1)
    assignments = labels[int(np.argmin(within))].astype(np.intp)
    centroids = np.array([X[assignments == c].mean(axis=0) for c in range(k)])
    inertia = float(np.sum((X - centroids[assignments]) ** 2))
    return Clustering(assignments, centroids, inertia, 0, [inertia])


def kmeans(
    points,
    k: int,
    rng: RandomSource,
    *,
    max_iter: int = 300,
    n_restarts: int = 10,
) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_restarts`` by inertia.

    An empty cluster is repaired by moving to it the point farthest from its
    own centroid (among clusters with more than one member), so the result
    always has exactly ``k`` non-empty clusters.

    Tiny instances (``k**n`` at most 4096 labelings) are solved exactly by
    enumerating every partition: restarts alone can all land in the same local
    optimum, e.g. when duplicated points make the seeding nearly deterministic.
    No random draws are consumed on that path.
    """
    X = np.ascontiguousarray(np.asarray(points, dtype=float))
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    if k ** n <= _EXACT_MAX_LABELINGS:
        return _kmeans_exact(X, k)
    best = None
    for _ in range(n_restarts):
        init = _kmeanspp(X, k, rng)
        labels, centers, inertia, n_iter, trace = kernels.lloyd(X, init, max_iter)
        if best is None or inertia < best.inertia:
            best = Clustering(
                np.asarray(labels, dtype=np.intp), np.asarray(centers), float(inertia),
                int(n_iter), list(trace),
            )
    return best
