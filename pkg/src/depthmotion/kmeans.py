"""Scalar K-means: Lloyd iterations with k-means++ seeding.

Random restarts alone can stall in a non-optimal fixpoint. In one dimension
an optimal partition is contiguous in sorted order, so an exact dynamic
program supplies one more Lloyd start that is already optimal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

MAX_ITER = 50
MAX_SAMPLES = 4096


@dataclass
class KMeansResult:
    centroids: np.ndarray  # sorted ascending
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.size)]]
    d2 = (x - centers[0]) ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total == 0:
            break
        c = x[rng.choice(x.size, p=d2 / total)]
        centers.append(c)
        np.minimum(d2, (x - c) ** 2, out=d2)
    return np.array(centers, dtype=np.float64)


def _assign(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.abs(x[:, None] - centers[None, :]).argmin(axis=1)


def lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = MAX_ITER) -> KMeansResult:
    """Run Lloyd iterations from ``centers`` until assignments stop changing."""
    centers = np.array(centers, dtype=np.float64)
    k = centers.size
    labels = _assign(x, centers)
    history = [float(((x - centers[labels]) ** 2).sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean()
            else:
                # reseed an empty cluster at the worst-served point
                far = np.argmax((x - centers[labels]) ** 2)
                centers[j] = x[far]
                labels[far] = j
        new_labels = _assign(x, centers)
        history.append(float(((x - centers[new_labels]) ** 2).sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    centers = np.unique(centers)
    inertia = float(((x - centers[_assign(x, centers)]) ** 2).sum())
    return KMeansResult(centers, inertia, n_iter, history)


def _segment_argmin(values: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum and first position of the minimum within consecutive segments."""
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    mins = np.minimum.reduceat(values, starts)
    seg = np.repeat(np.arange(lengths.size), lengths)
    hits = np.flatnonzero(values == mins[seg])
    _, first = np.unique(seg[hits], return_index=True)
    return mins, hits[first] - starts


def optimal_partition(x_sorted: np.ndarray, k: int) -> np.ndarray:
    """Exact k-means centroids of sorted scalar data.

    Dynamic program over contiguous segments. The optimal split point is
    monotone in the right end, so each layer is solved by divide and conquer,
    one vectorized pass per recursion level.
    """
    x = x_sorted
    m = x.size
    s1 = np.concatenate([[0.0], np.cumsum(x)])
    s2 = np.concatenate([[0.0], np.cumsum(x * x)])

    def cost(a, b):
        return s2[b] - s2[a] - (s1[b] - s1[a]) ** 2 / (b - a)

    ends = np.arange(m + 1)
    prev = np.full(m + 1, np.inf)
    prev[1:] = cost(np.zeros(m, dtype=np.int64), ends[1:])
    splits = []
    for j in range(2, k + 1):
        cur = np.full(m + 1, np.inf)
        arg = np.zeros(m + 1, dtype=np.int64)
        # nodes: end range [lo, hi] and split candidate range [olo, ohi]
        lo, hi = np.array([j]), np.array([m])
        olo, ohi = np.array([j - 1]), np.array([m - 1])
        while lo.size:
            mid = (lo + hi) // 2
            top = np.minimum(ohi, mid - 1)
            lengths = top - olo + 1
            cand = np.repeat(olo - np.cumsum(np.concatenate([[0], lengths[:-1]])), lengths) + np.arange(lengths.sum())
            ends_rep = np.repeat(mid, lengths)
            vals, pos = _segment_argmin(prev[cand] + cost(cand, ends_rep), lengths)
            cur[mid] = vals
            arg[mid] = olo + pos
            left = mid > lo
            right = mid < hi
            lo, hi, olo, ohi = (
                np.concatenate([lo[left], mid[right] + 1]),
                np.concatenate([mid[left] - 1, hi[right]]),
                np.concatenate([olo[left], arg[mid][right]]),
                np.concatenate([arg[mid][left], ohi[right]]),
            )
        splits.append(arg)
        prev = cur
    bounds = [m]
    for arg in reversed(splits):
        bounds.append(int(arg[bounds[-1]]))
    bounds.append(0)
    bounds = bounds[::-1]
    return np.array([x[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])


def kmeans_1d(
    values, n: int, seed: int = 0, n_init: int = 1, max_iter: int = MAX_ITER, exact: bool = True
) -> KMeansResult:
    """Best-of-``n_init`` K-means on scalar data.

    With ``exact`` the exact one-dimensional optimum joins the restarts as an
    extra Lloyd start. If there are fewer than ``n`` distinct values the
    number of clusters is reduced to match, and coincident centroids are
    merged.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if n < 1:
        raise ContractViolation(f"n must be >= 1, got {n}")
    if x.size == 0:
        raise ContractViolation("cannot cluster an empty array")
    k = min(n, np.unique(x).size)
    rng = np.random.default_rng(seed)
    best = lloyd(x, optimal_partition(np.sort(x), k), max_iter) if exact else None
    for _ in range(max(1, n_init)):
        result = lloyd(x, _kmeanspp(x, k, rng), max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def kmeans_depth(depth, n: int, seed: int = 0, max_samples: int | None = MAX_SAMPLES, n_init: int = 1) -> list[float]:
    """Cluster centres of a depth map's values, ascending.

    At most ``max_samples`` uniformly strided pixels are used; pass
    ``max_samples=None`` to cluster the full map.
    """
    values = np.asarray(getattr(depth, "values", depth), dtype=np.float64).ravel()
    if max_samples is not None and values.size > max_samples:
        stride = int(np.ceil(values.size / max_samples))
        values = values[::stride]
    return kmeans_1d(values, n, seed=seed, n_init=n_init).centroids.tolist()
