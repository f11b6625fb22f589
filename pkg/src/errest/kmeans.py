"""Seeded k-means with k-means++ initialization.

Lloyd iterations with at most `max_iter` passes, `n_init` restarts keeping the
lowest within-cluster sum of squares. The per-iteration objective history is
kept on the result so monotonicity can be verified.
"""

from dataclasses import dataclass

import numpy as np


class KMeansError(RuntimeError):
    """Raised when no restart produces k nonempty clusters."""


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list[float]  # objective after each Lloyd iteration, non-increasing


def _plusplus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = X[rng.integers(n)]
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), r))
        idx = min(idx, n - 1)
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int):
    k = centers.shape[0]
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        obj = float(d2[np.arange(X.shape[0]), new_labels].sum())
        if np.any(np.bincount(new_labels, minlength=k) == 0):
            return None, None, history
        for j in range(k):
            centers[j] = X[new_labels == j].mean(axis=0)
        history.append(obj)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
    return labels, centers, history


def kmeans(X, k: int, seed: int, *, n_init: int = 10, max_iter: int = 100,
           empty_retries: int = 10) -> KMeansResult:
    """Cluster rows of X into k groups; deterministic for a fixed seed.

    Restarts with a fresh initialization when a cluster empties out; raises
    KMeansError once `empty_retries` extra attempts are exhausted.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if k < 1 or k > n:
        raise KMeansError(f"need 1 <= k <= n, got k={k}, n={n}")
    distinct = np.unique(X, axis=0).shape[0]
    if distinct < k:
        raise KMeansError(f"only {distinct} distinct rows for k={k} clusters")

    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    best: KMeansResult | None = None
    attempts = n_init + empty_retries
    successes = 0
    for _ in range(attempts):
        centers = _plusplus_init(X, k, rng)
        labels, centers, history = _lloyd(X, centers.copy(), max_iter)
        if labels is None:
            continue
        successes += 1
        inertia = history[-1]
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels=labels, centers=centers, inertia=inertia, history=history)
        if successes >= n_init:
            break
    if best is None:
        raise KMeansError(f"k-means produced an empty cluster in all {attempts} attempts")
    return best
