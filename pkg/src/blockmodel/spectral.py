"""Spectral initialization: leading-eigenvector embedding plus seeded k-means.

This is a fitting heuristic only; no consistency guarantees are used
anywhere. Deterministic given the generator passed in.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .model import Graph

__all__ = ["spectral_embedding", "kmeans", "spectral_labels"]

_DENSE_CUTOFF = 400  # below this, dense eigh is cheap and has no RNG at all


def spectral_embedding(graph: Graph, K: int) -> np.ndarray:
    """Row-normalized eigenvectors of A for the K largest algebraic eigenvalues."""
    A = graph.adjacency.astype(float)
    n = graph.n
    if K >= n:
        raise ValueError("spectral embedding needs K < n")
    if n <= _DENSE_CUTOFF or K >= n - 1:
        w, V = np.linalg.eigh(A)
        emb = V[:, np.argsort(w)[::-1][:K]]
    else:
        # Fixed start vector keeps ARPACK deterministic.
        v0 = np.ones(n) / np.sqrt(n)
        try:
            w, V = scipy.sparse.linalg.eigsh(
                scipy.sparse.csr_matrix(A), k=K, which="LA", v0=v0
            )
            emb = V[:, np.argsort(w)[::-1]]
        except scipy.sparse.linalg.ArpackError:
            w, V = np.linalg.eigh(A)
            emb = V[:, np.argsort(w)[::-1][:K]]
    norms = np.linalg.norm(emb, axis=1)
    norms[norms == 0] = 1.0
    return emb / norms[:, None]


def kmeans(
    points: np.ndarray, K: int, rng: np.random.Generator, n_iter: int = 50
) -> np.ndarray:
    """Plain Lloyd iterations with k-means++ seeding; returns 0-based labels."""
    n = points.shape[0]
    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            centers[k] = points[rng.integers(n)]
        else:
            centers[k] = points[np.searchsorted(np.cumsum(d2 / total), rng.random())]
        d2 = np.minimum(d2, np.sum((points - centers[k]) ** 2, axis=1))
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(n_iter):
        dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dists.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for k in range(K):
            mask = labels == k
            if mask.any():
                centers[k] = points[mask].mean(axis=0)
    return labels


def spectral_labels(graph: Graph, K: int, rng: np.random.Generator) -> np.ndarray:
    """Spectral embedding followed by k-means; the standard warm start."""
    if K == 1:
        return np.zeros(graph.n, dtype=np.int64)
    return kmeans(spectral_embedding(graph, K), K, rng)
