"""Likelihood modularity Q_n and the greedy label search that maximizes it.

Q_n(A, e) is the complete-data log-likelihood profiled over the parameters at
a fixed labeling e; maximizing it over labelings gives the maximum profile
likelihood estimate of the latent classes. Also contains the population-side
helpers used in concentration experiments: tau, F, the confusion matrix, and
the centered edge-count matrix X(e).

Convention 0 * log 0 = 0 everywhere; O_ab = n_ab makes the complementary log
term vanish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Graph, ModelParams, derived_rng, sufficient_stats
from .spectral import spectral_labels

__all__ = [
    "ConfusionMatrix",
    "ProfileSearchConfig",
    "tau",
    "F",
    "modularity_Qn",
    "confusion",
    "concentration_X",
    "profile_label_search",
]


def tau(x) -> float | np.ndarray:
    """tau(x) = x log x - x, continuously extended with tau(0) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("tau requires x >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)) - x, 0.0)
    return float(out) if out.ndim == 0 else out


def F(M: np.ndarray, t: np.ndarray) -> float:
    """F(M, t) = sum_{a,b} t_a t_b tau(M_ab / (t_a t_b)) on the K-simplex."""
    M = np.asarray(M, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(M < 0):
        raise ValueError("F requires M >= 0")
    if np.any(t < 0) or abs(t.sum() - 1.0) > 1e-10:
        raise ValueError("t must lie on the simplex")
    tt = np.outer(t, t)
    if np.any((tt == 0) & (M > 0)):
        raise ValueError("F undefined: M_ab > 0 where t_a t_b = 0")
    out = 0.0
    pos = tt > 0
    out += float((tt[pos] * tau(M[pos] / tt[pos])).sum())
    return out


def _xlogx_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num * log(num / den) with 0 * log(.) = 0; assumes num <= den."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    pos = num > 0
    out[pos] = num[pos] * np.log(num[pos] / den[pos])
    return out


def _qn_from_counts(n_a: np.ndarray, O: np.ndarray, n: int) -> float:
    n_ab = np.outer(n_a, n_a) - np.diag(n_a)
    label_term = float(_xlogx_ratio(n_a, np.full(len(n_a), float(n))).sum())
    edge_term = _xlogx_ratio(O, np.maximum(n_ab, 1))
    edge_term += _xlogx_ratio(n_ab - O, np.maximum(n_ab, 1))
    return label_term + 0.5 * float(edge_term.sum())


def modularity_Qn(graph: Graph, labels: np.ndarray, K: int) -> float:
    """Likelihood modularity: sup over parameters of the complete-data log-likelihood.

    Q_n = sum_a n_a log(n_a/n)
        + 1/2 sum_{a,b} [O_ab log(O_ab/n_ab) + (n_ab - O_ab) log(1 - O_ab/n_ab)].
    Equals complete_loglik at the closed-form MLE whenever no block is empty.
    """
    stats = sufficient_stats(graph, labels, K)
    return _qn_from_counts(stats.n_a, stats.O_ab.astype(float), graph.n)


@dataclass(frozen=True)
class ConfusionMatrix:
    """R(a, a') = fraction of nodes with candidate class a and reference class a'."""

    R: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if np.any(R < 0) or abs(R.sum() - 1.0) > 1e-10:
            raise ValueError("confusion matrix must be nonnegative and sum to 1")
        R = np.array(R)
        R.setflags(write=False)
        object.__setattr__(self, "R", R)


def confusion(candidate: np.ndarray, reference: np.ndarray, K: int) -> ConfusionMatrix:
    e = np.asarray(candidate, dtype=np.int64)
    c = np.asarray(reference, dtype=np.int64)
    if e.shape != c.shape:
        raise ValueError("labelings must have equal length")
    R = np.zeros((K, K))
    np.add.at(R, (e, c), 1.0)
    return ConfusionMatrix(R=R / len(e))


def concentration_X(
    graph: Graph,
    candidate: np.ndarray,
    reference: np.ndarray,
    params: ModelParams,
) -> np.ndarray:
    """X(e) = O(A, e) / mu_n - R S R' with mu_n = n^2 rho.

    R is the confusion matrix of the candidate against the generative
    reference labeling; X concentrates around zero entrywise. Experiment
    harness utility, not an estimator.
    """
    stats = sufficient_stats(graph, candidate, params.K)
    mu_n = graph.n**2 * params.rho
    R = confusion(candidate, reference, params.K).R
    return stats.O_ab / mu_n - R @ params.S @ R.T


@dataclass(frozen=True)
class ProfileSearchConfig:
    restarts: int = 3  # first restart is spectral, the rest uniform random
    max_sweeps: int = 100
    seed: int | tuple = 0


def _greedy_sweeps(
    graph: Graph, K: int, labels: np.ndarray, rng: np.random.Generator, max_sweeps: int
) -> tuple[np.ndarray, float]:
    n = graph.n
    A = graph.adjacency.astype(np.int64)
    z = np.array(labels, dtype=np.int64)
    onehot = np.zeros((n, K), dtype=np.int64)
    onehot[np.arange(n), z] = 1
    n_a = onehot.sum(axis=0)
    O = onehot.T @ A @ onehot
    for _ in range(max_sweeps):
        moved = False
        for i in rng.permutation(n):
            a = z[i]
            d = A[i] @ onehot  # edges from i into each class
            # Remove i from its class, then score each destination.
            n_a[a] -= 1
            O[a, :] -= d
            O[:, a] -= d
            scores = np.empty(K)
            for b in range(K):
                n_a[b] += 1
                O[b, :] += d
                O[:, b] += d
                scores[b] = _qn_from_counts(n_a, O.astype(float), n)
                n_a[b] -= 1
                O[b, :] -= d
                O[:, b] -= d
            best = int(np.argmax(scores))
            if scores[best] <= scores[a]:
                best = a  # ties keep the current class
            n_a[best] += 1
            O[best, :] += d
            O[:, best] += d
            if best != a:
                z[i] = best
                onehot[i, a] = 0
                onehot[i, best] = 1
                moved = True
        if not moved:
            break
    return z, _qn_from_counts(n_a, O.astype(float), n)


def profile_label_search(
    graph: Graph, K: int, config: ProfileSearchConfig | None = None
) -> tuple[np.ndarray, float]:
    """Greedy coordinate maximization of Q_n over labelings.

    Each restart sweeps the nodes in seeded random order, moving every node
    to the class that maximizes Q_n (strict improvement only, so Q_n never
    decreases), until a sweep makes no move. Returns the best labeling over
    restarts and its Q_n. Empty classes are allowed during the search.
    """
    if graph.n < K:
        raise ValueError("profile search needs n >= K")
    config = config or ProfileSearchConfig()
    best_labels = None
    best_q = -np.inf
    for r in range(max(config.restarts, 1)):
        rng = derived_rng(config.seed, 53, r)
        if r == 0:
            init = spectral_labels(graph, K, rng)
        else:
            init = rng.integers(K, size=graph.n)
        labels, q = _greedy_sweeps(graph, K, init, rng, config.max_sweeps)
        if q > best_q:
            best_labels, best_q = labels, q
    return best_labels, best_q
