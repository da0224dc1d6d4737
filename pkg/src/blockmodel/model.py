"""Core model types and operations for the stochastic blockmodel.

Conventions used throughout the package:

- Class labels are 0-based integer arrays in memory. Label *files* are
  1-based (see `blockmodel.io`); conversion happens only at that boundary.
- Pair counts follow the ordered-pair convention: ``n_ab`` counts ordered
  pairs (i, j), i != j, so ``n_aa = n_a * (n_a - 1)`` and a within-block
  edge contributes 2 to ``O_aa``. This makes ``H_hat = O / n_ab`` exact
  with no diagonal special case.
- Randomness comes from counter-based Philox generators; sampling order is
  fixed (labels first, then edges in row-major i < j order), so results
  are reproducible per seed. Parallel replicates must use distinct derived
  seeds (see `derived_rng`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EnumerationBudgetError",
    "EmptyBlockError",
    "FitError",
    "ModelParams",
    "LogitParams",
    "Graph",
    "SufficientStats",
    "derived_rng",
    "sample_graph",
    "to_logits",
    "from_logits",
    "split_rho",
    "sufficient_stats",
    "align_labels",
    "align_params",
    "param_distance",
    "aligned_param_distance",
    "planted_partition_params",
]

MAX_ALIGN_K = 8  # K! exhaustive alignment guard

PI_SUM_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
H_RANGE_TOL = 1e-12


class EnumerationBudgetError(ValueError):
    """Raised when an exact enumeration would exceed the K**n budget."""


class EmptyBlockError(ValueError):
    """Raised when an operation requires every block to be occupied."""


class FitError(RuntimeError):
    """Raised when every restart of an iterative fit fails."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def derived_rng(seed: int | tuple, *path: int) -> np.random.Generator:
    """Counter-based generator for (seed, path) so parallel work never shares a stream.

    `seed` may be a tuple (root, k1, k2, ...) to derive from an already
    derived stream; extra path components append to the key.
    """
    if isinstance(seed, tuple):
        root, key = seed[0], tuple(seed[1:]) + tuple(path)
    else:
        root, key = seed, tuple(path)
    ss = np.random.SeedSequence(root, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ModelParams:
    """Generative blockmodel parameters (K, rho, pi, S) with H = rho * S.

    The normalization sum_{a,b} pi(a) pi(b) S(a,b) = 1 makes rho the expected
    edge probability and lambda = n * rho the expected degree.
    """

    K: int
    rho: float
    pi: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        K = int(self.K)
        if K < 1:
            raise ValueError(f"K must be >= 1, got {K}")
        pi = np.asarray(self.pi, dtype=float)
        S = np.asarray(self.S, dtype=float)
        if pi.shape != (K,):
            raise ValueError(f"pi must have shape ({K},), got {pi.shape}")
        if S.shape != (K, K):
            raise ValueError(f"S must have shape ({K},{K}), got {S.shape}")
        if not np.all(pi > 0):
            raise ValueError("all pi entries must be > 0")
        if abs(pi.sum() - 1.0) > PI_SUM_TOL:
            raise ValueError(f"pi must sum to 1 within {PI_SUM_TOL}, sum is {pi.sum()!r}")
        if not np.array_equal(S, S.T):
            raise ValueError("S must be exactly symmetric")
        if np.any(S < 0):
            raise ValueError("S entries must be nonnegative")
        rho = float(self.rho)
        if not (0.0 < rho <= 1.0):
            raise ValueError(f"rho must be in (0, 1], got {rho}")
        norm = float(pi @ S @ pi)
        if abs(norm - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"pi' S pi must equal 1 within {NORMALIZATION_TOL}, got {norm!r}"
            )
        H = rho * S
        if np.any(H < -H_RANGE_TOL) or np.any(H > 1.0 + H_RANGE_TOL):
            raise ValueError("entries of H = rho * S must lie in [0, 1]")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "pi", _readonly(pi))
        object.__setattr__(self, "S", _readonly(S))

    @property
    def H(self) -> np.ndarray:
        return self.rho * self.S

    def expected_degree(self, n: int) -> float:
        return n * self.rho

    @classmethod
    def from_pi_H(cls, pi: np.ndarray, H: np.ndarray) -> "ModelParams":
        rho, S = split_rho(pi, H)
        return cls(K=len(pi), rho=rho, pi=pi, S=S)

    def permuted(self, perm: np.ndarray) -> "ModelParams":
        """Relabel classes: new class perm[a] takes old class a's parameters."""
        inv = np.argsort(np.asarray(perm))
        return ModelParams(self.K, self.rho, self.pi[inv], self.S[np.ix_(inv, inv)])


@dataclass(frozen=True)
class LogitParams:
    """Logit coordinates (varpi, nu) of (pi, H).

    varpi(a) = log(pi(a) / pi(K)) for a < K; nu(a,b) = logit(H(a,b)). These
    make the complete-data likelihood an exponential family on
    R^(K-1) x R^(K(K+1)/2).
    """

    varpi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        varpi = np.asarray(self.varpi, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if varpi.ndim != 1:
            raise ValueError("varpi must be a vector")
        K = varpi.shape[0] + 1
        if nu.shape != (K, K):
            raise ValueError(f"nu must have shape ({K},{K}), got {nu.shape}")
        if not np.array_equal(nu, nu.T):
            raise ValueError("nu must be exactly symmetric")
        if not (np.all(np.isfinite(varpi)) and np.all(np.isfinite(nu))):
            raise ValueError("logit parameters must be finite")
        object.__setattr__(self, "varpi", _readonly(varpi))
        object.__setattr__(self, "nu", _readonly(nu))

    @property
    def K(self) -> int:
        return self.varpi.shape[0] + 1


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph as a dense symmetric 0/1 adjacency matrix."""

    n: int
    adjacency: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        A = np.asarray(self.adjacency)
        if A.shape != (n, n):
            raise ValueError(f"adjacency must have shape ({n},{n}), got {A.shape}")
        if not np.all((A == 0) | (A == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diagonal(A) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "adjacency", _readonly(A.astype(np.int8)))

    @property
    def edge_total(self) -> int:
        """L = sum_{i != j} A_ij (each undirected edge counted twice)."""
        return int(self.adjacency.sum())

    @property
    def average_degree(self) -> float:
        return self.edge_total / self.n

    @classmethod
    def from_edges(cls, n: int, edges: np.ndarray) -> "Graph":
        A = np.zeros((n, n), dtype=np.int8)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            i, j = edges[:, 0], edges[:, 1]
            if np.any(i < 0) or np.any(j >= n) or np.any(i >= j):
                raise ValueError("edges must satisfy 0 <= i < j < n")
            A[i, j] = 1
            A[j, i] = 1
        return cls(n=n, adjacency=A)

    def edge_list(self) -> np.ndarray:
        """Edges as (m, 2) array with i < j, row-major order."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return np.column_stack([i, j])


@dataclass(frozen=True)
class SufficientStats:
    """Block counts (n_a, n_ab, O_ab) in the ordered-pair convention."""

    n_a: np.ndarray
    n_ab: np.ndarray
    O_ab: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n_a", _readonly(np.asarray(self.n_a, dtype=np.int64)))
        object.__setattr__(self, "n_ab", _readonly(np.asarray(self.n_ab, dtype=np.int64)))
        object.__setattr__(self, "O_ab", _readonly(np.asarray(self.O_ab, dtype=np.int64)))

    @property
    def K(self) -> int:
        return self.n_a.shape[0]

    @property
    def n(self) -> int:
        return int(self.n_a.sum())


def split_rho(pi: np.ndarray, H: np.ndarray) -> tuple[float, np.ndarray]:
    """Split H into (rho, S) with rho = pi' H pi and S = H / rho.

    The normalization pi' S pi = 1 then holds by construction.
    """
    pi = np.asarray(pi, dtype=float)
    H = np.asarray(H, dtype=float)
    if np.any(H < 0):
        raise ValueError("H must be nonnegative")
    if not np.array_equal(H, H.T):
        raise ValueError("H must be symmetric")
    rho = float(pi @ H @ pi)
    if rho <= 0.0:
        raise ValueError("H must have at least one positive entry weighted by pi")
    return rho, H / rho


def to_logits(params: ModelParams) -> LogitParams:
    """Map (pi, H) to the canonical logit coordinates (varpi, nu)."""
    pi = params.pi
    H = params.H
    # K = 1 has pi = (1,) and an empty varpi block, which needs no logit.
    if params.K > 1 and (np.any(pi <= 0) or np.any(pi >= 1)):
        raise ValueError("to_logits requires all pi(a) in (0, 1)")
    if np.any(H <= 0) or np.any(H >= 1):
        raise ValueError("to_logits requires all H(a,b) in (0, 1)")
    varpi = np.log(pi[:-1] / pi[-1])
    nu = np.log(H / (1.0 - H))
    nu = (nu + nu.T) / 2.0  # enforce exact symmetry against rounding
    return LogitParams(varpi=varpi, nu=nu)


def from_logits(lp: LogitParams) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of `to_logits`: returns (pi, H)."""
    e = np.exp(lp.varpi)
    denom = 1.0 + e.sum()
    pi = np.concatenate([e, [1.0]]) / denom
    H = 1.0 / (1.0 + np.exp(-lp.nu))
    return pi, H


def sample_graph(
    params: ModelParams, n: int, seed: int | np.random.Generator
) -> tuple[np.ndarray, Graph]:
    """Draw (labels, graph) from the blockmodel.

    Labels are i.i.d. from pi; edges are independent Bernoulli(H[z_i, z_j])
    over i < j in row-major order. Deterministic given the seed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    H = params.H
    if np.any(H < 0) or np.any(H > 1):
        raise ValueError("H entries must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else derived_rng(seed)
    cum = np.cumsum(params.pi)
    z = np.searchsorted(cum, rng.random(n), side="right")
    z = np.minimum(z, params.K - 1).astype(np.int64)
    iu, ju = np.triu_indices(n, k=1)
    u = rng.random(iu.shape[0])
    hit = u < H[z[iu], z[ju]]
    A = np.zeros((n, n), dtype=np.int8)
    A[iu[hit], ju[hit]] = 1
    A[ju[hit], iu[hit]] = 1
    return z, Graph(n=n, adjacency=A)


def sufficient_stats(graph: Graph, labels: np.ndarray, K: int) -> SufficientStats:
    """Block counts for (graph, labels) in the ordered-pair convention."""
    z = np.asarray(labels, dtype=np.int64)
    if z.shape != (graph.n,):
        raise ValueError(f"labels must have length {graph.n}")
    if z.size and (z.min() < 0 or z.max() >= K):
        raise ValueError(f"labels must lie in [0, {K})")
    n_a = np.bincount(z, minlength=K).astype(np.int64)
    n_ab = np.outer(n_a, n_a) - np.diag(n_a)
    Z = np.zeros((graph.n, K), dtype=np.int64)
    Z[np.arange(graph.n), z] = 1
    O = Z.T @ graph.adjacency.astype(np.int64) @ Z
    return SufficientStats(n_a=n_a, n_ab=n_ab, O_ab=O)


def _iter_permutations(K: int):
    if K > MAX_ALIGN_K:
        raise ValueError(
            f"exhaustive K! alignment is capped at K <= {MAX_ALIGN_K}, got K = {K}"
        )
    for perm in itertools.permutations(range(K)):
        yield np.array(perm, dtype=np.int64)


def align_labels(
    candidate: np.ndarray, reference: np.ndarray, K: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Best relabeling of `candidate` against `reference` over all K! permutations.

    Returns (perm, aligned, hamming) where aligned = perm[candidate] and
    hamming = #{i : aligned_i != reference_i}. Ties pick the lexicographically
    smallest perm.
    """
    cand = np.asarray(candidate, dtype=np.int64)
    ref = np.asarray(reference, dtype=np.int64)
    if cand.shape != ref.shape:
        raise ValueError("candidate and reference must have equal length")
    best_perm = None
    best_ham = None
    for perm in _iter_permutations(K):
        ham = int(np.count_nonzero(perm[cand] != ref))
        if best_ham is None or ham < best_ham:
            best_perm, best_ham = perm, ham
    return best_perm, best_perm[cand], best_ham


def param_distance(a: ModelParams, b: ModelParams) -> float:
    """||H_a - H_b||_F + ||pi_a - pi_b||_2 without alignment."""
    return float(
        np.linalg.norm(a.H - b.H) + np.linalg.norm(a.pi - b.pi)
    )


def align_params(
    candidate: ModelParams, reference: ModelParams
) -> tuple[np.ndarray, ModelParams]:
    """Relabel `candidate`'s classes to best match `reference`.

    Minimizes ||Pi H Pi' - H_ref||_F + ||Pi pi - pi_ref||_2 over all K!
    permutations. The returned perm has the same semantics as `align_labels`:
    new class perm[a] takes old class a's parameters.
    """
    if candidate.K != reference.K:
        raise ValueError("candidate and reference must share K")
    best_perm = None
    best_dist = None
    for perm in _iter_permutations(candidate.K):
        dist = param_distance(candidate.permuted(perm), reference)
        if best_dist is None or dist < best_dist:
            best_perm, best_dist = perm, dist
    return best_perm, candidate.permuted(best_perm)


def aligned_param_distance(candidate: ModelParams, reference: ModelParams) -> float:
    """Distance between equivalence classes: align first, then measure."""
    _, aligned = align_params(candidate, reference)
    return param_distance(aligned, reference)


def planted_partition_params(
    K: int,
    rho: float,
    separation: float,
    pi: np.ndarray | None = None,
) -> ModelParams:
    """Equal-ratio planted partition: S has within/between ratio `separation`.

    S is filled with s_b off-diagonal and s_w = separation * s_b on the
    diagonal, scaled so that pi' S pi = 1.
    """
    if separation <= 0:
        raise ValueError("separation must be positive")
    pi = np.full(K, 1.0 / K) if pi is None else np.asarray(pi, dtype=float)
    S = np.ones((K, K)) + (separation - 1.0) * np.eye(K)
    S = S / float(pi @ S @ pi)
    return ModelParams(K=K, rho=rho, pi=pi, S=S)
