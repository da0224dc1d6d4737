"""Mean-field variational EM for the marginal graph model.

J(q, theta; A) is the evidence lower bound over product distributions q on
the labels. `e_step` is single-site coordinate ascent in q, `m_step` the
closed-form maximizer in (pi, H); alternating them never decreases J. For
any labeling z and any theta,

    f(z, A; theta) <= max_q exp J(q, theta; A) <= g(A; theta),

which `check_sandwich` verifies against the enumeration oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FitError, Graph, ModelParams, derived_rng
from .spectral import spectral_labels

__all__ = [
    "MeanFieldPosterior",
    "VarConfig",
    "VarFit",
    "elbo",
    "e_step",
    "m_step",
    "fit_variational",
    "optimize_q",
    "check_sandwich",
]

NEG_INF = float("-inf")
_Q_FLOOR = 1e-300
_LOG_CLAMP = 1e-12  # H clamp for log evaluation only, never stored


@dataclass(frozen=True)
class MeanFieldPosterior:
    """Product distribution over labels: q[i, a] = q_i(a), rows on the simplex."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2:
            raise ValueError("q must be an (n, K) matrix")
        if np.any(q < 0):
            raise ValueError("q entries must be nonnegative")
        if np.max(np.abs(q.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("q rows must sum to 1 within 1e-12")
        q = np.array(q)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def K(self) -> int:
        return self.q.shape[1]

    def hard_labels(self) -> np.ndarray:
        return self.q.argmax(axis=1).astype(np.int64)

    @classmethod
    def point_mass(cls, labels: np.ndarray, K: int) -> "MeanFieldPosterior":
        n = len(labels)
        q = np.zeros((n, K))
        q[np.arange(n), np.asarray(labels, dtype=np.int64)] = 1.0
        return cls(q=q)

    @classmethod
    def uniform(cls, n: int, K: int) -> "MeanFieldPosterior":
        return cls(q=np.full((n, K), 1.0 / K))

    @classmethod
    def soft_labels(
        cls, labels: np.ndarray, K: int, confidence: float = 0.9
    ) -> "MeanFieldPosterior":
        n = len(labels)
        q = np.full((n, K), (1.0 - confidence) / max(K - 1, 1))
        q[np.arange(n), np.asarray(labels, dtype=np.int64)] = (
            confidence if K > 1 else 1.0
        )
        return cls(q=q)


def _log_edge_tables(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log H, log(1-H)) with interior clamping; exact boundaries give -inf."""
    with np.errstate(divide="ignore"):
        w1 = np.where(H > 0, np.log(np.clip(H, _LOG_CLAMP, None)), NEG_INF)
        w0 = np.where(H < 1, np.log(np.clip(1.0 - H, _LOG_CLAMP, None)), NEG_INF)
    return w1, w0


def _coef_times_log(coef: np.ndarray, logw: np.ndarray) -> float:
    """sum coef * logw with 0 * (-inf) = 0; positive mass on -inf gives -inf."""
    coef = np.maximum(coef, 0.0)  # clip tiny negative round-off
    pos = coef > 0
    if np.any(pos & np.isneginf(logw)):
        return NEG_INF
    return float((coef[pos] * logw[pos]).sum())


def _edge_coefficients(q: np.ndarray, A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise mass on edges (C1) and non-edges (C0): sums over i != j."""
    C1 = q.T @ A @ q
    s = q.sum(axis=0)
    C0 = np.outer(s, s) - q.T @ q - C1
    C1 = (C1 + C1.T) / 2.0
    C0 = (C0 + C0.T) / 2.0
    return C1, C0


def elbo(q: MeanFieldPosterior, params: ModelParams, graph: Graph) -> float:
    """J(q, theta; A): entropy + prior term plus the pairwise edge term.

    Returns -inf when q puts positive mass on a boundary H entry that the
    data contradict.
    """
    qm = q.q
    log_pi = np.log(params.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(qm > 0, qm * (log_pi[None, :] - np.log(np.maximum(qm, _Q_FLOOR))), 0.0)
    total = float(ent.sum())
    w1, w0 = _log_edge_tables(params.H)
    C1, C0 = _edge_coefficients(qm, graph.adjacency.astype(float))
    e1 = _coef_times_log(C1, w1)
    e0 = _coef_times_log(C0, w0)
    if e1 == NEG_INF or e0 == NEG_INF:
        return NEG_INF
    return total + 0.5 * (e1 + e0)


def _masked_logit_dot(W: np.ndarray, m: np.ndarray) -> np.ndarray:
    """W @ m respecting 0 * (-inf) = 0; used only when W has -inf entries."""
    out = np.zeros(W.shape[0])
    for a in range(W.shape[0]):
        acc = 0.0
        for b in range(W.shape[1]):
            if m[b] > 0:
                acc += W[a, b] * m[b] if np.isfinite(W[a, b]) else NEG_INF
            # m[b] == 0 contributes nothing even at W = -inf
            if acc == NEG_INF:
                break
        out[a] = acc
    return out


def e_step(
    q: MeanFieldPosterior,
    params: ModelParams,
    graph: Graph,
    sweep_order: np.ndarray,
) -> MeanFieldPosterior:
    """One pass of single-site updates over `sweep_order`.

    Each update sets log q_i(a) proportional to log pi(a) +
    sum_{j != i} sum_b q_j(b) [A_ij log H(a,b) + (1 - A_ij) log(1 - H(a,b))],
    which can only increase J.
    """
    qm = np.array(q.q)
    A = graph.adjacency.astype(float)
    log_pi = np.log(params.pi)
    w1, w0 = _log_edge_tables(params.H)
    finite = bool(np.all(np.isfinite(w1)) and np.all(np.isfinite(w0)))
    Aq = A @ qm
    s = qm.sum(axis=0)
    for i in np.asarray(sweep_order, dtype=np.int64):
        m = Aq[i]
        t = s - m - qm[i]
        t = np.maximum(t, 0.0)
        if finite:
            logits = log_pi + w1 @ m + w0 @ t
        else:
            logits = log_pi + _masked_logit_dot(w1, m) + _masked_logit_dot(w0, t)
        top = np.max(logits)
        if not np.isfinite(top):
            continue  # every class impossible; leave the site untouched
        new_qi = np.exp(logits - top)
        new_qi /= new_qi.sum()
        delta = new_qi - qm[i]
        if np.abs(delta).max() > 1e-13:  # skip no-op updates once saturated
            s += delta
            Aq += A[:, i, None] * delta[None, :]
            qm[i] = new_qi
    return MeanFieldPosterior(q=qm)


def m_step(
    q: MeanFieldPosterior, graph: Graph, *, return_flags: bool = False
):
    """Closed-form maximizer of J in (pi, H) at fixed q.

    pi(a) is the mean of column a; H(a,b) is the edge mass over the pair mass.
    Pairs with zero denominator get H = 0 (flagged when return_flags is set).
    """
    qm = q.q
    pi = qm.mean(axis=0)
    C1, C0 = _edge_coefficients(qm, graph.adjacency.astype(float))
    denom = C1 + C0
    zero_denom = denom <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        H = np.where(zero_denom, 0.0, C1 / np.where(zero_denom, 1.0, denom))
    H = np.clip((H + H.T) / 2.0, 0.0, 1.0)
    params = ModelParams.from_pi_H(pi, H)
    if return_flags:
        return params, zero_denom
    return params


@dataclass(frozen=True)
class VarConfig:
    tol: float = 1e-8  # relative change of J
    max_iters: int = 500
    restarts: int = 3  # restart 0 is the init below; the rest Dirichlet(1)
    init: str = "spectral"  # or "random"
    seed: int | tuple = 0


@dataclass(frozen=True)
class VarFit:
    params: ModelParams
    q: MeanFieldPosterior
    elbo: float
    iterations: int
    converged: bool
    restarts_used: int
    best_restart: int
    history: tuple


def _init_q(
    graph: Graph, K: int, config: VarConfig, restart: int, rng: np.random.Generator
) -> MeanFieldPosterior:
    if restart == 0 and config.init == "spectral" and K < graph.n:
        return MeanFieldPosterior.soft_labels(spectral_labels(graph, K, rng), K)
    return MeanFieldPosterior(q=rng.dirichlet(np.ones(K), size=graph.n))


def _single_fit(
    graph: Graph,
    K: int,
    config: VarConfig,
    restart: int,
    best_so_far: float | None = None,
):
    rng = derived_rng(config.seed, 11, restart)
    q = _init_q(graph, K, config, restart, rng)
    params = m_step(q, graph)
    current = elbo(q, params, graph)
    history = [current]
    converged = False
    iterations = 0
    for it in range(config.max_iters):
        q = e_step(q, params, graph, rng.permutation(graph.n))
        params = m_step(q, graph)
        value = elbo(q, params, graph)
        history.append(value)
        iterations = it + 1
        if abs(value - current) < config.tol * max(abs(value), 1.0):
            current = value
            converged = True
            break
        current = value
        # Abandon a restart crawling on a plateau it cannot leave in time:
        # increments must be shrinking (no saddle escape under way) and too
        # small to close the gap to the incumbent within the iteration budget.
        if best_so_far is not None and it >= 20:
            inc = history[-1] - history[-2]
            escaping = inc > 1.05 * (history[-10] - history[-11])
            remaining = config.max_iters - it
            if not escaping and value + 10.0 * max(inc, 0.0) * remaining < best_so_far:
                break
    return params, q, current, iterations, converged, history


def fit_variational(graph: Graph, K: int, config: VarConfig | None = None) -> VarFit:
    """Multi-restart coordinate-ascent maximization of J over (q, theta).

    Deterministic given config.seed. Raises FitError when every restart
    collapses a block to zero mass.
    """
    if graph.n < K:
        raise ValueError("fit needs n >= K")
    config = config or VarConfig()
    best = None
    failures = []
    for r in range(max(config.restarts, 1)):
        try:
            params, q, value, iterations, converged, history = _single_fit(
                graph, K, config, r, best_so_far=None if best is None else best[2]
            )
        except ValueError as exc:  # degenerate m_step (empty block / zero H)
            failures.append(f"restart {r}: {exc}")
            continue
        if best is None or value > best[2]:
            best = (params, q, value, iterations, converged, history, r)
    if best is None:
        raise FitError(
            "all restarts hit empty-block degeneracy: " + "; ".join(failures)
        )
    params, q, value, iterations, converged, history, r = best
    return VarFit(
        params=params, q=q, elbo=value, iterations=iterations,
        converged=converged, restarts_used=max(config.restarts, 1),
        best_restart=r, history=tuple(history),
    )


def optimize_q(
    graph: Graph,
    params: ModelParams,
    config: VarConfig | None = None,
    q0: MeanFieldPosterior | None = None,
) -> tuple[MeanFieldPosterior, float]:
    """Maximize J over q at fixed theta by e-step sweeps.

    With q0 given, ascends from there alone; otherwise tries the same
    initialization ensemble as `fit_variational` and keeps the best J.
    """
    config = config or VarConfig()
    starts = []
    if q0 is not None:
        starts.append((0, q0))
    else:
        for r in range(max(config.restarts, 1)):
            rng = derived_rng(config.seed, 23, r)
            starts.append((r, _init_q(graph, params.K, config, r, rng)))
    best_q, best_val = None, -np.inf
    for r, q in starts:
        rng = derived_rng(config.seed, 29, r)
        current = elbo(q, params, graph)
        for _ in range(config.max_iters):
            q = e_step(q, params, graph, rng.permutation(graph.n))
            value = elbo(q, params, graph)
            if abs(value - current) < config.tol * max(abs(value), 1.0):
                current = value
                break
            current = value
        if best_q is None or current > best_val:
            best_q, best_val = q, current
    return best_q, best_val


def check_sandwich(
    labels: np.ndarray, params: ModelParams, graph: Graph
) -> tuple[float, float, float, bool]:
    """Verify f(z,A;theta) <= max_q exp J <= g(A;theta) in log scale.

    The middle term starts its q ascent at the point mass on `labels`, so the
    lower inequality also exercises EM monotonicity. The upper term uses the
    enumeration oracle and inherits its budget guard.
    """
    from .cgm import complete_loglik
    from .exact import marginal_loglik

    lower = complete_loglik(graph, labels, params)
    q0 = MeanFieldPosterior.point_mass(labels, params.K)
    _, mid = optimize_q(
        graph, params, VarConfig(tol=1e-12, max_iters=200, seed=0), q0=q0
    )
    upper = marginal_loglik(graph, params)
    ok = lower <= mid + 1e-9 and mid <= upper + 1e-9
    return lower, mid, upper, ok
