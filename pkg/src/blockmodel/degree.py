"""Degree-corrected submodel with U x V classes.

Each node carries a pair (u, v): u in [U] with probabilities alpha, v in [V]
with probabilities beta. Edge probabilities factor as
H((u,v), (u',v')) = gamma_v gamma_{v'} G(u,u'), so the v-coordinate scales
degrees without block-dependent parameters. The mapped blockmodel has
K = U*V classes indexed row-major: (u, v) -> u*V + v.

The (gamma, G) scale redundancy (gamma -> c gamma, G -> G/c^2 leaves the map
unchanged) is resolved by normalizing max(gamma) = 1; v-classes are ordered
by gamma descending with ties broken by beta descending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FitError, Graph, ModelParams, derived_rng
from .varem import (
    MeanFieldPosterior,
    VarConfig,
    _edge_coefficients,
    _init_q,
    e_step,
    elbo,
    m_step,
)

__all__ = [
    "DcParams",
    "DcFitConfig",
    "DcFit",
    "dc_param_count",
    "dc_to_blockmodel",
    "canonicalize_dc",
    "fit_submodel",
]


@dataclass(frozen=True)
class DcParams:
    U: int
    V: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        U, V = int(self.U), int(self.V)
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        G = np.asarray(self.G, dtype=float)
        if alpha.shape != (U,) or np.any(alpha <= 0) or abs(alpha.sum() - 1) > 1e-10:
            raise ValueError("alpha must be a positive U-simplex vector")
        if beta.shape != (V,) or np.any(beta <= 0) or abs(beta.sum() - 1) > 1e-10:
            raise ValueError("beta must be a positive V-simplex vector")
        if gamma.shape != (V,) or np.any(gamma < 0) or np.any(gamma > 1):
            raise ValueError("gamma entries must lie in [0, 1]")
        if G.shape != (U, U) or not np.allclose(G, G.T, atol=0, rtol=0):
            raise ValueError("G must be a symmetric U x U matrix")
        if np.any(G < 0) or np.any(G > 1):
            raise ValueError("G entries must lie in [0, 1]")
        for name, arr in [("alpha", alpha), ("beta", beta), ("gamma", gamma), ("G", G)]:
            a = np.array(arr)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def n_free_parameters(self) -> int:
        return dc_param_count(self.U, self.V)


def dc_param_count(U: int, V: int) -> int:
    """U(U+1)/2 + (U-1) + (2V-1) free parameters."""
    if U < 1 or V < 1:
        raise ValueError("U and V must be >= 1")
    return U * (U + 1) // 2 + (U - 1) + (2 * V - 1)


def dc_to_blockmodel(dc: DcParams) -> ModelParams:
    """Map to the unrestricted blockmodel with K = U*V classes.

    pi[(u,v)] = alpha_u beta_v and H[(u,v),(u',v')] = gamma_v gamma_v' G(u,u'),
    flattened row-major in (u, v).
    """
    pi = np.kron(dc.alpha, dc.beta)
    H = np.kron(dc.G, np.outer(dc.gamma, dc.gamma))
    return ModelParams.from_pi_H(pi, H)


def _canonicalize_with_order(dc: DcParams) -> tuple[DcParams, np.ndarray]:
    gmax = float(dc.gamma.max())
    if gmax <= 0:
        raise ValueError("gamma must have a positive entry")
    gamma = dc.gamma / gmax
    G = np.clip(dc.G * gmax * gmax, 0.0, 1.0)
    order = np.lexsort((-dc.beta, -gamma))
    out = DcParams(
        U=dc.U, V=dc.V, alpha=dc.alpha,
        beta=dc.beta[order], gamma=gamma[order], G=G,
    )
    return out, order


def canonicalize_dc(dc: DcParams) -> DcParams:
    """Fix the scale (max gamma = 1) and order v-classes by (gamma, beta) descending.

    The scale move (gamma -> c gamma, G -> G / c^2) leaves the mapped
    blockmodel unchanged; the reorder permutes its classes.
    """
    out, _ = _canonicalize_with_order(dc)
    return out


@dataclass(frozen=True)
class DcFitConfig:
    tol: float = 1e-8
    max_iters: int = 200
    restarts: int = 3
    init: str = "spectral"
    seed: int | tuple = 0
    m_step_rounds: int = 20
    max_backtracks: int = 30
    fix_alpha: np.ndarray | None = None  # known alpha variant
    free_block_probs: bool = False  # free (u,v) probabilities variant


@dataclass(frozen=True)
class DcFit:
    dc: DcParams
    params: ModelParams  # mapped blockmodel parameters
    q: MeanFieldPosterior
    elbo: float
    iterations: int
    converged: bool
    stalled: bool
    restarts_used: int
    best_restart: int
    history: tuple


def _project_simplex(v: np.ndarray, floor: float = 1e-9) -> np.ndarray:
    """Euclidean projection onto the simplex, floored away from the boundary."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    w = np.maximum(v - theta, floor)
    return w / w.sum()


class _DcSpace:
    """Flattened free-parameter vector <-> DcParams, honoring config variants."""

    def __init__(self, U: int, V: int, config: DcFitConfig):
        self.U, self.V = U, V
        self.config = config
        self.tri = np.triu_indices(U)
        self.free_pi = config.free_block_probs
        self.edge_offset = U * V if self.free_pi else U + V

    def pack(self, dc: DcParams, block_probs: np.ndarray | None = None) -> np.ndarray:
        parts = []
        if self.free_pi:
            parts.append(
                block_probs if block_probs is not None else np.kron(dc.alpha, dc.beta)
            )
        else:
            parts.append(dc.alpha)
            parts.append(dc.beta)
        parts.append(dc.gamma)
        parts.append(dc.G[self.tri])
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return the mapped (pi, H) for the vector x."""
        U, V = self.U, self.V
        pos = 0
        if self.free_pi:
            pi = x[pos : pos + U * V]
            pos += U * V
        else:
            alpha = x[pos : pos + U]
            pos += U
            beta = x[pos : pos + V]
            pos += V
            pi = np.kron(alpha, beta)
        gamma = x[pos : pos + V]
        pos += V
        G = np.zeros((U, U))
        G[self.tri] = x[pos:]
        G[(self.tri[1], self.tri[0])] = x[pos:]
        H = np.kron(G, np.outer(gamma, gamma))
        return pi, H

    def project(self, x: np.ndarray) -> np.ndarray:
        U, V = self.U, self.V
        x = np.array(x)
        pos = 0
        if self.free_pi:
            x[pos : pos + U * V] = _project_simplex(x[pos : pos + U * V])
            pos += U * V
        else:
            if self.config.fix_alpha is not None:
                x[pos : pos + U] = self.config.fix_alpha
            else:
                x[pos : pos + U] = _project_simplex(x[pos : pos + U])
            pos += U
            x[pos : pos + V] = _project_simplex(x[pos : pos + V])
            pos += V
        x[pos : pos + V] = np.clip(x[pos : pos + V], 1e-6, 1.0)
        pos += V
        x[pos:] = np.clip(x[pos:], 1e-9, 1.0)
        return x

    def to_dc(self, x: np.ndarray) -> tuple[DcParams, np.ndarray | None]:
        U, V = self.U, self.V
        pos = 0
        block_probs = None
        if self.free_pi:
            block_probs = x[pos : pos + U * V]
            P = block_probs.reshape(U, V)
            alpha = P.sum(axis=1)
            beta = P.sum(axis=0)
            beta = beta / beta.sum()
            pos += U * V
        else:
            alpha = x[pos : pos + U]
            pos += U
            beta = x[pos : pos + V]
            pos += V
        gamma = x[pos : pos + V]
        pos += V
        G = np.zeros((U, U))
        G[self.tri] = x[pos:]
        G[(self.tri[1], self.tri[0])] = x[pos:]
        dc = DcParams(U=U, V=V, alpha=alpha, beta=beta, gamma=gamma, G=np.clip(G, 0, 1))
        return dc, block_probs


def _theta_objective(x, space, n_q, C1, C0):
    """The theta-dependent part of J at fixed q: prior term + edge term."""
    pi, H = space.unpack(x)
    if np.any(pi <= 0):
        return -np.inf
    logpi = np.log(pi)
    val = float(n_q @ logpi)
    Hc = np.clip(H, 1e-12, 1.0 - 1e-12)
    val += 0.5 * float((C1 * np.log(Hc)).sum() + (C0 * np.log1p(-Hc)).sum())
    return val


def _pi_closed_form(x, space, n_q):
    """Exact maximizer of the prior term: alpha and beta (or the free block
    probabilities) are the appropriate marginals of the q column masses."""
    U, V = space.U, space.V
    x = np.array(x)
    P = np.maximum(n_q, 1e-12).reshape(U, V)
    if space.free_pi:
        x[: U * V] = (P / P.sum()).ravel()
        return x
    if space.config.fix_alpha is None:
        alpha = P.sum(axis=1)
        x[:U] = alpha / alpha.sum()
    beta = P.sum(axis=0)
    x[U : U + V] = beta / beta.sum()
    return x


def _m_step_dc(x, space, q, graph, config):
    """Constrained M-step: closed-form class probabilities, then
    projected-gradient ascent with backtracking on (gamma, G)."""
    qm = q.q
    n_q = qm.sum(axis=0)
    C1, C0 = _edge_coefficients(qm, graph.adjacency.astype(float))
    C1 = np.maximum(C1, 0.0)
    C0 = np.maximum(C0, 0.0)
    x = _pi_closed_form(x, space, n_q)
    current = _theta_objective(x, space, n_q, C1, C0)
    stalled = False
    h = 1e-6
    edge_slice = slice(space.edge_offset, len(x))
    for _ in range(config.m_step_rounds):
        grad = np.zeros_like(x)
        for j in range(edge_slice.start, len(x)):
            step = h * max(1.0, abs(x[j]))
            xp, xm = np.array(x), np.array(x)
            xp[j] += step
            xm[j] -= step
            grad[j] = (
                _theta_objective(space.project(xp), space, n_q, C1, C0)
                - _theta_objective(space.project(xm), space, n_q, C1, C0)
            ) / (2 * step)
        scale = np.linalg.norm(grad)
        if not np.isfinite(scale) or scale == 0:
            break
        eta = 0.25 / scale
        improved = False
        for _ in range(config.max_backtracks):
            cand = space.project(x + eta * grad)
            value = _theta_objective(cand, space, n_q, C1, C0)
            if value > current + 1e-14:
                x, current, improved = cand, value, True
                break
            eta *= 0.5
        if not improved:
            stalled = True
            break
        if eta * scale < 1e-12:
            break
    return x, current, stalled


def _warm_start_dc(
    q: MeanFieldPosterior, graph: Graph, U: int, V: int, rng: np.random.Generator
) -> DcParams:
    """Project the unrestricted M-step estimate onto the DC structure.

    gamma is read off the per-v-slice average edge intensity of the
    unrestricted H, G from the gamma-deflated block averages; alpha/beta from
    the pi marginals. Jitter breaks exact ties between v-slices.
    """
    params = m_step(q, graph)
    P = np.maximum(params.pi.reshape(U, V), 1e-9)
    alpha = P.sum(axis=1)
    beta = P.sum(axis=0)
    H = params.H.reshape(U, V, U, V)
    # mean over (u, u', v') of H((u,v),(u',v')) is proportional to gamma_v
    slice_mean = np.array([max(H[:, v, :, :].mean(), 1e-9) for v in range(V)])
    gamma_raw = slice_mean / slice_mean.max()
    gamma = np.clip(gamma_raw * (1.0 + 0.01 * rng.random(V)), 1e-3, 1.0)
    G = np.zeros((U, U))
    for u in range(U):
        for u2 in range(U):
            vals = H[u, :, u2, :] / np.outer(gamma, gamma)
            G[u, u2] = np.clip(vals.mean(), 1e-6, 1.0)
    G = (G + G.T) / 2.0
    return DcParams(
        U=U, V=V, alpha=alpha / alpha.sum(), beta=beta / beta.sum(),
        gamma=gamma, G=G,
    )


def fit_submodel(
    graph: Graph, U: int, V: int, config: DcFitConfig | None = None
) -> DcFit:
    """Variational fit constrained to the degree-corrected parameter space.

    Alternates the unrestricted single-site q updates with a constrained
    M-step: projected gradient ascent with backtracking on (alpha, beta,
    gamma, G) through the blockmodel mapping. J never decreases on accepted
    steps. Multi-restart; deterministic given config.seed.
    """
    config = config or DcFitConfig()
    K = U * V
    if graph.n < K:
        raise ValueError("fit needs n >= U*V")
    space = _DcSpace(U, V, config)
    var_cfg = VarConfig(init=config.init, seed=config.seed)
    best = None
    failures = []
    for r in range(max(config.restarts, 1)):
        rng = derived_rng(config.seed, 37, r)
        q = _init_q(graph, K, var_cfg, r, rng)
        try:
            x = space.pack(_warm_start_dc(q, graph, U, V, rng))
            # M-step first so the initial parameters reflect q, not noise.
            x, _, stalled = _m_step_dc(x, space, q, graph, config)
            pi, H = space.unpack(x)
            params = ModelParams.from_pi_H(pi, H)
        except ValueError as exc:
            failures.append(f"restart {r}: {exc}")
            continue
        current = elbo(q, params, graph)
        history = [current]
        converged = False
        iterations = 0
        try:
            for it in range(config.max_iters):
                q = e_step(q, params, graph, rng.permutation(graph.n))
                x, _, stalled = _m_step_dc(x, space, q, graph, config)
                pi, H = space.unpack(x)
                params = ModelParams.from_pi_H(pi, H)
                value = elbo(q, params, graph)
                history.append(value)
                iterations = it + 1
                if abs(value - current) < config.tol * max(abs(value), 1.0):
                    current = value
                    converged = True
                    break
                current = value
        except ValueError as exc:
            failures.append(f"restart {r}: {exc}")
            continue
        if best is None or current > best[2]:
            dc, _ = space.to_dc(x)
            best = (dc, q, current, iterations, converged, stalled, history, r)
    if best is None:
        raise FitError("all restarts failed: " + "; ".join(failures))
    dc, q, value, iterations, converged, stalled, history, r = best
    dc, v_order = _canonicalize_with_order(dc)
    # Reordering v-classes permutes the mapped classes; keep q consistent.
    col_perm = np.concatenate(
        [u * V + np.asarray(v_order) for u in range(U)]
    )
    q = MeanFieldPosterior(q=q.q[:, col_perm])
    return DcFit(
        dc=dc,
        params=dc_to_blockmodel(dc),
        q=q,
        elbo=value,
        iterations=iterations,
        converged=converged,
        stalled=stalled,
        restarts_used=max(config.restarts, 1),
        best_restart=r,
        history=tuple(history),
    )
