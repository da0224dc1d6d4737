"""Complete-data likelihood: log-likelihood, ratio, closed-form MLE,
gradient/curvature in logit coordinates, and plug-in asymptotic covariances.

Free coordinates for nu: the d = K(K+1)/2 entries (a, b) with a <= b in
row-major upper-triangle order. The symmetric pair (a, b)/(b, a) is a single
coordinate: perturbing it moves both matrix entries. Under this convention
the diagonal coordinates carry weight 1/2 relative to the ordered-pair
counts (the (a, a) term appears once, not twice, in the 1/2 sum-sum likelihood
block), and all derivatives below are exact partial derivatives, verifiable
by finite differences.

Sign convention: `hessian` returns the *curvature* (negative Hessian) of the
log-likelihood ratio, a positive-definite information-style matrix. Compare
against finite differences of -loglik_ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    EmptyBlockError,
    Graph,
    LogitParams,
    ModelParams,
    SufficientStats,
    from_logits,
    sufficient_stats,
)

__all__ = [
    "CgmFit",
    "AsymptoticCov",
    "nu_free_indices",
    "pack_nu",
    "unpack_nu",
    "complete_loglik",
    "loglik_ratio",
    "cgm_mle",
    "gradient",
    "hessian",
    "asymptotic_cov",
    "wilks_cgm",
    "wilks_df",
]

NEG_INF = float("-inf")


def nu_free_indices(K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row/col indices of the a <= b free nu coordinates, plus their weights.

    weight = 1 for off-diagonal pairs, 1/2 for diagonal entries (single
    appearance in the ordered-pair double sum).
    """
    rows, cols = np.triu_indices(K)
    w = np.where(rows == cols, 0.5, 1.0)
    return rows, cols, w


def pack_nu(nu: np.ndarray) -> np.ndarray:
    """Symmetric matrix -> free coordinate vector (a <= b, row-major)."""
    K = nu.shape[0]
    rows, cols, _ = nu_free_indices(K)
    return np.asarray(nu, dtype=float)[rows, cols]


def unpack_nu(vec: np.ndarray, K: int) -> np.ndarray:
    """Free coordinate vector -> symmetric matrix."""
    rows, cols, _ = nu_free_indices(K)
    nu = np.zeros((K, K))
    nu[rows, cols] = vec
    nu[cols, rows] = vec
    return nu


def _xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x * log(y) with 0 * log(0) = 0; positive mass on log(0) gives -inf."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    pos = x != 0
    with np.errstate(divide="ignore"):
        out[pos] = x[pos] * np.log(y[pos])
    return out


def complete_loglik(graph: Graph, labels: np.ndarray, params: ModelParams) -> float:
    """log f(z, A; theta) for the joint labels+graph model.

    Convention 0 * log 0 = 0, so boundary H entries are allowed when the
    data agree with them; impossible data return -inf rather than raising.
    """
    stats = sufficient_stats(graph, labels, params.K)
    return _loglik_from_stats(stats, params)


def _loglik_from_stats(stats: SufficientStats, params: ModelParams) -> float:
    H = params.H
    pi_term = float(_xlogy(stats.n_a, params.pi).sum())
    edge = _xlogy(stats.O_ab, H) + _xlogy(stats.n_ab - stats.O_ab, 1.0 - H)
    total = pi_term + 0.5 * float(edge.sum())
    return total if np.isfinite(total) else NEG_INF


def _log1p_exp(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def loglik_ratio(
    theta: LogitParams, theta0: LogitParams, stats: SufficientStats, n: int
) -> float:
    """Log likelihood ratio log f(theta) - log f(theta0) in exponential-family form.

    varpi block: sum_a (varpi - varpi0)(a) n_a - n log[(1 + sum e^varpi) /
    (1 + sum e^varpi0)]; nu block: (1/2) sum_{a,b} [(nu - nu0) O_ab -
    n_ab (softplus(nu) - softplus(nu0))].
    """
    if theta.K != theta0.K:
        raise ValueError("theta and theta0 must share K")
    K = theta.K
    dv = theta.varpi - theta0.varpi
    varpi_part = float(dv @ stats.n_a[: K - 1])
    if K > 1:
        lse = np.logaddexp.reduce(np.concatenate([[0.0], theta.varpi]))
        lse0 = np.logaddexp.reduce(np.concatenate([[0.0], theta0.varpi]))
        varpi_part -= n * (lse - lse0)
    dnu = theta.nu - theta0.nu
    soft = _log1p_exp(theta.nu) - _log1p_exp(theta0.nu)
    nu_part = 0.5 * float((dnu * stats.O_ab).sum() - (soft * stats.n_ab).sum())
    return varpi_part + nu_part


@dataclass(frozen=True)
class CgmFit:
    """Closed-form complete-data MLE: pi_hat = n_a/n, H_hat = O_ab/n_ab."""

    pi_hat: np.ndarray
    H_hat: np.ndarray
    loglik: float
    stats: SufficientStats
    empty_block: bool

    @property
    def K(self) -> int:
        return self.pi_hat.shape[0]

    def to_params(self) -> ModelParams:
        if self.empty_block:
            raise EmptyBlockError("fit has an empty block; parameters undefined")
        return ModelParams.from_pi_H(self.pi_hat, self.H_hat)

    def to_logits(self) -> LogitParams:
        from .model import to_logits

        return to_logits(self.to_params())


def cgm_mle(graph: Graph, labels: np.ndarray, K: int) -> CgmFit:
    """Maximum likelihood fit given observed labels.

    H_hat entries with n_ab = 0 are NaN and the empty_block flag is set;
    covariance operations reject such fits.
    """
    stats = sufficient_stats(graph, labels, K)
    n = graph.n
    pi_hat = stats.n_a / n
    with np.errstate(invalid="ignore", divide="ignore"):
        H_hat = np.where(stats.n_ab > 0, stats.O_ab / np.maximum(stats.n_ab, 1), np.nan)
    empty = bool(np.any(stats.n_a == 0))
    edge = _xlogy(stats.O_ab, H_hat) + _xlogy(stats.n_ab - stats.O_ab, 1.0 - H_hat)
    edge = np.where(stats.n_ab > 0, edge, 0.0)
    loglik = float(_xlogy(stats.n_a, np.where(stats.n_a > 0, pi_hat, 1.0)).sum())
    loglik += 0.5 * float(edge.sum())
    return CgmFit(
        pi_hat=pi_hat, H_hat=H_hat, loglik=loglik, stats=stats, empty_block=empty
    )


def gradient(theta: LogitParams, stats: SufficientStats, n: int) -> np.ndarray:
    """Gradient of the log-likelihood ratio at theta, over free coordinates.

    varpi block: n_a - n pi'(a) for a < K. nu block: w_ab (O_ab - n_ab H'(a,b))
    over a <= b, with the diagonal weight w_aa = 1/2 from the free-coordinate
    convention (matches central finite differences of `loglik_ratio`).
    """
    K = theta.K
    pi, H = from_logits(theta)
    g_varpi = stats.n_a[: K - 1] - n * pi[: K - 1]
    rows, cols, w = nu_free_indices(K)
    g_nu = w * (stats.O_ab[rows, cols] - stats.n_ab[rows, cols] * H[rows, cols])
    return np.concatenate([g_varpi, g_nu])


def hessian(theta: LogitParams, stats: SufficientStats, n: int) -> np.ndarray:
    """Curvature (negative Hessian) of the log-likelihood ratio at theta.

    Positive-definite information-style matrix, block diagonal across
    (varpi, nu): the varpi block is n (diag(pi') - pi' pi''), the nu block is
    diagonal with entries w_ab n_ab H'(1 - H'). All varpi-nu cross terms are
    structurally zero. Compare to finite differences of -loglik_ratio.
    """
    K = theta.K
    pi, H = from_logits(theta)
    d = K * (K + 1) // 2
    out = np.zeros((K - 1 + d, K - 1 + d))
    if K > 1:
        ptil = pi[: K - 1]
        out[: K - 1, : K - 1] = n * (np.diag(ptil) - np.outer(ptil, ptil))
    rows, cols, w = nu_free_indices(K)
    hval = H[rows, cols]
    out[K - 1 :, K - 1 :] = np.diag(w * stats.n_ab[rows, cols] * hval * (1.0 - hval))
    return out


@dataclass(frozen=True)
class AsymptoticCov:
    """Plug-in limits: sqrt(n)(varpi_hat - varpi) -> N(0, sigma1) and
    sqrt(n lambda)(nu_hat - nu) -> N(0, sigma2) over the free nu coordinates."""

    sigma1: np.ndarray
    sigma2: np.ndarray
    info1: np.ndarray
    info2: np.ndarray


def asymptotic_cov(params: ModelParams, n: int) -> AsymptoticCov:
    """Invert the expected per-unit information at interior params.

    info1 is the expected varpi curvature divided by n; info2 is the expected
    nu curvature divided by n^2 rho, using E[n_ab] = n(n-1) pi_a pi_b. Both
    are inverted numerically.
    """
    pi = params.pi
    H = params.H
    if np.any(H <= 0) or np.any(H >= 1):
        raise ValueError("asymptotic covariances require interior H")
    if np.any(pi <= 0):
        raise ValueError("asymptotic covariances require interior pi")
    K = params.K
    ptil = pi[: K - 1]
    info1 = np.diag(ptil) - np.outer(ptil, ptil)
    sigma1 = np.linalg.inv(info1) if K > 1 else np.zeros((0, 0))
    rows, cols, w = nu_free_indices(K)
    expected_pairs = n * (n - 1) * pi[rows] * pi[cols]
    hval = H[rows, cols]
    info2 = np.diag(w * expected_pairs * hval * (1.0 - hval)) / (n * n * params.rho)
    sigma2 = np.linalg.inv(info2)
    return AsymptoticCov(sigma1=sigma1, sigma2=sigma2, info1=info1, info2=info2)


def wilks_df(K: int) -> int:
    """Degrees of freedom K(K+3)/2 - 1 of the blockmodel Wilks statistic."""
    return K * (K + 3) // 2 - 1


def wilks_cgm(graph: Graph, labels: np.ndarray, theta0: ModelParams) -> float:
    """Likelihood ratio statistic 2 [log f(MLE) - log f(theta0)].

    Asymptotically chi-squared with K(K+3)/2 - 1 degrees of freedom for an
    interior null theta0.
    """
    fit = cgm_mle(graph, labels, theta0.K)
    if fit.empty_block:
        raise EmptyBlockError("Wilks statistic undefined with an empty block")
    ll0 = complete_loglik(graph, labels, theta0)
    return 2.0 * (fit.loglik - ll0)
