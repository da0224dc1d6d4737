"""Downstream inference: Wilks statistics, confidence regions, parametric
bootstrap, the local-quadratic (LAN) expansion check, and the Monte Carlo
normality harness.

Scalings follow the two-rate structure of the model: class-proportion logits
varpi have sqrt(n) errors with covariance sigma1, edge logits nu have
sqrt(n * lambda) errors with covariance sigma2, where lambda_hat is the
observed average degree. The quadratic form in `lan_check` uses the
curvature (information) matrices, i.e. the inverses of (sigma1, sigma2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats

from ._concurrency import run_indexed

from .cgm import (
    CgmFit,
    asymptotic_cov,
    cgm_mle,
    complete_loglik,
    gradient,
    pack_nu,
    wilks_df,
)
from .exact import ExactEmConfig, exact_gm_mle, marginal_loglik
from .model import (
    FitError,
    Graph,
    ModelParams,
    align_params,
    derived_rng,
    sample_graph,
    sufficient_stats,
    to_logits,
)
from .modularity import ProfileSearchConfig, profile_label_search
from .varem import VarConfig, VarFit, fit_variational, optimize_q

__all__ = [
    "BootstrapResult",
    "ConfidenceRegion",
    "LanReport",
    "MonteCarloReport",
    "sym_inv_sqrt",
    "wilks_variational",
    "wilks_gm_exact",
    "confidence_region",
    "parametric_bootstrap",
    "lan_check",
    "monte_carlo_normality",
    "ESTIMATORS",
]

ESTIMATORS = ("cgm", "variational", "profile-then-cgm")

_EIG_FLOOR = 1e-12


def sym_inv_sqrt(M: np.ndarray, floor: float = _EIG_FLOOR) -> np.ndarray:
    """Symmetric inverse square root via eigendecomposition with an eigenvalue floor."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return M.reshape(0, 0)
    vals, vecs = np.linalg.eigh((M + M.T) / 2.0)
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T


def wilks_variational(
    graph: Graph,
    K: int,
    theta0: ModelParams,
    config: VarConfig | None = None,
) -> float:
    """2 [max_{q,theta} J - max_q J(q, theta0)], the variational Wilks statistic.

    Asymptotically chi-squared with K(K+3)/2 - 1 degrees of freedom under
    theta0, matching the complete-data statistic.
    """
    config = config or VarConfig()
    fit = fit_variational(graph, K, config)
    _, j0 = optimize_q(graph, theta0, config)
    return 2.0 * (fit.elbo - j0)


def wilks_gm_exact(
    graph: Graph,
    K: int,
    theta0: ModelParams,
    config: ExactEmConfig | None = None,
) -> float:
    """2 log g(A; theta_hat^ML) / g(A; theta0) by exact enumeration."""
    fit = exact_gm_mle(graph, K, config)
    return 2.0 * (fit.loglik - marginal_loglik(graph, theta0))


@dataclass(frozen=True)
class ConfidenceRegion:
    """Per-coordinate intervals plus whitened-ellipsoid specs at one level."""

    level: float
    lambda_hat: float
    n: int
    varpi_center: np.ndarray
    nu_center: np.ndarray  # free coordinates, a <= b row-major
    varpi_intervals: np.ndarray  # (K-1, 2)
    nu_intervals: np.ndarray  # (d, 2)
    whiten_varpi: np.ndarray  # sigma1^(-1/2)
    whiten_nu: np.ndarray  # sigma2^(-1/2)
    radius2_varpi: float  # chi2 quantile for the varpi ellipsoid
    radius2_nu: float

    def covers_varpi(self, varpi: np.ndarray) -> np.ndarray:
        """Per-coordinate interval coverage indicators."""
        return (self.varpi_intervals[:, 0] <= varpi) & (
            varpi <= self.varpi_intervals[:, 1]
        )

    def covers_nu(self, nu_free: np.ndarray) -> np.ndarray:
        return (self.nu_intervals[:, 0] <= nu_free) & (
            nu_free <= self.nu_intervals[:, 1]
        )


def confidence_region(
    fit: VarFit | CgmFit, level: float, graph: Graph
) -> ConfidenceRegion:
    """Plug-in confidence region at the fitted parameters.

    Uses sigma1/sigma2 evaluated at the estimate, the observed average degree
    as lambda_hat, and normal quantiles per coordinate; the ellipsoid spec is
    the whitening matrix plus the chi-squared radius.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must be in (0, 1)")
    params = fit.params if isinstance(fit, VarFit) else fit.to_params()
    lp = to_logits(params)
    cov = asymptotic_cov(params, graph.n)
    lam = graph.average_degree
    if lam <= 0:
        raise ValueError("graph has no edges; lambda_hat = 0")
    z = scipy.stats.norm.ppf(0.5 * (1.0 + level))
    K = params.K
    varpi_se = (
        np.sqrt(np.diag(cov.sigma1) / graph.n) if K > 1 else np.zeros(0)
    )
    nu_center = pack_nu(lp.nu)
    nu_se = np.sqrt(np.diag(cov.sigma2) / (graph.n * lam))
    varpi_iv = np.column_stack([lp.varpi - z * varpi_se, lp.varpi + z * varpi_se])
    nu_iv = np.column_stack([nu_center - z * nu_se, nu_center + z * nu_se])
    d1 = max(K - 1, 1)
    d2 = nu_center.shape[0]
    return ConfidenceRegion(
        level=level,
        lambda_hat=lam,
        n=graph.n,
        varpi_center=lp.varpi,
        nu_center=nu_center,
        varpi_intervals=varpi_iv,
        nu_intervals=nu_iv,
        whiten_varpi=sym_inv_sqrt(cov.sigma1),
        whiten_nu=sym_inv_sqrt(cov.sigma2),
        radius2_varpi=float(scipy.stats.chi2.ppf(level, d1)),
        radius2_nu=float(scipy.stats.chi2.ppf(level, d2)),
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Refit-on-simulated-graphs output, aligned to the fitting estimate."""

    B: int
    estimates: tuple  # aligned ModelParams per successful replicate
    varpi_star: np.ndarray  # sqrt(n) (varpi* - varpi_hat), (B_ok, K-1)
    nu_star: np.ndarray  # sqrt(n lambda_hat) (nu* - nu_hat), (B_ok, d)
    cov_varpi: np.ndarray
    cov_nu: np.ndarray
    lambda_hat: float
    failures: int
    failed_indices: tuple


def parametric_bootstrap(
    graph: Graph,
    K: int,
    B: int,
    config: VarConfig | None = None,
    threads: int = 1,
) -> BootstrapResult:
    """Fit, simulate B graphs at the fit, refit each, and form covariances.

    Each replicate is aligned to the fitting estimate before differencing
    (class labels are only identified up to permutation). Failed replicate
    fits are excluded and counted; more than 10% failures raises FitError.
    Deterministic given config.seed.
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    config = config or VarConfig()
    master = config.seed
    fit = fit_variational(graph, K, _with_seed(config, _key(master, 1)))
    theta_hat = fit.params
    lp_hat = to_logits(theta_hat)
    nu_hat = pack_nu(lp_hat.nu)
    lam = graph.average_degree
    n = graph.n

    def one(b: int):
        try:
            _, g_star = sample_graph(theta_hat, n, derived_rng(master, 2, b))
            refit = fit_variational(g_star, K, _with_seed(config, _key(master, 3, b)))
            _, aligned = align_params(refit.params, theta_hat)
            lp = to_logits(aligned)
            return (
                aligned,
                np.sqrt(n) * (lp.varpi - lp_hat.varpi),
                np.sqrt(n * lam) * (pack_nu(lp.nu) - nu_hat),
            )
        except (ValueError, FitError):
            return None

    results = run_indexed(one, B, threads)
    failed = tuple(b for b, r in enumerate(results) if r is None)
    ok = [r for r in results if r is not None]
    if len(failed) > 0.1 * B:
        raise FitError(
            f"{len(failed)}/{B} bootstrap replicates failed (threshold 10%): "
            f"indices {failed[:10]}"
        )
    varpi_star = np.array([r[1] for r in ok]).reshape(len(ok), K - 1)
    nu_star = np.array([r[2] for r in ok])
    cov_varpi = (
        np.cov(varpi_star, rowvar=False).reshape(K - 1, K - 1)
        if K > 1
        else np.zeros((0, 0))
    )
    cov_nu = np.atleast_2d(np.cov(nu_star, rowvar=False))
    return BootstrapResult(
        B=B,
        estimates=tuple(r[0] for r in ok),
        varpi_star=varpi_star,
        nu_star=nu_star,
        cov_varpi=cov_varpi,
        cov_nu=cov_nu,
        lambda_hat=lam,
        failures=len(failed),
        failed_indices=failed,
    )


def _key(master, *path):
    if isinstance(master, tuple):
        return master + path
    return (master,) + path


def _with_seed(config: VarConfig, seed) -> VarConfig:
    return VarConfig(
        tol=config.tol,
        max_iters=config.max_iters,
        restarts=config.restarts,
        init=config.init,
        seed=seed,
    )


@dataclass(frozen=True)
class LanReport:
    """Remainders of the local quadratic expansion of the log-likelihood ratio."""

    n: int
    s: np.ndarray
    t: np.ndarray
    remainders: np.ndarray
    ratio_values: np.ndarray

    @property
    def median_abs_remainder(self) -> float:
        return float(np.median(np.abs(self.remainders)))


def lan_check(
    theta0: ModelParams,
    n: int,
    s: np.ndarray,
    t: np.ndarray,
    reps: int,
    seed: int | tuple = 0,
    threads: int = 1,
) -> LanReport:
    """Compare the log-likelihood ratio at a local perturbation to its
    quadratic approximation.

    Per replicate the ratio at (varpi0 + s/sqrt(n), nu0 + t/sqrt(n^2 rho)) is
    compared with s'Y1 + t'Y2 - s'I1 s/2 - t'I2 t/2, where (Y1, Y2) are the
    scaled scores at theta0 and (I1, I2) the curvature matrices (the inverses
    of sigma1/sigma2). s = t = 0 gives a remainder of exactly zero.
    """
    from .cgm import loglik_ratio, unpack_nu
    from .model import LogitParams

    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    K = theta0.K
    lp0 = to_logits(theta0)
    d = K * (K + 1) // 2
    if s.shape != (K - 1,) or t.shape != (d,):
        raise ValueError(f"s must have shape ({K - 1},) and t ({d},)")
    scale_nu = np.sqrt(n * n * theta0.rho)
    lp_pert = LogitParams(
        varpi=lp0.varpi + s / np.sqrt(n),
        nu=lp0.nu + unpack_nu(t, K) / scale_nu,
    )
    cov = asymptotic_cov(theta0, n)
    quad_const = 0.0
    if K > 1:
        quad_const += 0.5 * float(s @ cov.info1 @ s)
    quad_const += 0.5 * float(t @ cov.info2 @ t)

    def one(r: int):
        z, g = sample_graph(theta0, n, derived_rng(seed, 5, r))
        stats = sufficient_stats(g, z, K)
        lam_value = loglik_ratio(lp_pert, lp0, stats, n)
        score = gradient(lp0, stats, n)
        y1 = score[: K - 1] / np.sqrt(n)
        y2 = score[K - 1 :] / scale_nu
        quad = float(s @ y1) + float(t @ y2) - quad_const
        return lam_value, lam_value - quad

    results = run_indexed(one, reps, threads)
    values = np.array([r[0] for r in results])
    remainders = np.array([r[1] for r in results])
    return LanReport(n=n, s=s, t=t, remainders=remainders, ratio_values=values)


@dataclass(frozen=True)
class MonteCarloReport:
    """Standardized estimation errors and Wilks samples across replicates."""

    estimator: str
    n: int
    reps: int
    failures: int
    std_varpi: np.ndarray  # whitened sqrt(n) errors, (R, K-1)
    std_nu: np.ndarray  # whitened sqrt(n lambda_hat) errors, (R, d)
    lambda_hats: np.ndarray
    wilks: np.ndarray
    coverage_varpi: np.ndarray
    coverage_nu: np.ndarray
    ks_varpi: np.ndarray
    ks_nu: np.ndarray
    wilks_ks: float
    wilks_dof: int

    def all_errors_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.std_varpi)) and np.all(np.isfinite(self.std_nu))
        )


_Z95 = float(scipy.stats.norm.ppf(0.975))


def monte_carlo_normality(
    theta0: ModelParams,
    n: int,
    reps: int,
    estimator: str = "cgm",
    seed: int | tuple = 0,
    var_config: VarConfig | None = None,
    compute_wilks: bool = True,
    threads: int = 1,
) -> MonteCarloReport:
    """Sample/fit/standardize loop instantiating the normality limits.

    Per replicate: sample from theta0, fit with the chosen estimator, align
    the estimate to theta0, and whiten the scaled errors with the analytic
    sigma1/sigma2 at theta0 (lambda_hat observed per replicate). Failures are
    excluded; more than 5% of them raises FitError.

    Estimators: "cgm" (closed form at the true labels), "variational",
    "profile-then-cgm" (label search, then closed form).
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}")
    K = theta0.K
    lp0 = to_logits(theta0)
    nu0 = pack_nu(lp0.nu)
    cov = asymptotic_cov(theta0, n)
    w1 = sym_inv_sqrt(cov.sigma1)
    w2 = sym_inv_sqrt(cov.sigma2)
    base = var_config or VarConfig(restarts=2)

    def one(r: int):
        z, g = sample_graph(theta0, n, derived_rng(seed, 5, r))
        try:
            wilks_value = np.nan
            if estimator == "cgm":
                fit = cgm_mle(g, z, K)
                params = fit.to_params()
                if compute_wilks:
                    wilks_value = 2.0 * (fit.loglik - complete_loglik(g, z, theta0))
            elif estimator == "variational":
                cfg = _with_seed(base, _key(seed, 6, r))
                vfit = fit_variational(g, K, cfg)
                params = vfit.params
                if compute_wilks:
                    _, j0 = optimize_q(g, theta0, _with_seed(base, _key(seed, 7, r)))
                    wilks_value = 2.0 * (vfit.elbo - j0)
            else:  # profile-then-cgm
                labels, _ = profile_label_search(
                    g, K, ProfileSearchConfig(seed=_key(seed, 6, r))
                )
                fit = cgm_mle(g, labels, K)
                params = fit.to_params()
                if compute_wilks:
                    wilks_value = 2.0 * (
                        fit.loglik - complete_loglik(g, labels, theta0)
                    )
            _, aligned = align_params(params, theta0)
            lp = to_logits(aligned)
        except (ValueError, FitError):
            return None
        lam = g.average_degree
        e1 = w1 @ (np.sqrt(n) * (lp.varpi - lp0.varpi)) if K > 1 else np.zeros(0)
        e2 = w2 @ (np.sqrt(n * lam) * (pack_nu(lp.nu) - nu0))
        return e1, e2, lam, wilks_value

    results = run_indexed(one, reps, threads)
    failures = sum(1 for r in results if r is None)
    if failures > 0.05 * reps:
        raise FitError(f"{failures}/{reps} replicates failed (threshold 5%)")
    ok = [r for r in results if r is not None]
    std_varpi = np.array([r[0] for r in ok]).reshape(len(ok), K - 1)
    std_nu = np.array([r[1] for r in ok])
    lams = np.array([r[2] for r in ok])
    wilks = np.array([r[3] for r in ok])
    coverage_varpi = (
        (np.abs(std_varpi) <= _Z95).mean(axis=0) if K > 1 else np.zeros(0)
    )
    coverage_nu = (np.abs(std_nu) <= _Z95).mean(axis=0)
    ks_varpi = np.array(
        [scipy.stats.kstest(std_varpi[:, j], "norm").statistic
         for j in range(std_varpi.shape[1])]
    )
    ks_nu = np.array(
        [scipy.stats.kstest(std_nu[:, j], "norm").statistic
         for j in range(std_nu.shape[1])]
    )
    dof = wilks_df(K)
    finite_wilks = wilks[np.isfinite(wilks)]
    wilks_ks = (
        float(scipy.stats.kstest(finite_wilks, scipy.stats.chi2(dof).cdf).statistic)
        if finite_wilks.size
        else float("nan")
    )
    return MonteCarloReport(
        estimator=estimator,
        n=n,
        reps=reps,
        failures=failures,
        std_varpi=std_varpi,
        std_nu=std_nu,
        lambda_hats=lams,
        wilks=wilks,
        coverage_varpi=coverage_varpi,
        coverage_nu=coverage_nu,
        ks_varpi=ks_varpi,
        ks_nu=ks_nu,
        wilks_ks=wilks_ks,
        wilks_dof=dof,
    )
