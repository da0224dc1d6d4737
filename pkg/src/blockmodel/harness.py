"""Named, seeded experiments with CSV/JSON emission.

Every experiment is a pure function of its options: replicates draw from
seeds derived per index, aggregation is index-ordered, and the writers format
floats at 17 significant digits, so outputs are byte-stable across runs and
worker counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from .cgm import cgm_mle, wilks_cgm, wilks_df
from .exact import verify_identity_eq2
from .inference import (
    lan_check,
    monte_carlo_normality,
    wilks_variational,
)
from .model import (
    ModelParams,
    aligned_param_distance,
    derived_rng,
    planted_partition_params,
    sample_graph,
)
from .varem import VarConfig, check_sandwich, fit_variational
from ._concurrency import run_indexed

EXPERIMENTS = (
    "normality",
    "wilks",
    "lan",
    "sandwich",
    "identity",
    "equivalence-trend",
    "concentration",
)

__all__ = ["EXPERIMENTS", "ExperimentResult", "run_experiment", "write_rows_csv",
           "write_summary_json", "random_interior_params", "perturbed_params"]


@dataclass
class ExperimentResult:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_rows_csv(result: ExperimentResult, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(result.columns) + "\n")
        for row in result.rows:
            fh.write(",".join(_fmt(row[c]) for c in result.columns) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_summary_json(result: ExperimentResult, path: str | Path) -> None:
    doc = {"experiment": result.name, **_jsonable(result.summary)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def random_interior_params(
    K: int, rng: np.random.Generator, rho_range=(0.1, 0.5)
) -> ModelParams:
    """Random parameters comfortably inside the domain (for oracle sweeps)."""
    pi = 0.8 * rng.dirichlet(np.full(K, 5.0)) + 0.2 / K
    pi = pi / pi.sum()
    raw = rng.uniform(0.5, 1.5, size=(K, K))
    S = (raw + raw.T) / 2.0 + np.diag(rng.uniform(0.0, 1.0, size=K))
    S = S / float(pi @ S @ pi)
    rho = rng.uniform(*rho_range)
    rho = min(rho, (1.0 - 1e-3) / S.max())
    return ModelParams(K=K, rho=rho, pi=pi, S=S)


def perturbed_params(
    base: ModelParams, rng: np.random.Generator, scale: float = 0.1
) -> ModelParams:
    """Multiplicative jitter of `base`, kept interior; for identity checks."""
    pi = base.pi * (1.0 + scale * (rng.random(base.K) - 0.5))
    pi = pi / pi.sum()
    raw = base.S * (1.0 + scale * (rng.random((base.K, base.K)) - 0.5))
    S = (raw + raw.T) / 2.0
    S = S / float(pi @ S @ pi)
    rho = base.rho * (1.0 + scale * (rng.random() - 0.5))
    rho = min(rho, (1.0 - 1e-3) / S.max())
    return ModelParams(K=base.K, rho=rho, pi=pi, S=S)


def _params_from_options(options: dict) -> ModelParams:
    if options.get("params") is not None:
        return options["params"]
    return planted_partition_params(
        K=options.get("K", 2),
        rho=options.get("rho", 0.075),
        separation=options.get("separation", 5.0),
    )


def _var_config(options: dict, seed) -> VarConfig:
    return VarConfig(
        tol=options.get("tol", 1e-8),
        max_iters=options.get("max_iters", 500),
        restarts=options.get("restarts", 2),
        seed=seed,
    )


def _normality(options: dict) -> ExperimentResult:
    theta0 = _params_from_options(options)
    n = options["n"]
    reps = options["reps"]
    seed = options.get("seed", 0)
    estimator = options.get("estimator", "cgm")
    report = monte_carlo_normality(
        theta0, n, reps, estimator=estimator, seed=seed,
        var_config=_var_config(options, seed),
        threads=options.get("threads", 1),
    )
    K = theta0.K
    cols = ["replicate", "estimator"]
    cols += [f"std_varpi_{j}" for j in range(K - 1)]
    cols += [f"std_nu_{j}" for j in range(report.std_nu.shape[1])]
    cols += ["lambda_hat", "wilks"]
    rows = []
    for r in range(report.std_nu.shape[0]):
        row = {"replicate": r, "estimator": estimator}
        for j in range(K - 1):
            row[f"std_varpi_{j}"] = report.std_varpi[r, j]
        for j in range(report.std_nu.shape[1]):
            row[f"std_nu_{j}"] = report.std_nu[r, j]
        row["lambda_hat"] = report.lambda_hats[r]
        row["wilks"] = report.wilks[r]
        rows.append(row)
    emp_cov_varpi = (
        np.cov(report.std_varpi, rowvar=False).reshape(K - 1, K - 1)
        if K > 1 and report.std_varpi.shape[0] > 1
        else np.zeros((max(K - 1, 0),) * 2)
    )
    emp_cov_nu = np.atleast_2d(np.cov(report.std_nu, rowvar=False))
    summary = {
        "estimator": estimator,
        "n": n,
        "reps": reps,
        "failures": report.failures,
        "coverage_varpi": report.coverage_varpi,
        "coverage_nu": report.coverage_nu,
        "ks_varpi": report.ks_varpi,
        "ks_nu": report.ks_nu,
        "wilks_ks": report.wilks_ks,
        "wilks_df": report.wilks_dof,
        "cov_std_varpi": emp_cov_varpi,
        "cov_std_nu": emp_cov_nu,
    }
    return ExperimentResult("normality", cols, rows, summary)


def _wilks(options: dict) -> ExperimentResult:
    theta0 = _params_from_options(options)
    n = options["n"]
    reps = options["reps"]
    seed = options.get("seed", 0)
    K = theta0.K

    def one(r: int):
        z, g = sample_graph(theta0, n, derived_rng(seed, 5, r))
        lam_v = wilks_variational(g, K, theta0, _var_config(options, (seed, 6, r)))
        lam_c = wilks_cgm(g, z, theta0)
        return lam_v, lam_c

    results = run_indexed(one, reps, options.get("threads", 1))
    rows = [
        {"replicate": r, "wilks_variational": lv, "wilks_cgm": lc}
        for r, (lv, lc) in enumerate(results)
    ]
    lv = np.array([r[0] for r in results])
    lc = np.array([r[1] for r in results])
    dof = wilks_df(K)
    ref = scipy.stats.chi2(dof).cdf
    summary = {
        "n": n,
        "reps": reps,
        "df": dof,
        "ks_variational": float(scipy.stats.kstest(lv, ref).statistic),
        "ks_cgm": float(scipy.stats.kstest(lc, ref).statistic),
    }
    return ExperimentResult(
        "wilks", ["replicate", "wilks_variational", "wilks_cgm"], rows, summary
    )


def _lan(options: dict) -> ExperimentResult:
    theta0 = _params_from_options(options)
    reps = options["reps"]
    seed = options.get("seed", 0)
    K = theta0.K
    d = K * (K + 1) // 2
    s = np.asarray(options.get("s", np.full(K - 1, 0.5)), dtype=float)
    t = np.asarray(options.get("t", np.full(d, 0.5)), dtype=float)
    n_grid = options.get("n_grid") or [options["n"]]
    rows = []
    medians = {}
    for n in n_grid:
        # lambda grows like n^0.3 when a base is supplied
        theta = theta0
        if options.get("base_lambda") is not None:
            lam = options["base_lambda"] * (n / n_grid[0]) ** 0.3
            theta = ModelParams(K=K, rho=lam / n, pi=theta0.pi, S=theta0.S)
        report = lan_check(
            theta, n, s, t, reps, seed=seed, threads=options.get("threads", 1)
        )
        for r, rem in enumerate(report.remainders):
            rows.append(
                {"n": n, "replicate": r, "ratio": report.ratio_values[r],
                 "remainder": rem}
            )
        medians[str(n)] = report.median_abs_remainder
    vals = [medians[str(n)] for n in n_grid]
    summary = {
        "s": s,
        "t": t,
        "reps": reps,
        "median_abs_remainder": medians,
        "decreasing": bool(all(b < a for a, b in zip(vals, vals[1:]))),
    }
    return ExperimentResult(
        "lan", ["n", "replicate", "ratio", "remainder"], rows, summary
    )


def _sandwich(options: dict) -> ExperimentResult:
    K = options.get("K", 2)
    n_max = options.get("n", 10)
    reps = options["reps"]
    seed = options.get("seed", 0)

    def one(r: int):
        rng = derived_rng(seed, 5, r)
        n = int(rng.integers(max(K + 2, n_max - 4), n_max + 1))
        theta = random_interior_params(K, rng)
        z, g = sample_graph(theta, n, rng)
        return (n,) + check_sandwich(z, theta, g)

    results = run_indexed(one, reps, options.get("threads", 1))
    rows = [
        {"replicate": r, "n": n, "lower": lo, "mid": mid, "upper": up, "ok": ok}
        for r, (n, lo, mid, up, ok) in enumerate(results)
    ]
    n_ok = sum(1 for row in rows if row["ok"])
    summary = {"reps": reps, "ok": n_ok, "all_ok": n_ok == reps}
    return ExperimentResult(
        "sandwich", ["replicate", "n", "lower", "mid", "upper", "ok"], rows, summary
    )


def _identity(options: dict) -> ExperimentResult:
    K = options.get("K", 2)
    n = options.get("n", 6)
    reps = options["reps"]
    seed = options.get("seed", 0)

    def one(r: int):
        rng = derived_rng(seed, 5, r)
        theta0 = random_interior_params(K, rng)
        theta = perturbed_params(theta0, rng)
        _, g = sample_graph(theta0, n, rng)
        return verify_identity_eq2(g, theta, theta0)

    results = run_indexed(one, reps, options.get("threads", 1))
    rows = [
        {"replicate": r, "lhs": lhs, "rhs": rhs, "abs_diff": diff}
        for r, (lhs, rhs, diff) in enumerate(results)
    ]
    summary = {
        "reps": reps,
        "max_abs_diff": max(row["abs_diff"] for row in rows),
    }
    return ExperimentResult(
        "identity", ["replicate", "lhs", "rhs", "abs_diff"], rows, summary
    )


def _equivalence_trend(options: dict) -> ExperimentResult:
    K = options.get("K", 2)
    separation = options.get("separation", 5.0)
    n_grid = options.get("n_grid") or [400, 800, 1600]
    reps = options.get("reps", 30)
    seed = options.get("seed", 0)
    base_lambda = options.get("base_lambda", 20.0)
    threads = options.get("threads", 1)
    rows = []
    medians = {}
    for n in n_grid:
        lam = base_lambda * (n / n_grid[0]) ** 0.3
        theta = planted_partition_params(K, lam / n, separation)

        def one(r: int, n=n, theta=theta):
            z, g = sample_graph(theta, n, derived_rng(seed, 5, n, r))
            var = fit_variational(g, K, _var_config(options, (seed, 6, n, r)))
            cgm = cgm_mle(g, z, K).to_params()
            return np.sqrt(n) * aligned_param_distance(var.params, cgm)

        dists = run_indexed(one, reps, threads)
        for r, dist in enumerate(dists):
            rows.append({"n": n, "replicate": r, "scaled_distance": dist})
        medians[str(n)] = float(np.median(dists))
    vals = [medians[str(n)] for n in n_grid]
    summary = {
        "n_grid": list(n_grid),
        "reps": reps,
        "median_scaled_distance": medians,
        "decreasing": bool(all(b < a for a, b in zip(vals, vals[1:]))),
    }
    return ExperimentResult(
        "equivalence-trend", ["n", "replicate", "scaled_distance"], rows, summary
    )


def _concentration(options: dict) -> ExperimentResult:
    K = options.get("K", 2)
    n = options.get("n", 12)
    reps = options.get("reps", 200)
    seed = options.get("seed", 0)
    theta = options.get("params") or planted_partition_params(
        K, options.get("rho", 0.25), options.get("separation", 1.3)
    )
    mu_n = n * n * theta.rho
    prefactor = 2.0 * K ** (n + 2)

    from .exact import _decode, _num_labelings

    m = _num_labelings(K, n)
    label_matrix = _decode(np.arange(m, dtype=np.int64), n, K).astype(np.int64)
    # onehot[a] is the (m, n) indicator of class a, shared across draws
    onehot = [(label_matrix == a).astype(float) for a in range(K)]
    S = theta.S

    def one(r: int):
        rng = derived_rng(seed, 5, r)
        z, g = sample_graph(theta, n, rng)
        A = g.adjacency.astype(float)
        C = np.zeros((n, K))
        C[np.arange(n), z] = 1.0
        O = np.empty((m, K, K))
        R = np.empty((m, K, K))
        for a in range(K):
            Ta = onehot[a] @ A
            R[:, a, :] = onehot[a] @ C / n
            for b in range(K):
                O[:, a, b] = (Ta * onehot[b]).sum(axis=1)
        RSR = np.einsum("mac,cd,mbd->mab", R, S, R)
        X = O / mu_n - RSR
        return float(np.abs(X).max())

    max_vals = np.array(run_indexed(one, reps, options.get("threads", 1)))
    rows = [
        {"replicate": r, "max_abs_X": v} for r, v in enumerate(max_vals)
    ]
    # Compare the empirical tail with the stated bound where it is informative.
    eps_grid = np.linspace(0.05, 3.0, 60)
    bound = prefactor * np.exp(-0.25 * eps_grid**2 * mu_n)
    informative = bound < 1.0
    empirical = np.array([(max_vals >= e).mean() for e in eps_grid])
    ok = bool(np.all(empirical[informative] <= bound[informative]))
    summary = {
        "n": n,
        "reps": reps,
        "rho": theta.rho,
        "mu_n": mu_n,
        "epsilons": eps_grid,
        "bound": bound,
        "empirical_tail": empirical,
        "informative": informative,
        "bound_respected": ok,
    }
    return ExperimentResult("concentration", ["replicate", "max_abs_X"], rows, summary)


_RUNNERS = {
    "normality": _normality,
    "wilks": _wilks,
    "lan": _lan,
    "sandwich": _sandwich,
    "identity": _identity,
    "equivalence-trend": _equivalence_trend,
    "concentration": _concentration,
}


def run_experiment(name: str, options: dict) -> ExperimentResult:
    """Dispatch an experiment by name. Unknown names raise KeyError."""
    if name not in _RUNNERS:
        raise KeyError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    return _RUNNERS[name](options)
