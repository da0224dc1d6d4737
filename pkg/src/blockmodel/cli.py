"""Command-line interface: generate / fit / bootstrap / experiment.

Exit codes: 0 success, 2 usage or parse error, 3 non-convergence, 4
enumeration budget exceeded, 5 bootstrap replicate-failure threshold.
Every command is deterministic given --seed (env BLOCKMODEL_SEED is the
fallback) and --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io
from .cgm import cgm_mle
from .degree import DcFitConfig, fit_submodel
from .exact import ExactEmConfig, exact_gm_mle
from .harness import (
    EXPERIMENTS,
    run_experiment,
    write_rows_csv,
    write_summary_json,
)
from .inference import parametric_bootstrap
from .model import (
    EnumerationBudgetError,
    FitError,
    ModelParams,
    sample_graph,
)
from .modularity import ProfileSearchConfig, profile_label_search
from .varem import VarConfig, fit_variational

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3
EXIT_BUDGET = 4
EXIT_REPLICATE_FAILURES = 5


def _default_seed() -> int:
    return int(os.environ.get("BLOCKMODEL_SEED", "0"))


def _params_to_doc(params: ModelParams) -> dict:
    return {
        "K": params.K,
        "rho": params.rho,
        "pi": params.pi.tolist(),
        "S": params.S.tolist(),
    }


def _write_json(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        params = io.load_params(args.params)
    except (json.JSONDecodeError, KeyError, ValueError, OSError) as exc:
        print(f"error: cannot load params: {exc}", file=sys.stderr)
        return EXIT_USAGE
    labels, graph = sample_graph(params, args.n, args.seed)
    io.write_graph(graph, args.out)
    if args.labels_out:
        io.write_labels(labels, args.labels_out)
    density = graph.edge_total / (graph.n * (graph.n - 1)) if graph.n > 1 else 0.0
    print(f"n={graph.n} L={graph.edge_total} density={density:.17g}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    graph = io.read_graph(args.graph)
    seed = args.seed
    doc: dict = {"method": args.method, "K": args.K}
    converged = True
    try:
        if args.method == "cgm":
            if not args.labels:
                print("error: --labels is required for method cgm", file=sys.stderr)
                return EXIT_USAGE
            labels = io.read_labels(args.labels)
            fit = cgm_mle(graph, labels, args.K)
            doc.update(
                loglik=fit.loglik, iterations=0, converged=not fit.empty_block,
                empty_block=fit.empty_block,
                pi_hat=fit.pi_hat.tolist(),
                H_hat=np.nan_to_num(fit.H_hat, nan=-1.0).tolist(),
            )
            if not fit.empty_block:
                doc["params"] = _params_to_doc(fit.to_params())
            converged = not fit.empty_block
        elif args.method == "exact-ml":
            fit = exact_gm_mle(
                graph, args.K,
                ExactEmConfig(tol=args.tol, restarts=args.restarts, seed=seed),
            )
            doc.update(
                loglik=fit.loglik, iterations=fit.iterations,
                converged=fit.converged, params=_params_to_doc(fit.params),
            )
            converged = fit.converged
        elif args.method == "variational":
            fit = fit_variational(
                graph, args.K,
                VarConfig(tol=args.tol, max_iters=args.max_iters,
                          restarts=args.restarts, seed=seed),
            )
            doc.update(
                elbo=fit.elbo, iterations=fit.iterations, converged=fit.converged,
                restarts_used=fit.restarts_used,
                params=_params_to_doc(fit.params),
            )
            converged = fit.converged
        elif args.method == "profile":
            labels, qn = profile_label_search(
                graph, args.K,
                ProfileSearchConfig(restarts=args.restarts, seed=seed),
            )
            fit = cgm_mle(graph, labels, args.K)
            doc.update(
                Qn=qn, loglik=fit.loglik, iterations=0,
                converged=not fit.empty_block,
                labels=[int(v) + 1 for v in labels],
            )
            if not fit.empty_block:
                doc["params"] = _params_to_doc(fit.to_params())
            if args.labels_out:
                io.write_labels(labels, args.labels_out)
            converged = not fit.empty_block
        elif args.method == "dc":
            fit = fit_submodel(
                graph, args.U, args.V,
                DcFitConfig(tol=args.tol, max_iters=args.max_iters,
                            restarts=args.restarts, seed=seed),
            )
            doc.update(
                elbo=fit.elbo, iterations=fit.iterations, converged=fit.converged,
                stalled=fit.stalled,
                dc={
                    "U": fit.dc.U, "V": fit.dc.V,
                    "alpha": fit.dc.alpha.tolist(),
                    "beta": fit.dc.beta.tolist(),
                    "gamma": fit.dc.gamma.tolist(),
                    "G": fit.dc.G.tolist(),
                },
                params=_params_to_doc(fit.params),
            )
            converged = fit.converged
    except EnumerationBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    _write_json(doc, args.out)
    return EXIT_OK if converged else EXIT_NONCONVERGED


def cmd_bootstrap(args: argparse.Namespace) -> int:
    graph = io.read_graph(args.graph)
    try:
        result = parametric_bootstrap(
            graph, args.K, args.B,
            VarConfig(tol=args.tol, restarts=args.restarts, seed=args.seed),
            threads=args.threads,
        )
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REPLICATE_FAILURES
    d = result.nu_star.shape[1]
    K = args.K
    with open(args.out, "w") as fh:
        cols = ["replicate", "ok"]
        cols += [f"varpi_star_{j}" for j in range(K - 1)]
        cols += [f"nu_star_{j}" for j in range(d)]
        fh.write(",".join(cols) + "\n")
        ok_iter = iter(range(result.varpi_star.shape[0]))
        pos = 0
        for b in range(args.B):
            if b in result.failed_indices:
                row = [str(b), "0"] + ["nan"] * (K - 1 + d)
            else:
                row = [str(b), "1"]
                row += [f"{v:.17g}" for v in result.varpi_star[pos]]
                row += [f"{v:.17g}" for v in result.nu_star[pos]]
                pos += 1
            fh.write(",".join(row) + "\n")
    summary = {
        "B": result.B,
        "failures": result.failures,
        "lambda_hat": result.lambda_hat,
        "cov_varpi": result.cov_varpi.tolist(),
        "cov_nu": result.cov_nu.tolist(),
    }
    if args.summary_out:
        _write_json(summary, args.summary_out)
    print(
        f"bootstrap B={result.B} failures={result.failures} "
        f"lambda_hat={result.lambda_hat:.17g}"
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    options = {
        "n": args.n,
        "reps": args.reps,
        "seed": args.seed,
        "threads": args.threads,
        "K": args.K,
        "estimator": args.estimator,
        "rho": args.rho,
        "separation": args.separation,
        "restarts": args.restarts,
        "tol": args.tol,
    }
    if args.params:
        try:
            options["params"] = io.load_params(args.params)
        except (json.JSONDecodeError, KeyError, ValueError, OSError) as exc:
            print(f"error: cannot load params: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if args.n_grid:
        options["n_grid"] = [int(v) for v in args.n_grid.split(",")]
    if args.base_lambda is not None:
        options["base_lambda"] = args.base_lambda
    if args.s:
        options["s"] = np.array([float(v) for v in args.s.split(",")])
    if args.t:
        options["t"] = np.array([float(v) for v in args.t.split(",")])
    try:
        result = run_experiment(args.name, options)
    except EnumerationBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REPLICATE_FAILURES
    csv_path = args.out_csv or f"{args.name}_replicates.csv"
    json_path = args.out_json or f"{args.name}_summary.json"
    write_rows_csv(result, csv_path)
    write_summary_json(result, json_path)
    print(f"experiment {args.name}: {len(result.rows)} rows -> {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockmodel",
        description="Stochastic blockmodel estimation and Monte Carlo checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a graph and labels from parameters")
    p.add_argument("--params", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out", dest="labels_out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit parameters to a graph file")
    p.add_argument(
        "--method", required=True,
        choices=["cgm", "exact-ml", "variational", "profile", "dc"],
    )
    p.add_argument("--graph", required=True)
    p.add_argument("--labels")
    p.add_argument("--labels-out", dest="labels_out")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--U", type=int, default=2)
    p.add_argument("--V", type=int, default=1)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", help="parametric bootstrap of the variational fit")
    p.add_argument("--graph", required=True)
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out", dest="summary_out")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("experiment", help="run a named Monte Carlo experiment")
    p.add_argument("name", choices=list(EXPERIMENTS))
    p.add_argument("--params")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--estimator", default="cgm",
                   choices=["cgm", "variational", "profile-then-cgm"])
    p.add_argument("--rho", type=float, default=0.075)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--base-lambda", dest="base_lambda", type=float, default=None)
    p.add_argument("--s")
    p.add_argument("--t")
    p.add_argument("--restarts", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None:
        args.seed = _default_seed()
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
