"""Mean-field variational EM: fitting without labels.

The fit alternates single-site posterior updates with closed-form parameter
updates; the objective J lower-bounds the marginal log-likelihood and never
decreases. At enumerable sizes the variational optimum all but coincides
with the exact marginal MLE.
"""

import numpy as np

import blockmodel as bm

theta = bm.planted_partition_params(K=2, rho=30 / 400, separation=5.0)
z, graph = bm.sample_graph(theta, n=400, seed=11)

fit = bm.fit_variational(graph, K=2, config=bm.VarConfig(seed=1, restarts=3))
print(f"converged={fit.converged} after {fit.iterations} iterations, "
      f"restart {fit.best_restart} of {fit.restarts_used} won")
print(f"J trace: {fit.history[0]:.1f} -> {fit.history[-1]:.1f} "
      f"(monotone: {bool(np.all(np.diff(fit.history) >= -1e-10))})")

_, _, errors = bm.align_labels(fit.q.hard_labels(), z, 2)
print(f"label recovery: {errors} misclassified of {graph.n}")

cgm = bm.cgm_mle(graph, z, 2).to_params()
print(f"aligned distance to the true-label CGM fit: "
      f"{bm.aligned_param_distance(fit.params, cgm):.2e}")

# At tiny n the exact marginal MLE is computable; the two agree closely.
z12, g12 = bm.sample_graph(bm.planted_partition_params(2, 0.5, 8.0), 12, 5)
var12 = bm.fit_variational(g12, 2, bm.VarConfig(seed=2))
exact12 = bm.exact_gm_mle(g12, 2)
print(f"\nn=12: |J - log g| at the variational fit: "
      f"{abs(var12.elbo - bm.marginal_loglik(g12, var12.params)):.4f}")
print(f"n=12: aligned distance variational vs exact MLE: "
      f"{bm.aligned_param_distance(var12.params, exact12.params):.4f}")
