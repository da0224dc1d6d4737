"""Sampling a blockmodel graph and fitting it with observed labels.

Walks through the generative parameterization (K, rho, pi, S), draws a
graph, and compares the closed-form complete-data MLE with the truth,
ending with a Wilks test against the generating parameters.
"""

import numpy as np

import blockmodel as bm

# A planted partition: within-block intensity 5x the between-block one,
# scaled so the expected edge probability is rho (expected degree n*rho).
theta = bm.planted_partition_params(K=2, rho=0.05, separation=5.0)
print("pi   =", theta.pi)
print("S    =", theta.S.round(4))
print("H    =", theta.H.round(4), " (edge probabilities)")

n = 900
z, graph = bm.sample_graph(theta, n=n, seed=7)
print(f"\nsampled n={n}: average degree {graph.average_degree:.2f} "
      f"(expected {theta.expected_degree(n):.2f})")

fit = bm.cgm_mle(graph, z, K=2)
print("\ncomplete-data MLE with the true labels:")
print("pi_hat =", fit.pi_hat.round(4))
print("H_hat  =", fit.H_hat.round(4))
print("max |H_hat - H| =", np.abs(fit.H_hat - theta.H).max().round(5))

# Errors in logit coordinates have the two-rate structure: sqrt(n) for the
# class proportions, sqrt(n * lambda) for the edge logits.
cov = bm.asymptotic_cov(theta, n)
lp0 = bm.to_logits(theta)
lp = fit.to_logits()
print("\nscaled varpi error:", (np.sqrt(n) * (lp.varpi - lp0.varpi)).round(3),
      "vs sigma1 sd", np.sqrt(np.diag(cov.sigma1)).round(3))

wilks = bm.wilks_cgm(graph, z, theta)
print(f"\nWilks statistic vs truth: {wilks:.2f} "
      f"(chi-square with {bm.wilks_df(2)} degrees of freedom)")
