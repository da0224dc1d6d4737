"""Confidence regions and the parametric bootstrap.

Plug-in regions come from the analytic covariances at the estimate; the
bootstrap refits simulated graphs and should reproduce those covariances.
"""

import numpy as np

import blockmodel as bm

theta = bm.planted_partition_params(K=2, rho=40 / 500, separation=5.0)
z, graph = bm.sample_graph(theta, n=500, seed=4)

fit = bm.fit_variational(graph, 2, bm.VarConfig(seed=1, restarts=2))
region = bm.confidence_region(fit, level=0.95, graph=graph)
lp0 = bm.to_logits(theta)
print("95% intervals for the edge logits (free coordinates):")
for j, (lo, hi) in enumerate(region.nu_intervals):
    truth = bm.pack_nu(lp0.nu)[j]
    inside = lo <= truth <= hi
    print(f"  nu[{j}]: [{lo:.3f}, {hi:.3f}]  truth {truth:.3f} covered={inside}")
print(f"varpi interval: {region.varpi_intervals[0].round(3)} "
      f"truth {lp0.varpi[0]:.3f}")

B = 60
result = bm.parametric_bootstrap(graph, 2, B, bm.VarConfig(seed=9, restarts=2))
sigma1 = bm.asymptotic_cov(fit.params, graph.n).sigma1
print(f"\nbootstrap (B={B}) covariance of sqrt(n)(varpi* - varpi_hat): "
      f"{result.cov_varpi[0, 0]:.3f}")
print(f"analytic sigma1 at the fit:                        "
      f"{sigma1[0, 0]:.3f}")
print(f"replicate failures: {result.failures}")
