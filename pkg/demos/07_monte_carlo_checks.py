"""Small-scale Monte Carlo versions of the asymptotic claims.

The full-size runs live in the acceptance suite; this script shows the same
machinery at friendlier sizes: standardized-error normality, the Wilks
chi-square, and the local quadratic expansion of the likelihood ratio.
"""

import numpy as np
import scipy.stats

import blockmodel as bm

theta = bm.planted_partition_params(K=2, rho=40 / 400, separation=5.0)

report = bm.monte_carlo_normality(theta, n=400, reps=300, estimator="cgm",
                                  seed=1, threads=2)
print("standardized errors vs N(0,1):")
print("  KS varpi:", report.ks_varpi.round(3))
print("  KS nu:   ", report.ks_nu.round(3))
print("  coverage at nominal 95%:",
      np.concatenate([report.coverage_varpi, report.coverage_nu]).round(3))
print(f"  Wilks KS vs chi2_{report.wilks_dof}: {report.wilks_ks:.3f}")

s = np.array([0.6])
t = np.array([0.5, -0.4, 0.3])
for n in (200, 800):
    lam = 15.0 * (n / 200) ** 0.3
    th = bm.planted_partition_params(2, lam / n, 5.0)
    rep = bm.lan_check(th, n, s, t, reps=300, seed=2)
    print(f"LAN remainder at n={n}: median |r| = {rep.median_abs_remainder:.4f}")

lam_v = []
for seed in range(40):
    z, g = bm.sample_graph(theta, 400, (9, seed))
    lam_v.append(bm.wilks_variational(g, 2, theta,
                                      bm.VarConfig(seed=(10, seed), restarts=2)))
ks = scipy.stats.kstest(lam_v, scipy.stats.chi2(bm.wilks_df(2)).cdf).statistic
print(f"variational Wilks over 40 replicates: KS vs chi2_4 = {ks:.3f}")
