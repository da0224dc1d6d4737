"""Degree-corrected submodel with U x V classes.

Each node carries a block coordinate u and a degree coordinate v; edge
probabilities factor as gamma_v gamma_v' G(u, u'), so degree heterogeneity
costs only 2V - 1 extra parameters instead of a full UV-class blockmodel.
"""

import numpy as np

import blockmodel as bm

dc = bm.DcParams(
    U=2, V=2,
    alpha=np.array([0.6, 0.4]),
    beta=np.array([0.5, 0.5]),
    gamma=np.array([1.0, 0.45]),  # high- and low-degree halves
    G=np.array([[0.12, 0.03], [0.03, 0.10]]),
)
print(f"free parameters: {bm.dc_param_count(2, 2)} "
      f"(a 4-class blockmodel would need {bm.wilks_df(4) + 1})")

params = bm.dc_to_blockmodel(dc)
print("mapped pi:", params.pi.round(3))
print("mapped H:\n", params.H.round(4))

z, graph = bm.sample_graph(params, n=800, seed=6)
deg = graph.adjacency.sum(axis=1)
v_true = z % 2  # row-major (u, v) flattening
print(f"\nmean degree by v-coordinate: "
      f"{deg[v_true == 0].mean():.1f} (v=0) vs {deg[v_true == 1].mean():.1f} (v=1)")

fit = bm.fit_submodel(graph, U=2, V=2, config=bm.DcFitConfig(seed=3, restarts=2))
print(f"\nfit converged={fit.converged}, J={fit.elbo:.1f}")
print("gamma_hat:", fit.dc.gamma.round(3), " (canonical: max = 1, descending)")
print("G_hat:\n", fit.dc.G.round(4))
print("aligned distance to the generating blockmodel:",
      round(bm.aligned_param_distance(fit.params, params), 4))
