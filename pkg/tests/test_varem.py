"""Mean-field objective, coordinate ascent, fitting, and the sandwich bound."""

import numpy as np
import pytest

import blockmodel as bm
from blockmodel.varem import MeanFieldPosterior, VarConfig


def two_block(rho=0.3, sep=5.0):
    return bm.planted_partition_params(2, rho, sep)


def two_cliques(size):
    n = 2 * size
    edges = [(i, j) for i in range(size) for j in range(i + 1, size)]
    edges += [(i, j) for i in range(size, n) for j in range(i + 1, n)]
    return bm.Graph.from_edges(n, np.array(edges))


def clique_params():
    return bm.ModelParams.from_pi_H(
        np.array([0.5, 0.5]), np.array([[1.0, 0.0], [0.0, 1.0]])
    )


class TestMeanFieldPosterior:
    def test_rows_must_normalize(self):
        with pytest.raises(ValueError):
            MeanFieldPosterior(q=np.array([[0.6, 0.3]]))

    def test_point_mass(self):
        q = MeanFieldPosterior.point_mass(np.array([0, 1, 1]), 2)
        assert q.q[0, 0] == 1.0
        assert np.array_equal(q.hard_labels(), [0, 1, 1])


class TestElbo:
    @pytest.mark.parametrize("seed", range(4))
    def test_point_mass_equals_complete_loglik(self, seed):
        p = two_block()
        z, g = bm.sample_graph(p, 12, seed)
        q = MeanFieldPosterior.point_mass(z, 2)
        assert bm.elbo(q, p, g) == pytest.approx(
            bm.complete_loglik(g, z, p), abs=1e-10
        )

    @pytest.mark.parametrize("seed", range(6))
    def test_bounded_by_marginal(self, seed):
        rng = bm.derived_rng(seed, 1)
        p = two_block(rho=0.25)
        z, g = bm.sample_graph(p, 8, seed)
        q = MeanFieldPosterior(q=rng.dirichlet(np.ones(2), size=8))
        assert bm.elbo(q, p, g) <= bm.marginal_loglik(g, p) + 1e-9

    def test_uniform_q_equal_H_attains_marginal(self):
        # Z carries no information, so the product posterior is exact
        p = bm.ModelParams.from_pi_H(np.array([0.5, 0.5]), np.full((2, 2), 0.3))
        _, g = bm.sample_graph(p, 8, 0)
        q = MeanFieldPosterior.uniform(8, 2)
        assert bm.elbo(q, p, g) == pytest.approx(
            bm.marginal_loglik(g, p), abs=1e-10
        )

    def test_incompatible_boundary_is_neg_inf(self):
        g = bm.Graph.from_edges(2, np.array([[0, 1]]))  # an edge across blocks
        q = MeanFieldPosterior.point_mass(np.array([0, 1]), 2)
        assert bm.elbo(q, clique_params(), g) == -np.inf


class TestEStep:
    def test_fixed_point_on_separated_cliques(self):
        g = two_cliques(4)
        z = np.array([0] * 4 + [1] * 4)
        q = MeanFieldPosterior.point_mass(z, 2)
        q2 = bm.e_step(q, clique_params(), g, np.arange(8))
        assert np.abs(q2.q - q.q).max() < 1e-15

    @pytest.mark.parametrize("seed", range(6))
    def test_single_site_update_increases_elbo(self, seed):
        rng = bm.derived_rng(seed, 2)
        p = two_block()
        z, g = bm.sample_graph(p, 15, seed)
        q = MeanFieldPosterior(q=rng.dirichlet(np.ones(2), size=15))
        before = bm.elbo(q, p, g)
        site = int(rng.integers(15))
        q2 = bm.e_step(q, p, g, np.array([site]))
        assert bm.elbo(q2, p, g) >= before - 1e-12

    def test_uniform_H_returns_prior(self):
        p = bm.ModelParams.from_pi_H(np.array([0.7, 0.3]), np.full((2, 2), 0.25))
        _, g = bm.sample_graph(p, 10, 3)
        rng = bm.derived_rng(9)
        q = MeanFieldPosterior(q=rng.dirichlet(np.ones(2), size=10))
        q2 = bm.e_step(q, p, g, np.arange(10))
        assert np.abs(q2.q - p.pi[None, :]).max() < 1e-12


class TestMStep:
    @pytest.mark.parametrize("seed", range(4))
    def test_point_mass_reproduces_cgm_mle(self, seed):
        p = two_block()
        z, g = bm.sample_graph(p, 20, seed)
        if np.unique(z).size < 2:
            pytest.skip("degenerate draw")
        fit = bm.cgm_mle(g, z, 2)
        if fit.empty_block:
            pytest.skip("empty block")
        params = bm.m_step(MeanFieldPosterior.point_mass(z, 2), g)
        assert np.abs(params.pi - fit.pi_hat).max() < 1e-12
        assert np.abs(params.H - fit.H_hat).max() < 1e-12

    @pytest.mark.parametrize("seed", range(6))
    def test_maximizes_theta_at_fixed_q(self, seed):
        rng = bm.derived_rng(seed, 3)
        p_prev = two_block(rho=0.2)
        z, g = bm.sample_graph(p_prev, 15, seed)
        q = MeanFieldPosterior(q=rng.dirichlet(np.ones(2), size=15))
        p_new = bm.m_step(q, g)
        assert bm.elbo(q, p_new, g) >= bm.elbo(q, p_prev, g) - 1e-12

    def test_uniform_q_gives_density(self):
        p = two_block(rho=0.3)
        _, g = bm.sample_graph(p, 20, 1)
        params = bm.m_step(MeanFieldPosterior.uniform(20, 2), g)
        density = g.edge_total / (20 * 19)
        assert np.abs(params.H - density).max() < 1e-12
        assert params.pi == pytest.approx([0.5, 0.5])

    def test_zero_denominator_flagged(self):
        g = bm.Graph.from_edges(3, np.array([[0, 1]]))
        q = MeanFieldPosterior(q=np.array([[1.0, 0], [1.0, 0], [1.0, 0]]))
        with pytest.raises(ValueError):
            # all mass on one block: pi has a zero entry
            bm.m_step(q, g)
        params, flags = bm.m_step(
            MeanFieldPosterior(q=np.array([[0.9, 0.1], [0.9, 0.1], [0.9, 0.1]])),
            g,
            return_flags=True,
        )
        assert not flags.any()


class TestFitVariational:
    def test_recovers_disjoint_cliques(self):
        g = two_cliques(10)
        fit = bm.fit_variational(g, 2, VarConfig(seed=0))
        z_true = np.array([0] * 10 + [1] * 10)
        _, _, ham = bm.align_labels(fit.q.hard_labels(), z_true, 2)
        assert ham == 0
        H = fit.params.H
        assert min(H[0, 0], H[1, 1]) > 0.95
        assert H[0, 1] < 0.05

    def test_monotone_history(self):
        p = two_block(rho=0.15, sep=6.0)
        _, g = bm.sample_graph(p, 60, 2)
        fit = bm.fit_variational(g, 2, VarConfig(seed=1))
        hist = np.array(fit.history)
        assert np.all(np.diff(hist) >= -1e-10)

    def test_elbo_recomputes(self):
        p = two_block(rho=0.15, sep=6.0)
        _, g = bm.sample_graph(p, 50, 5)
        fit = bm.fit_variational(g, 2, VarConfig(seed=2))
        assert bm.elbo(fit.q, fit.params, g) == pytest.approx(fit.elbo, abs=1e-8)

    def test_deterministic(self):
        p = two_block(rho=0.15, sep=6.0)
        _, g = bm.sample_graph(p, 50, 6)
        f1 = bm.fit_variational(g, 2, VarConfig(seed=3))
        f2 = bm.fit_variational(g, 2, VarConfig(seed=3))
        assert f1.elbo == f2.elbo
        assert np.array_equal(f1.q.q, f2.q.q)

    def test_node_relabeling_equivariance(self):
        p = two_block(rho=0.2, sep=6.0)
        _, g = bm.sample_graph(p, 80, 7)
        rng = bm.derived_rng(17)
        perm = rng.permutation(80)
        A2 = g.adjacency[np.ix_(perm, perm)]
        g2 = bm.Graph(n=80, adjacency=A2)
        f1 = bm.fit_variational(g, 2, VarConfig(seed=4))
        f2 = bm.fit_variational(g2, 2, VarConfig(seed=4))
        assert bm.aligned_param_distance(f2.params, f1.params) < 1e-6

    def test_tiny_n_matches_exact_mle(self):
        # n = 12, strong separation: variational and exact marginal optima agree
        theta = bm.planted_partition_params(2, 0.5, 8.0)
        dists = []
        for seed in range(10):
            _, g = bm.sample_graph(theta, 12, (21, seed))
            var = bm.fit_variational(g, 2, VarConfig(seed=(22, seed)))
            exact = bm.exact_gm_mle(g, 2)
            dists.append(bm.aligned_param_distance(var.params, exact.params))
        assert np.median(dists) < 0.05

    def test_theorem3_trend(self):
        # aligned distance between variational and true-label CGM estimates
        # shrinks with n at strong separation
        medians = []
        for n in (200, 400, 800):
            lam = 20.0 * (n / 200) ** 0.3
            theta = bm.planted_partition_params(2, lam / n, 5.0)
            dists = []
            for seed in range(30):
                z, g = bm.sample_graph(theta, n, (31, n, seed))
                var = bm.fit_variational(g, 2, VarConfig(restarts=2, seed=(32, n, seed)))
                cgm = bm.cgm_mle(g, z, 2).to_params()
                dists.append(bm.aligned_param_distance(var.params, cgm))
            medians.append(float(np.median(dists)))
        assert medians[2] < medians[0]
        assert medians[1] < medians[0]


class TestCheckSandwich:
    @pytest.mark.parametrize("seed", range(10))
    def test_random_instances(self, seed):
        from blockmodel.harness import random_interior_params

        rng = bm.derived_rng(seed, 41)
        theta = random_interior_params(2, rng)
        n = int(rng.integers(6, 11))
        z, g = bm.sample_graph(theta, n, rng)
        lower, mid, upper, ok = bm.check_sandwich(z, theta, g)
        assert ok
        assert lower <= mid + 1e-9
        assert mid <= upper + 1e-9

    def test_k1_collapses(self):
        p = bm.ModelParams(K=1, rho=0.4, pi=np.ones(1), S=np.ones((1, 1)))
        z, g = bm.sample_graph(p, 8, 0)
        lower, mid, upper, ok = bm.check_sandwich(z, p, g)
        assert ok
        assert lower == pytest.approx(upper, abs=1e-10)
        assert mid == pytest.approx(upper, abs=1e-10)

    def test_uniform_H_mid_equals_upper(self):
        p = bm.ModelParams.from_pi_H(np.array([0.5, 0.5]), np.full((2, 2), 0.3))
        z, g = bm.sample_graph(p, 9, 4)
        _, mid, upper, ok = bm.check_sandwich(z, p, g)
        assert ok
        assert mid == pytest.approx(upper, abs=1e-9)
