"""Likelihood modularity, Appendix-style functions, and greedy label search."""

import numpy as np
import pytest

import blockmodel as bm
from blockmodel.exact import _decode
from blockmodel.modularity import F, ProfileSearchConfig, tau


def two_block(rho=0.3, sep=5.0):
    return bm.planted_partition_params(2, rho, sep)


def two_cliques(size):
    n = 2 * size
    edges = [(i, j) for i in range(size) for j in range(i + 1, size)]
    edges += [(i, j) for i in range(size, n) for j in range(i + 1, n)]
    return bm.Graph.from_edges(n, np.array(edges))


class TestTau:
    def test_values(self):
        assert tau(1.0) == pytest.approx(-1.0)
        assert tau(np.e) == pytest.approx(0.0, abs=1e-15)
        assert tau(0.0) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            tau(-0.1)

    def test_vectorized(self):
        out = tau(np.array([0.0, 1.0, np.e]))
        assert out == pytest.approx([0.0, -1.0, 0.0], abs=1e-15)


class TestF:
    def test_k1_reduces_to_tau(self):
        m = 0.37
        assert F(np.array([[m]]), np.array([1.0])) == pytest.approx(
            m * np.log(m) - m
        )

    def test_outer_product_gives_minus_one(self):
        t = np.array([0.2, 0.3, 0.5])
        assert F(np.outer(t, t), t) == pytest.approx(-1.0, abs=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_four_term_oracle(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.uniform(0.01, 1.0, (2, 2))
        t = rng.dirichlet([3, 3])
        direct = sum(
            t[a] * t[b] * (lambda x: x * np.log(x) - x)(M[a, b] / (t[a] * t[b]))
            for a in range(2)
            for b in range(2)
        )
        assert F(M, t) == pytest.approx(direct, abs=1e-14)

    def test_zero_mass_with_positive_M_rejected(self):
        with pytest.raises(ValueError):
            F(np.array([[0.1, 0.1], [0.1, 0.1]]), np.array([1.0, 0.0]))

    def test_zero_mass_with_zero_M_contributes_nothing(self):
        val = F(np.array([[0.2, 0.0], [0.0, 0.0]]), np.array([1.0, 0.0]))
        assert val == pytest.approx(tau(0.2))


class TestModularityQn:
    @pytest.mark.parametrize("seed", range(8))
    def test_equals_profiled_loglik(self, seed):
        p = two_block()
        z, g = bm.sample_graph(p, 20, seed)
        fit = bm.cgm_mle(g, z, 2)
        if fit.empty_block:
            pytest.skip("empty block")
        assert bm.modularity_Qn(g, z, 2) == pytest.approx(fit.loglik, abs=1e-9)

    def test_k1_bernoulli_profile(self):
        p = two_block(rho=0.4)
        z, g = bm.sample_graph(p, 15, 1)
        L = g.edge_total
        pairs = 15 * 14
        density = L / pairs
        expected = 0.5 * (
            L * np.log(density) + (pairs - L) * np.log(1 - density)
        )
        assert bm.modularity_Qn(g, np.zeros(15, dtype=int), 1) == pytest.approx(
            expected, abs=1e-10
        )

    def test_two_cliques_only_label_terms(self):
        g = two_cliques(4)
        z = np.array([0] * 4 + [1] * 4)
        expected = 2 * 4 * np.log(0.5)  # edge terms vanish at 0/1 densities
        assert bm.modularity_Qn(g, z, 2) == pytest.approx(expected, abs=1e-12)


class TestConfusion:
    def test_identity_diagonal(self):
        z = np.array([0, 0, 1, 1, 1])
        R = bm.confusion(z, z, 2).R
        assert np.allclose(R, np.diag([0.4, 0.6]))

    def test_swap_antidiagonal(self):
        z = np.array([0, 0, 1, 1])
        R = bm.confusion(1 - z, z, 2).R
        assert np.allclose(R, [[0.0, 0.5], [0.5, 0.0]])

    def test_hand_instance_quarters(self):
        e = np.array([0, 0, 1, 1])
        c = np.array([0, 1, 0, 1])
        assert np.allclose(bm.confusion(e, c, 2).R, 0.25)

    @pytest.mark.parametrize("seed", range(4))
    def test_column_sums_are_reference_frequencies(self, seed):
        rng = np.random.default_rng(seed)
        e = rng.integers(0, 3, 30)
        c = rng.integers(0, 3, 30)
        R = bm.confusion(e, c, 3).R
        freq = np.bincount(c, minlength=3) / 30
        assert np.allclose(R.sum(axis=0), freq)


class TestConcentrationX:
    def test_centered_at_reference_labeling(self):
        # small H keeps the O(1/n) diagonal self-pair bias below the noise
        theta = bm.planted_partition_params(2, 0.005, 5.0)
        xs = []
        for seed in range(500):
            z, g = bm.sample_graph(theta, 40, (5, seed))
            xs.append(bm.concentration_X(g, z, z, theta))
        xs = np.array(xs)
        mean = xs.mean(axis=0)
        se = xs.std(axis=0, ddof=1) / np.sqrt(len(xs))
        assert np.all(np.abs(mean) <= 4 * se)

    def test_magnitude_scales_as_inverse_sqrt_mu(self):
        mags = []
        rhos = [0.05, 0.1, 0.2, 0.4]
        for rho in rhos:
            theta = bm.planted_partition_params(2, rho, 4.0)
            vals = []
            for seed in range(200):
                z, g = bm.sample_graph(theta, 30, (6, seed))
                vals.append(np.abs(bm.concentration_X(g, z, z, theta)).mean())
            mags.append(np.mean(vals))
        slope = np.polyfit(np.log(rhos), np.log(mags), 1)[0]
        assert abs(slope + 0.5) < 0.15


class TestFMaximizedByTrueClass:
    def test_exhaustive_argmax_at_n12(self):
        theta = two_block(rho=0.3, sep=5.0)
        c = np.array([0] * 6 + [1] * 6)
        best = {tuple(c), tuple(1 - c)}
        labelings = _decode(np.arange(2**12, dtype=np.int64), 12, 2)
        f_true = None
        f_other = -np.inf
        for e in labelings:
            R = bm.confusion(e, c, 2).R
            val = F(R @ theta.S @ R.T, np.bincount(e, minlength=2) / 12)
            if tuple(e) in best:
                f_true = val
            else:
                f_other = max(f_other, val)
        assert f_true > f_other


class TestProfileLabelSearch:
    def test_recovers_disjoint_cliques(self):
        g = two_cliques(8)
        labels, qn = bm.profile_label_search(g, 2)
        z_true = np.array([0] * 8 + [1] * 8)
        _, _, ham = bm.align_labels(labels, z_true, 2)
        assert ham == 0

    def test_matches_exhaustive_optimum(self):
        theta = bm.planted_partition_params(2, 0.5, 8.0)
        labelings = _decode(np.arange(2**10, dtype=np.int64), 10, 2)
        hits = 0
        for seed in range(20):
            _, g = bm.sample_graph(theta, 10, (8, seed))
            _, qn = bm.profile_label_search(
                g, 2, ProfileSearchConfig(restarts=4, seed=seed)
            )
            best = max(bm.modularity_Qn(g, e, 2) for e in labelings)
            if abs(qn - best) < 1e-9:
                hits += 1
        assert hits >= 18

    def test_never_below_initial_labeling(self):
        theta = two_block(rho=0.2, sep=3.0)
        for seed in range(5):
            z, g = bm.sample_graph(theta, 40, (9, seed))
            _, qn = bm.profile_label_search(g, 2, ProfileSearchConfig(seed=seed))
            assert qn >= bm.modularity_Qn(g, z, 2) - 1e-9

    def test_strong_separation_recovery(self):
        theta = bm.planted_partition_params(2, 40 / 300, 5.0)
        failures = 0
        for seed in range(10):
            z, g = bm.sample_graph(theta, 300, (10, seed))
            labels, _ = bm.profile_label_search(
                g, 2, ProfileSearchConfig(restarts=2, seed=seed)
            )
            _, _, ham = bm.align_labels(labels, z, 2)
            failures += ham > 0
        assert failures == 0
