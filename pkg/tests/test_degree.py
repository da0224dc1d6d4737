"""Degree-corrected UV-class submodel: mapping, counts, constrained fitting."""

import numpy as np
import pytest

import blockmodel as bm
from blockmodel.degree import DcFitConfig, DcParams, _DcSpace
from blockmodel.varem import VarConfig


def example_dc(U=2, V=2):
    return DcParams(
        U=U, V=V,
        alpha=np.full(U, 1.0 / U),
        beta=np.array([0.6, 0.4]) if V == 2 else np.full(V, 1.0 / V),
        gamma=np.array([1.0, 0.5]) if V == 2 else np.ones(V),
        G=np.array([[0.8, 0.2], [0.2, 0.7]]) if U == 2 else np.full((U, U), 0.5),
    )


class TestParamCount:
    def test_paper_formula_values(self):
        assert bm.dc_param_count(2, 2) == 7
        assert bm.dc_param_count(1, 1) == 2
        assert bm.dc_param_count(3, 2) == 11


class TestMapping:
    def test_v1_reduces_to_plain_blockmodel(self):
        dc = DcParams(
            U=3, V=1, alpha=np.array([0.5, 0.3, 0.2]), beta=np.ones(1),
            gamma=np.ones(1),
            G=np.array([[0.7, 0.2, 0.1], [0.2, 0.6, 0.1], [0.1, 0.1, 0.5]]),
        )
        params = bm.dc_to_blockmodel(dc)
        assert params.K == 3
        assert np.allclose(params.pi, dc.alpha)
        assert np.allclose(params.H, dc.G)

    def test_u1_rank_one_structure(self):
        dc = DcParams(
            U=1, V=3, alpha=np.ones(1), beta=np.array([0.5, 0.3, 0.2]),
            gamma=np.array([1.0, 0.7, 0.4]), G=np.array([[0.9]]),
        )
        params = bm.dc_to_blockmodel(dc)
        expected = 0.9 * np.outer(dc.gamma, dc.gamma)
        assert np.allclose(params.H, expected)

    def test_hand_instance_all_entries(self):
        dc = example_dc()
        params = bm.dc_to_blockmodel(dc)
        for u in range(2):
            for v in range(2):
                assert params.pi[u * 2 + v] == pytest.approx(
                    dc.alpha[u] * dc.beta[v]
                )
                for u2 in range(2):
                    for v2 in range(2):
                        expected = dc.gamma[v] * dc.gamma[v2] * dc.G[u, u2]
                        assert params.H[u * 2 + v, u2 * 2 + v2] == pytest.approx(
                            expected
                        )

    def test_mapped_params_satisfy_invariants(self):
        params = bm.dc_to_blockmodel(example_dc())
        assert abs(params.pi @ params.S @ params.pi - 1.0) < 1e-10
        assert np.all(params.H >= 0) and np.all(params.H <= 1)

    def test_scale_direction_is_null(self):
        dc = DcParams(
            U=2, V=2, alpha=np.array([0.5, 0.5]), beta=np.array([0.6, 0.4]),
            gamma=np.array([0.8, 0.4]), G=np.array([[0.6, 0.2], [0.2, 0.5]]),
        )
        c = 1.25
        scaled = DcParams(
            U=2, V=2, alpha=dc.alpha, beta=dc.beta,
            gamma=c * dc.gamma, G=dc.G / (c * c),
        )
        a = bm.dc_to_blockmodel(dc)
        b = bm.dc_to_blockmodel(scaled)
        assert np.abs(a.H - b.H).max() < 1e-15
        assert np.abs(a.pi - b.pi).max() < 1e-15

    def test_jacobian_rank_counts_free_directions(self):
        # simplex-tangent directions minus the one scale redundancy
        dc = example_dc()
        space = _DcSpace(2, 2, DcFitConfig())
        x0 = space.pack(dc)

        def mapped(x):
            pi, H = space.unpack(x)
            return np.concatenate([pi, H[np.triu_indices(4)]])

        directions = []
        # alpha and beta tangents
        directions.append(np.concatenate([[1, -1], np.zeros(7)]))
        directions.append(np.concatenate([np.zeros(2), [1, -1], np.zeros(5)]))
        # gamma and G coordinates
        for j in range(4, 9):
            e = np.zeros(9)
            e[j] = 1.0
            directions.append(e)
        h = 1e-6
        cols = [(mapped(x0 + h * d) - mapped(x0 - h * d)) / (2 * h) for d in directions]
        J = np.column_stack(cols)
        assert np.all(np.isfinite(J))
        rank = np.linalg.matrix_rank(J, tol=1e-8)
        assert rank == bm.dc_param_count(2, 2) - 1  # scale direction is null

    def test_canonicalize_normalizes_scale_and_order(self):
        dc = DcParams(
            U=2, V=2, alpha=np.array([0.5, 0.5]), beta=np.array([0.3, 0.7]),
            gamma=np.array([0.4, 0.8]), G=np.array([[0.5, 0.1], [0.1, 0.4]]),
        )
        canon = bm.canonicalize_dc(dc)
        assert canon.gamma.max() == pytest.approx(1.0)
        assert np.all(np.diff(canon.gamma) <= 1e-15)
        a = bm.dc_to_blockmodel(dc)
        b = bm.dc_to_blockmodel(canon)
        assert bm.aligned_param_distance(b, a) < 1e-12


class TestFitSubmodel:
    def test_nested_objective_bounded_by_unrestricted(self):
        theta = bm.planted_partition_params(2, 0.2, 5.0)
        _, g = bm.sample_graph(theta, 80, 1)
        fit = bm.fit_submodel(g, 2, 1, DcFitConfig(seed=2, restarts=2))
        unrestricted = bm.m_step(fit.q, g)
        assert bm.elbo(fit.q, fit.params, g) <= bm.elbo(fit.q, unrestricted, g) + 1e-9

    def test_history_monotone(self):
        theta = bm.planted_partition_params(2, 0.2, 5.0)
        _, g = bm.sample_graph(theta, 60, 3)
        fit = bm.fit_submodel(g, 2, 1, DcFitConfig(seed=4, restarts=2))
        hist = np.array(fit.history)
        assert np.all(np.diff(hist) >= -1e-8)

    def test_v1_data_recovers_plain_fit(self):
        theta = bm.planted_partition_params(2, 30 / 600, 5.0)
        dists = []
        gammas = []
        for seed in range(10):
            _, g = bm.sample_graph(theta, 600, (51, seed))
            dc_fit = bm.fit_submodel(
                g, 2, 1, DcFitConfig(seed=(52, seed), restarts=2)
            )
            plain = bm.fit_variational(g, 2, VarConfig(seed=(53, seed), restarts=2))
            dists.append(bm.aligned_param_distance(dc_fit.params, plain.params))
            gammas.append(dc_fit.dc.gamma[0])
        assert np.median(dists) < 0.05
        assert np.allclose(gammas, 1.0)

    def test_fix_alpha_variant(self):
        theta = bm.planted_partition_params(2, 0.2, 5.0)
        _, g = bm.sample_graph(theta, 60, 5)
        fixed = np.array([0.5, 0.5])
        fit = bm.fit_submodel(
            g, 2, 1, DcFitConfig(seed=6, restarts=2, fix_alpha=fixed)
        )
        assert np.allclose(fit.dc.alpha, fixed)

    def test_deterministic(self):
        theta = bm.planted_partition_params(2, 0.2, 5.0)
        _, g = bm.sample_graph(theta, 50, 7)
        f1 = bm.fit_submodel(g, 2, 1, DcFitConfig(seed=8, restarts=2))
        f2 = bm.fit_submodel(g, 2, 1, DcFitConfig(seed=8, restarts=2))
        assert f1.elbo == f2.elbo
        assert np.array_equal(f1.dc.gamma, f2.dc.gamma)
