"""File formats: params JSON, graph edge lists, 1-based labels files."""

import json

import numpy as np
import pytest

import blockmodel as bm
from blockmodel import io


def test_params_round_trip(tmp_path):
    p = bm.planted_partition_params(2, 0.05, 4.0)
    path = tmp_path / "p.json"
    io.save_params(p, path)
    q = io.load_params(path)
    assert q.K == p.K
    assert q.rho == pytest.approx(p.rho)
    assert np.allclose(q.S, p.S)


def test_pi_H_form_auto_splits(tmp_path):
    path = tmp_path / "p.json"
    with open(path, "w") as fh:
        json.dump(
            {"pi_H": {"pi": [0.5, 0.5], "H": [[0.08, 0.02], [0.02, 0.08]]}}, fh
        )
    p = io.load_params(path)
    assert p.rho == pytest.approx(0.05)
    assert np.allclose(p.S, [[1.6, 0.4], [0.4, 1.6]])


def test_graph_round_trip(tmp_path):
    g = bm.Graph.from_edges(5, np.array([[0, 1], [1, 4], [2, 3]]))
    path = tmp_path / "g.edges"
    io.write_graph(g, path)
    g2 = io.read_graph(path)
    assert g2.n == 5
    assert np.array_equal(g2.adjacency, g.adjacency)


def test_graph_blank_lines_ignored(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("n 3\n\n0 1\n\n1 2\n\n")
    g = io.read_graph(path)
    assert g.edge_total == 4


def test_graph_bad_header(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("3\n0 1\n")
    with pytest.raises(ValueError):
        io.read_graph(path)


def test_labels_round_trip_one_based(tmp_path):
    z = np.array([0, 1, 1, 0, 2])
    path = tmp_path / "z.txt"
    io.write_labels(z, path)
    assert path.read_text().splitlines() == ["1", "2", "2", "1", "3"]
    assert np.array_equal(io.read_labels(path), z)


def test_labels_zero_rejected(tmp_path):
    path = tmp_path / "z.txt"
    path.write_text("0\n1\n")
    with pytest.raises(ValueError):
        io.read_labels(path)


def test_dc_params_round_trip(tmp_path):
    dc = bm.DcParams(
        U=2, V=2, alpha=np.array([0.5, 0.5]), beta=np.array([0.6, 0.4]),
        gamma=np.array([1.0, 0.5]), G=np.array([[0.8, 0.2], [0.2, 0.7]]),
    )
    path = tmp_path / "dc.json"
    io.save_dc_params(dc, path)
    dc2 = io.load_dc_params(path)
    assert dc2.U == 2 and dc2.V == 2
    assert np.allclose(dc2.gamma, dc.gamma)
    assert np.allclose(dc2.G, dc.G)
