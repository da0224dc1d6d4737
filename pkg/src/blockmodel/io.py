"""File formats: parameter JSON, edge-list graph files, 1-based label files.

Formats:

- Parameter JSON: ``{"K": int, "rho": float, "pi": [...], "S": [[...]]}``.
  The alternative form ``{"pi_H": {"pi": [...], "H": [[...]]}}`` is split
  into (rho, S) automatically.
- Graph file: first line ``n <int>``; each following non-blank line is an
  edge ``i j`` with 0-based node ids and i < j.
- Labels file: one integer per line, 1-based classes.
- Degree-corrected parameter JSON:
  ``{"U": int, "V": int, "alpha": [...], "beta": [...], "gamma": [...], "G": [[...]]}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Graph, ModelParams, split_rho

__all__ = [
    "load_params",
    "save_params",
    "read_graph",
    "write_graph",
    "read_labels",
    "write_labels",
    "load_dc_params",
    "save_dc_params",
]


def load_params(path: str | Path) -> ModelParams:
    with open(path) as fh:
        doc = json.load(fh)
    if "pi_H" in doc:
        inner = doc["pi_H"]
        pi = np.asarray(inner["pi"], dtype=float)
        H = np.asarray(inner["H"], dtype=float)
        rho, S = split_rho(pi, H)
        return ModelParams(K=len(pi), rho=rho, pi=pi, S=S)
    return ModelParams(
        K=int(doc["K"]),
        rho=float(doc["rho"]),
        pi=np.asarray(doc["pi"], dtype=float),
        S=np.asarray(doc["S"], dtype=float),
    )


def save_params(params: ModelParams, path: str | Path) -> None:
    doc = {
        "K": params.K,
        "rho": params.rho,
        "pi": params.pi.tolist(),
        "S": params.S.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_graph(path: str | Path) -> Graph:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("n"):
        raise ValueError(f"{path}: first line must be 'n <int>'")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"{path}: malformed header {lines[0]!r}")
    n = int(header[1])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


def write_graph(graph: Graph, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"n {graph.n}\n")
        for i, j in graph.edge_list():
            fh.write(f"{i} {j}\n")


def read_labels(path: str | Path) -> np.ndarray:
    """Read a 1-based labels file into a 0-based int array."""
    with open(path) as fh:
        vals = [int(ln.strip()) for ln in fh if ln.strip()]
    z = np.asarray(vals, dtype=np.int64)
    if z.size and z.min() < 1:
        raise ValueError(f"{path}: labels must be >= 1 (files are 1-based)")
    return z - 1


def write_labels(labels: np.ndarray, path: str | Path) -> None:
    """Write 0-based in-memory labels as a 1-based labels file."""
    z = np.asarray(labels, dtype=np.int64)
    with open(path, "w") as fh:
        for v in z:
            fh.write(f"{v + 1}\n")


def load_dc_params(path: str | Path):
    from .degree import DcParams

    with open(path) as fh:
        doc = json.load(fh)
    return DcParams(
        U=int(doc["U"]),
        V=int(doc["V"]),
        alpha=np.asarray(doc["alpha"], dtype=float),
        beta=np.asarray(doc["beta"], dtype=float),
        gamma=np.asarray(doc["gamma"], dtype=float),
        G=np.asarray(doc["G"], dtype=float),
    )


def save_dc_params(dc, path: str | Path) -> None:
    doc = {
        "U": dc.U,
        "V": dc.V,
        "alpha": dc.alpha.tolist(),
        "beta": dc.beta.tolist(),
        "gamma": dc.gamma.tolist(),
        "G": dc.G.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
