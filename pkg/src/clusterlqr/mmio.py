"""Matrix Market and JSON persistence for systems, graphs and design artifacts.

Matrices travel as Matrix Market files (array format for dense data,
coordinate format for sparse), partitions as JSON arrays of 1-based index
lists, and generator/experiment parameters as JSON documents.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import ArgumentError, ConfigError
from .lqr import StableEigenbasis
from .netgen import ClusterPartition, Graph, LtiSystem

_SYSTEM_FILES = {"A": "A.mtx", "B": "B.mtx", "B_d": "B_d.mtx", "Q": "Q.mtx", "R": "R.mtx"}


def save_matrix(path: str | Path, M: np.ndarray, sparse: bool = False) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(path), sp.coo_matrix(M) if sparse else np.asarray(M))


def load_matrix(path: str | Path) -> np.ndarray:
    M = scipy.io.mmread(str(path))
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def save_system(directory: str | Path, sys_: LtiSystem) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for attr, fname in _SYSTEM_FILES.items():
        save_matrix(directory / fname, getattr(sys_, attr))


def load_system(directory: str | Path) -> LtiSystem:
    directory = Path(directory)
    mats = {}
    for attr, fname in _SYSTEM_FILES.items():
        path = directory / fname
        if not path.exists():
            raise ConfigError(f"missing system matrix file: {path}")
        mats[attr] = load_matrix(path)
    return LtiSystem(**mats)


def save_graph(directory: str | Path, graph: Graph) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(directory / "adjacency.mtx", graph.adjacency_matrix(), sparse=True)
    save_matrix(directory / "node_weights.mtx", graph.node_weights[:, None])


def load_graph(directory: str | Path) -> Graph:
    directory = Path(directory)
    W = load_matrix(directory / "adjacency.mtx")
    weights = load_matrix(directory / "node_weights.mtx").ravel()
    n = W.shape[0]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if W[i, j] != 0.0:
                edges[(i, j)] = float(W[i, j])
    return Graph(n_nodes=n, edge_weights=edges, node_weights=weights)


def partition_to_lists(partition: ClusterPartition) -> list[list[int]]:
    """1-based index lists, one per cluster."""
    return [[i + 1 for i in cell] for cell in partition.sets]


def partition_from_lists(lists: list[list[int]]) -> ClusterPartition:
    try:
        return ClusterPartition([tuple(int(i) - 1 for i in cell) for cell in lists])
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed partition lists: {exc}") from exc


def save_partition(path: str | Path, partition: ClusterPartition) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(partition_to_lists(partition)))


def load_partition(path: str | Path) -> ClusterPartition:
    return partition_from_lists(json.loads(Path(path).read_text()))


def save_eigenbasis(directory: str | Path, basis: StableEigenbasis) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "eigenvalues": [[lam.real, lam.imag] for lam in basis.eigenvalues],
        "exact": basis.exact,
    }
    (directory / "eigenvalues.json").write_text(json.dumps(meta))
    save_matrix(directory / "Y.mtx", basis.Y)
    save_matrix(directory / "Omega.mtx", basis.Omega)


def load_eigenbasis(directory: str | Path) -> StableEigenbasis:
    directory = Path(directory)
    meta = json.loads((directory / "eigenvalues.json").read_text())
    lam = np.array([complex(re, im) for re, im in meta["eigenvalues"]])
    return StableEigenbasis(
        eigenvalues=lam,
        Y=load_matrix(directory / "Y.mtx"),
        Omega=load_matrix(directory / "Omega.mtx"),
        exact=bool(meta["exact"]),
    )


def are_solution_report(sol) -> dict:
    """JSON-ready summary of a Riccati solution."""
    return {
        "residual_norm": float(sol.residual_norm),
        "spectral_abscissa": float(sol.closed_loop_abscissa),
        "positive_definite": bool(sol.positive_definite),
    }


def certificates_report(certificates) -> list[dict]:
    """JSON-ready list of stability-certificate outcomes with margins."""
    return [
        {
            "kind": c.kind,
            "satisfied": bool(c.satisfied),
            "margin": float(c.margin),
            "details": {k: float(v) for k, v in c.details.items()},
        }
        for c in certificates
    ]


def save_kmeans_problem(directory: str | Path, problem) -> None:
    """Persist a weighted k-means instance (data and weights as Matrix Market)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(directory / "data.mtx", problem.data)
    save_matrix(directory / "weights.mtx", problem.weights[:, None])
    meta = {
        "r": problem.r,
        "max_iters": problem.max_iters,
        "restarts": problem.restarts,
        "seed": problem.seed,
        "init": problem.init,
    }
    (directory / "problem.json").write_text(json.dumps(meta, indent=2))


def load_kmeans_problem(directory: str | Path):
    from .cluster_design import KMeansProblem

    directory = Path(directory)
    meta = json.loads((directory / "problem.json").read_text())
    return KMeansProblem(
        data=load_matrix(directory / "data.mtx"),
        weights=load_matrix(directory / "weights.mtx").ravel(),
        **meta,
    )


def kmeans_result_report(result) -> dict:
    """JSON-ready summary of a clustering result (partition in 1-based lists)."""
    return {
        "partition": partition_to_lists(result.partition),
        "objective": float(result.objective),
        "iters": int(result.iters),
        "converged": bool(result.converged),
        "centroids": np.asarray(result.centroids).tolist(),
    }


def generator_params_from_json(doc: dict) -> dict:
    """Validated keyword arguments for the consensus generator.

    Accepted keys: n, r_spatial, p_intra, ratio, weight_lo, weight_hi,
    seed, b_d_columns (1-based identity columns for the disturbance map).
    """
    known = {"n", "r_spatial", "p_intra", "ratio", "weight_lo", "weight_hi", "seed", "b_d_columns"}
    unknown = set(doc) - known - {"weight_range"}  # normalized form is accepted back
    if unknown:
        raise ConfigError(f"unknown generator parameter(s): {sorted(unknown)}")
    if "n" not in doc:
        raise ConfigError("generator parameters need at least 'n'")
    if "weight_range" in doc:
        lo, hi = doc["weight_range"]
    else:
        lo, hi = doc.get("weight_lo", 1.0), doc.get("weight_hi", 2.0)
    return {
        "n": int(doc["n"]),
        "r_spatial": int(doc.get("r_spatial", 1)),
        "p_intra": float(doc.get("p_intra", 0.5)),
        "ratio": float(doc.get("ratio", 1.0)),
        "weight_range": (float(lo), float(hi)),
        "seed": doc.get("seed"),
        "b_d_columns": doc.get("b_d_columns"),
    }
