"""Networked LTI test systems.

Generates weighted consensus networks over random graphs with planted
spatial clusters, wraps them as LTI systems with LQR weights, and provides
the structural checks used before controller synthesis (PBH tests, almost
equitable partitions).

The consensus state matrix is built from the edge-weighted graph Laplacian
L and the diagonal node-weight matrix M as A = -M^{-1/2} L M^{-1/2}, which
is symmetric negative semidefinite with a single zero eigenvalue whose
eigenvector is M^{1/2} 1 / sqrt(tr M).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._linalg import is_symmetric, rank_threshold, sym
from .errors import ArgumentError, GenerationError

_CONNECTIVITY_ATTEMPTS = 100


@dataclass
class Graph:
    """Undirected weighted graph without self-loops or multi-edges.

    ``edge_weights`` maps node pairs (i, j) with i < j to positive weights;
    ``node_weights`` holds the positive per-node weights m_i.
    """

    n_nodes: int
    edge_weights: dict[tuple[int, int], float]
    node_weights: np.ndarray

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ArgumentError("graph needs at least one node")
        self.node_weights = np.asarray(self.node_weights, dtype=float)
        if self.node_weights.shape != (self.n_nodes,):
            raise ArgumentError("node_weights length must equal n_nodes")
        if np.any(self.node_weights <= 0):
            raise ArgumentError("node weights must be positive")
        canon = {}
        for (i, j), w in self.edge_weights.items():
            if i == j:
                raise ArgumentError(f"self-loop at node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ArgumentError(f"edge ({i},{j}) out of range")
            key = (min(i, j), max(i, j))
            if key in canon:
                raise ArgumentError(f"duplicate edge {key}")
            if w <= 0:
                raise ArgumentError(f"edge weight for {key} must be positive")
            canon[key] = float(w)
        self.edge_weights = canon
        if not self.is_connected():
            raise ArgumentError("graph must be connected")

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.edge_weights)

    def adjacency_matrix(self, weighted: bool = True) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes))
        for (i, j), w in self.edge_weights.items():
            A[i, j] = A[j, i] = w if weighted else 1.0
        return A

    def laplacian(self, weighted: bool = True) -> np.ndarray:
        """Positive-semidefinite graph Laplacian D - W."""
        W = self.adjacency_matrix(weighted)
        return np.diag(W.sum(axis=1)) - W

    def is_connected(self) -> bool:
        if self.n_nodes == 1:
            return True
        rows, cols = [], []
        for i, j in self.edge_weights:
            rows += [i, j]
            cols += [j, i]
        adj = sp.coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.n_nodes, self.n_nodes)
        )
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1


@dataclass
class LtiSystem:
    """LTI plant dx = A x + B u + B_d d with LQR weights Q, R."""

    A: np.ndarray
    B: np.ndarray
    B_d: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.B_d = np.atleast_2d(np.asarray(self.B_d, dtype=float))
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ArgumentError("A must be square")
        if self.B.shape[0] != n or self.B_d.shape[0] != n:
            raise ArgumentError("B and B_d must have n rows")
        m = self.B.shape[1]
        if self.Q.shape != (n, n):
            raise ArgumentError("Q must be n x n")
        if self.R.shape != (m, m):
            raise ArgumentError("R must be m x m")
        if not is_symmetric(self.Q):
            raise ArgumentError("Q must be symmetric")
        if not is_symmetric(self.R):
            raise ArgumentError("R must be symmetric")
        self.Q = sym(self.Q)
        self.R = sym(self.R)
        wq = np.linalg.eigvalsh(self.Q)
        if wq[0] < -1e-10 * max(1.0, wq[-1]):
            raise ArgumentError("Q must be positive semidefinite")
        wr = np.linalg.eigvalsh(self.R)
        if wr[0] <= 0:
            raise ArgumentError("R must be positive definite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def n_b(self) -> int:
        return self.B_d.shape[1]

    @cached_property
    def G(self) -> np.ndarray:
        """Input coupling B R^{-1} B^T."""
        return sym(self.B @ np.linalg.solve(self.R, self.B.T))


@dataclass
class ClusterPartition:
    """Partition of the state indices {0, ..., n-1} into non-empty disjoint sets."""

    sets: list[tuple[int, ...]]

    def __post_init__(self):
        sets = [tuple(sorted(int(i) for i in s)) for s in self.sets]
        if not sets or any(len(s) == 0 for s in sets):
            raise ArgumentError("every cluster must be non-empty")
        flat = [i for s in sets for i in s]
        if len(set(flat)) != len(flat):
            raise ArgumentError("clusters must be pairwise disjoint")
        if set(flat) != set(range(len(flat))):
            raise ArgumentError("clusters must cover exactly the index range 0..n-1")
        self.sets = sets

    @property
    def r(self) -> int:
        return len(self.sets)

    @property
    def n(self) -> int:
        return sum(len(s) for s in self.sets)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "ClusterPartition":
        labels = np.asarray(labels, dtype=int)
        uniq = np.unique(labels)
        return cls([tuple(np.flatnonzero(labels == u)) for u in uniq])

    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for k, s in enumerate(self.sets):
            out[list(s)] = k
        return out

    def singletons(self) -> bool:
        return all(len(s) == 1 for s in self.sets)


@dataclass
class PbhReport:
    """Outcome of the PBH eigenvector tests for one plant."""

    stabilizable: bool
    detectable: bool
    controllable_from_Bd: bool
    margins: dict[str, float] = field(default_factory=dict)


def consensus_mode(graph: Graph) -> np.ndarray:
    """Unit null vector M^{1/2} 1 / sqrt(tr M) of the consensus state matrix."""
    m = graph.node_weights
    return np.sqrt(m) / np.sqrt(m.sum())


def consensus_system(
    graph: Graph,
    b_d_columns: Sequence[int] | None = None,
    q: np.ndarray | float | None = None,
    r: np.ndarray | float | None = None,
) -> LtiSystem:
    """Consensus LTI system A = -M^{-1/2} L M^{-1/2} with B = I.

    ``b_d_columns`` selects 1-based columns of the identity as the
    disturbance input map (defaults to all of them).  ``q``/``r`` may be
    scalars (scaled identities) or full matrices; both default to I.
    """
    n = graph.n_nodes
    invsq = 1.0 / np.sqrt(graph.node_weights)
    A = -(invsq[:, None] * graph.laplacian() * invsq[None, :])
    A = sym(A)
    B = np.eye(n)
    if b_d_columns is None:
        B_d = np.eye(n)
    else:
        cols = [int(c) - 1 for c in b_d_columns]
        if any(c < 0 or c >= n for c in cols):
            raise ArgumentError("b_d_columns out of range (columns are 1-based)")
        B_d = np.eye(n)[:, cols]
    Q = np.eye(n) * float(q) if np.isscalar(q) else (np.eye(n) if q is None else np.asarray(q))
    R = np.eye(n) * float(r) if np.isscalar(r) else (np.eye(n) if r is None else np.asarray(r))
    return LtiSystem(A=A, B=B, B_d=B_d, Q=Q, R=R)


def generate_clustered_graph(
    n: int,
    r_spatial: int,
    p_intra: float,
    ratio: float,
    weight_range: tuple[float, float] = (1.0, 2.0),
    seed: int | None = None,
) -> tuple[Graph, ClusterPartition]:
    """Random connected graph with ``r_spatial`` planted clusters.

    Nodes are split evenly into groups; intra-group edges appear with
    probability ``p_intra`` and inter-group edges with probability
    ``p_intra / ratio``, so ``ratio`` controls the expected intra/inter
    edge-count proportion.  Node weights are uniform in ``weight_range``.
    Edge draws are repeated (fresh randomness, bounded attempts) until the
    graph is connected.
    """
    if not (1 <= r_spatial <= n):
        raise ArgumentError("need n >= r_spatial >= 1")
    if not (0 < p_intra <= 1):
        raise ArgumentError("p_intra must lie in (0, 1]")
    if ratio < 1:
        raise ArgumentError("ratio must be >= 1")
    lo, hi = float(weight_range[0]), float(weight_range[1])
    if not (0 < lo <= hi):
        raise ArgumentError("weight_range must satisfy 0 < lo <= hi")

    rng = np.random.default_rng(seed)
    group = np.zeros(n, dtype=int)
    for g, idx in enumerate(np.array_split(np.arange(n), r_spatial)):
        group[idx] = g
    iu, ju = np.triu_indices(n, 1)
    p_edge = np.where(group[iu] == group[ju], p_intra, p_intra / ratio)

    for _ in range(_CONNECTIVITY_ATTEMPTS):
        drawn = rng.random(len(iu)) < p_edge
        edges = {(int(a), int(b)): 1.0 for a, b in zip(iu[drawn], ju[drawn])}
        weights = rng.uniform(lo, hi, size=n)
        try:
            graph = Graph(n_nodes=n, edge_weights=edges, node_weights=weights)
        except ArgumentError:
            continue
        partition = ClusterPartition.from_labels(group)
        return graph, partition
    raise GenerationError(
        f"no connected graph in {_CONNECTIVITY_ATTEMPTS} attempts "
        f"(n={n}, p_intra={p_intra}, ratio={ratio})"
    )


def generate_clustered_consensus(
    n: int,
    r_spatial: int,
    p_intra: float,
    ratio: float,
    weight_range: tuple[float, float] = (1.0, 2.0),
    seed: int | None = None,
    b_d_columns: Sequence[int] | None = None,
) -> tuple[Graph, LtiSystem]:
    """Random planted-cluster consensus network wrapped as an LTI system."""
    graph, _ = generate_clustered_graph(n, r_spatial, p_intra, ratio, weight_range, seed)
    return graph, consensus_system(graph, b_d_columns=b_d_columns)


def is_almost_equitable(graph: Graph, partition: ClusterPartition, rtol: float = 1e-9) -> bool:
    """Whether every node of one cell has equal aggregate edge weight into each other cell."""
    if partition.n != graph.n_nodes:
        raise ArgumentError("partition does not match the graph's node count")
    W = graph.adjacency_matrix()
    scale = max(1.0, float(W.max(initial=0.0)) * graph.n_nodes)
    for k, cell_k in enumerate(partition.sets):
        for l, cell_l in enumerate(partition.sets):
            if k == l:
                continue
            into_l = W[np.ix_(cell_k, cell_l)].sum(axis=1)
            if np.ptp(into_l) > rtol * scale:
                return False
    return True


def _pbh_margin(A: np.ndarray, B_in: np.ndarray, eigvals: np.ndarray) -> float:
    """Smallest PBH singular-value margin of [A - lambda I, B_in] over ``eigvals``.

    Returns +inf when no eigenvalue is tested.  A margin <= 0 means the
    rank test failed (relative to the max(n,m)*eps*sigma_max cutoff).
    """
    n = A.shape[0]
    margin = np.inf
    for lam in eigvals:
        M = np.hstack([A - lam * np.eye(n), B_in]).astype(complex)
        svals = np.linalg.svd(M, compute_uv=False)
        margin = min(margin, float(svals[-1] - rank_threshold(svals, *M.shape)))
    return margin


def pbh_stabilizable(A: np.ndarray, B_in: np.ndarray, real_tol: float = 1e-9) -> tuple[bool, float]:
    """PBH stabilizability test of the pair (A, B_in).

    Tests rank [A - lambda I, B_in] = n at every eigenvalue of A with
    nonnegative real part (up to a small tolerance, so marginal modes such
    as consensus zeros are included).
    """
    eigvals = np.linalg.eigvals(A)
    scale = max(1.0, float(np.abs(eigvals).max(initial=0.0)))
    tested = eigvals[eigvals.real >= -real_tol * scale]
    margin = _pbh_margin(A, B_in, tested)
    return margin > 0, margin


def pbh_controllable(A: np.ndarray, B_in: np.ndarray) -> tuple[bool, float]:
    """PBH controllability test (rank condition at every eigenvalue)."""
    margin = _pbh_margin(A, B_in, np.linalg.eigvals(A))
    return margin > 0, margin


def pbh_checks(sys: LtiSystem) -> PbhReport:
    """PBH tests backing the standing synthesis assumptions.

    Checks that (A, B R^{-1/2}) is stabilizable, (Q^{T/2}, A) is detectable
    and (A, B_d) is controllable.
    """
    wr, Vr = np.linalg.eigh(sym(sys.R))
    B_r = sys.B @ (Vr * (1.0 / np.sqrt(wr))) @ Vr.T
    stab, m_stab = pbh_stabilizable(sys.A, B_r)
    wq, Vq = np.linalg.eigh(sym(sys.Q))
    Q_half = (Vq * np.sqrt(np.clip(wq, 0.0, None))) @ Vq.T
    det, m_det = pbh_stabilizable(sys.A.T, Q_half)
    ctrl, m_ctrl = pbh_controllable(sys.A, sys.B_d)
    return PbhReport(
        stabilizable=stab,
        detectable=det,
        controllable_from_Bd=ctrl,
        margins={"stabilizable": m_stab, "detectable": m_det, "controllable_from_Bd": m_ctrl},
    )
