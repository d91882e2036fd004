"""Cluster assignment by weighted k-means over Gramian-factor rows.

The projection mismatch for a fixed weight vector w reduces to a weighted
k-means objective over the rows of W^{-1} F, where F is the (low-rank)
closed-loop Gramian factor and the per-point weights are w_j^2.  This
module provides the Lloyd solver plus the input builders for the
closed-loop design and the two open-loop baselines (coherency clustering
on slow Laplacian eigenvectors, open-loop H2 clustering on the projected
open-loop Gramian).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from ._linalg import dominant_eigvec, psd_sqrt_factor, solve_lyapunov, spectral_abscissa
from .errors import ArgumentError, DegenerateWeightError, InstabilityError
from .lqr import GramianFactor
from .netgen import ClusterPartition, Graph, LtiSystem


@dataclass
class KMeansProblem:
    """Weighted k-means instance: rows of ``data`` with per-row squared weights."""

    data: np.ndarray
    weights: np.ndarray
    r: int
    max_iters: int = 300
    restarts: int = 10
    seed: int | None = None
    init: str = "kmeanspp"

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        n = self.data.shape[0]
        if len(self.weights) != n:
            raise ArgumentError("weights length must match the number of rows")
        if np.any(self.weights <= 0):
            raise ArgumentError("all point weights must be positive")
        if not (1 <= self.r <= n):
            raise ArgumentError("need 1 <= r <= n")
        if self.init not in ("kmeanspp", "random"):
            raise ArgumentError("init must be 'kmeanspp' or 'random'")


@dataclass
class KMeansResult:
    """Best clustering found, with the per-iteration objective of every restart."""

    partition: ClusterPartition
    centroids: np.ndarray
    objective: float
    iters: int
    converged: bool
    history: list[float] = field(default_factory=list)
    histories: list[list[float]] = field(default_factory=list)


def _squared_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(axis=1)[:, None] - 2.0 * X @ C.T + (C * C).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _init_centroids(X, wsq, r, rng, how):
    n = X.shape[0]
    if how == "random":
        return X[rng.choice(n, size=r, replace=False)].copy()
    # weighted k-means++: first seed sampled by weight, the rest by
    # weight times squared distance to the nearest chosen seed
    centers = np.empty((r, X.shape[1]))
    probs = wsq / wsq.sum()
    centers[0] = X[rng.choice(n, p=probs)]
    d2 = _squared_distances(X, centers[:1]).ravel()
    for k in range(1, r):
        scores = wsq * d2
        total = scores.sum()
        if total <= 0:
            centers[k] = X[rng.choice(n, p=probs)]
        else:
            centers[k] = X[rng.choice(n, p=scores / total)]
        d2 = np.minimum(d2, _squared_distances(X, centers[k : k + 1]).ravel())
    return centers


def _repair_empty(labels, X, wsq, centroids, r):
    """Turn the worst-assigned points into singletons for empty clusters."""
    counts = np.bincount(labels, minlength=r)
    moved: set[int] = set()
    for empty in np.flatnonzero(counts == 0):
        d = _squared_distances(X, centroids)
        cost = wsq * d[np.arange(len(labels)), labels]
        order = np.argsort(-cost)
        for j in order:
            if j in moved or counts[labels[j]] <= 1:
                continue
            counts[labels[j]] -= 1
            labels[j] = empty
            counts[empty] = 1
            moved.add(int(j))
            break
    return labels


def _lloyd(X, wsq, r, centroids, max_iters):
    n = X.shape[0]
    labels = np.full(n, -1, dtype=int)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        d = _squared_distances(X, centroids)
        new_labels = d.argmin(axis=1)
        new_labels = _repair_empty(new_labels, X, wsq, centroids, r)
        for i in range(r):
            members = new_labels == i
            wsum = wsq[members].sum()
            centroids[i] = (wsq[members, None] * X[members]).sum(axis=0) / wsum
        d = _squared_distances(X, centroids)
        history.append(float((wsq * d[np.arange(n), new_labels]).sum()))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    return labels, centroids, history, it, converged


def weighted_kmeans(problem: KMeansProblem) -> KMeansResult:
    """Lloyd iteration for the weighted k-means objective, best of several restarts.

    Assignments minimize w_j^2 ||psi_j - c_i||^2 (ties to the lowest
    cluster index), centroids are the weighted block averages, and the
    loop stops when the assignment is unchanged.  Empty clusters are
    repaired by promoting the worst-assigned point to a singleton.
    """
    X, wsq, r = problem.data, problem.weights, problem.r
    seed_seq = np.random.SeedSequence(problem.seed)
    children = seed_seq.spawn(max(problem.restarts, 1))

    best = None
    histories: list[list[float]] = []
    for child in children:
        rng = np.random.default_rng(child)
        centroids = _init_centroids(X, wsq, r, rng, problem.init)
        labels, centroids, history, iters, converged = _lloyd(
            X, wsq, r, centroids.copy(), problem.max_iters
        )
        histories.append(history)
        candidate = (history[-1], labels, centroids, iters, converged, history)
        if best is None or candidate[0] < best[0]:
            best = candidate

    objective, labels, centroids, iters, converged, history = best
    return KMeansResult(
        partition=ClusterPartition.from_labels(labels),
        centroids=centroids,
        objective=float(objective),
        iters=iters,
        converged=converged,
        history=history,
        histories=histories,
    )


def closed_loop_cluster_inputs(
    sys: LtiSystem,
    w: np.ndarray,
    factor: GramianFactor | np.ndarray,
    r: int,
    **kmeans_options,
) -> KMeansProblem:
    """Closed-loop clustering inputs: rows of W^{-1} F weighted by w^2."""
    F = factor.factor if isinstance(factor, GramianFactor) else np.asarray(factor)
    w = np.asarray(w, dtype=float).ravel()
    if len(w) != F.shape[0] or len(w) != sys.n:
        raise ArgumentError("weight length must match the state dimension")
    if np.any(w == 0.0):
        raise DegenerateWeightError("clustering weight vector has a zero entry")
    return KMeansProblem(data=F / w[:, None], weights=w**2, r=r, **kmeans_options)


def coherency_cluster_inputs(graph: Graph, r: int, **kmeans_options) -> KMeansProblem:
    """Coherency clustering inputs: the r slowest Laplacian eigenvectors, unit weights."""
    L = graph.laplacian(weighted=True)
    vals, vecs = np.linalg.eigh(-L)
    data = vecs[:, ::-1][:, :r]
    return KMeansProblem(data=data, weights=np.ones(graph.n_nodes), r=r, **kmeans_options)


def open_loop_h2_cluster_inputs(
    sys: LtiSystem, w: np.ndarray, r: int, **kmeans_options
) -> KMeansProblem:
    """Open-loop H2 clustering inputs from the Gramian on the slow mode's complement.

    The open-loop dynamics are restricted to the orthogonal complement of
    the dominant eigenvector; the restricted controllability Gramian is
    lifted back and its factor rows (divided by the weights) are clustered
    with weights w^2.
    """
    w = np.asarray(w, dtype=float).ravel()
    if np.any(w == 0.0):
        raise DegenerateWeightError("clustering weight vector has a zero entry")
    _, vbar = dominant_eigvec(sys.A)
    v_c = null_space(vbar[None, :])
    A_p = v_c.T @ sys.A @ v_c
    if spectral_abscissa(A_p) >= 0:
        raise InstabilityError("projected open loop is unstable; open-loop H2 data undefined")
    B_p = v_c.T @ sys.B_d
    W_p = solve_lyapunov(A_p, B_p @ B_p.T)
    factor = v_c @ psd_sqrt_factor(W_p)
    return KMeansProblem(data=factor / w[:, None], weights=w**2, r=r, **kmeans_options)
