"""Independent reference computations used to check the main code paths.

Every oracle here deliberately avoids the implementation route it checks:
the Riccati oracle is a Newton iteration over Bartels-Stewart Lyapunov
solves (the library solves through the Hamiltonian eigenproblem), the
Lyapunov oracle is a vectorized Kronecker linear solve, the norm oracles
integrate or sweep the frequency response directly, and the k-means
oracle enumerates set partitions.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla


def newton_kleinman_are(A, G, Q, X0=None, iters=100, tol=1e-14):
    """Kleinman iteration for the stabilizing Riccati solution.

    Needs a stabilizing start: X0 = 0 works when A is Hurwitz, otherwise
    pass any X0 with A - G X0 Hurwitz.
    """
    n = A.shape[0]
    X = np.zeros((n, n)) if X0 is None else np.asarray(X0, dtype=float)
    assert np.max(np.linalg.eigvals(A - G @ X).real) < 0, "need a stabilizing start"
    for _ in range(iters):
        A_k = A - G @ X
        X_new = sla.solve_continuous_lyapunov(A_k.T, -(Q + X @ G @ X))
        X_new = (X_new + X_new.T) / 2
        if np.linalg.norm(X_new - X) <= tol * max(1.0, np.linalg.norm(X_new)):
            return X_new
        X = X_new
    return X


def lyapunov_kron(A, W):
    """Solve A X + X A^T + W = 0 through the n^2 x n^2 Kronecker system."""
    n = A.shape[0]
    L = np.kron(np.eye(n), A) + np.kron(A, np.eye(n))
    x = np.linalg.solve(L, -np.asarray(W, dtype=float).reshape(n * n, order="F"))
    X = x.reshape(n, n, order="F")
    return (X + X.T) / 2


def _fro_sq_response(A, B, C, w):
    n = A.shape[0]
    M = np.linalg.solve(1j * w * np.eye(n) - A, B)
    if C is not None:
        M = C @ M
    return float(np.sum(np.abs(M) ** 2))


def h2_quadrature(A, B, C=None, w_lo=1e-4, w_hi=1e4, rel_stop=1e-4):
    """H2 norm by trapezoidal integration of the frequency response on a log grid.

    The grid is refined (points per decade doubled) until the value is
    stable; small analytic head/tail corrections cover (0, w_lo) and
    (w_hi, inf).
    """
    decades = np.log10(w_hi / w_lo)
    CB = B if C is None else C @ B
    tail = float(np.sum(CB**2)) / w_hi
    head = _fro_sq_response(A, B, C, 0.0) * w_lo
    prev = None
    pts = 64
    for _ in range(8):
        grid = np.logspace(np.log10(w_lo), np.log10(w_hi), int(pts * decades))
        vals = np.array([_fro_sq_response(A, B, C, w) for w in grid])
        integral = np.trapezoid(vals, grid) + tail + head
        value = np.sqrt(integral / np.pi)
        if prev is not None and abs(value - prev) <= rel_stop * prev:
            return value
        prev = value
        pts *= 2
    return prev


def hinf_sweep(A, B, C=None, w_lo=1e-3, w_hi=1e3, n_pts=2000, zooms=3):
    """Hinf norm by a dense frequency sweep with iterative zoom around the peak."""
    n = A.shape[0]
    C_eff = np.eye(n) if C is None else C

    def smax(w):
        M = np.linalg.solve(1j * w * np.eye(n) - A, B)
        return float(np.linalg.svd(C_eff @ M, compute_uv=False)[0])

    grid = np.concatenate([[0.0], np.logspace(np.log10(w_lo), np.log10(w_hi), n_pts)])
    vals = np.array([smax(w) for w in grid])
    best_w, best = grid[np.argmax(vals)], float(vals.max())
    span = best_w if best_w > 0 else w_lo
    for _ in range(zooms):
        lo, hi = max(best_w - span / 2, 0.0), best_w + span / 2
        grid = np.linspace(lo, hi, 400)
        vals = np.array([smax(w) for w in grid])
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_w = float(vals[k]), grid[k]
        span /= 10
    return best


def iter_set_partitions(n, r):
    """All partitions of range(n) into exactly r non-empty unlabeled blocks."""
    codes = np.zeros(n, dtype=int)

    def rec(i, n_blocks):
        if i == n:
            if n_blocks == r:
                yield codes.copy()
            return
        # pruning: remaining items must be able to open the missing blocks
        if n_blocks + (n - i) < r:
            return
        for b in range(min(n_blocks + 1, r)):
            codes[i] = b
            yield from rec(i + 1, max(n_blocks, b + 1))

    yield from rec(0, 0)


def weighted_sse(X, wsq, labels, r):
    total = 0.0
    for b in range(r):
        members = labels == b
        if not members.any():
            return np.inf
        c = (wsq[members, None] * X[members]).sum(axis=0) / wsq[members].sum()
        total += float((wsq[members, None] * (X[members] - c) ** 2).sum())
    return total


def exhaustive_weighted_kmeans(X, wsq, r):
    """Global minimum of the weighted k-means objective by full enumeration."""
    best = np.inf
    best_labels = None
    for labels in iter_set_partitions(X.shape[0], r):
        val = weighted_sse(X, wsq, labels, r)
        if val < best:
            best, best_labels = val, labels
    return best, best_labels


def expm_gramian_quadrature(A, B, t_max, n_pts=4000):
    """Controllability Gramian by trapezoidal time-domain integration of e^{At} B."""
    ts = np.linspace(0.0, t_max, n_pts)
    vals = np.empty((n_pts, A.shape[0], A.shape[0]))
    for k, t in enumerate(ts):
        E = sla.expm(A * t) @ B
        vals[k] = E @ E.T
    return np.trapezoid(vals, ts, axis=0)


def sphere_max_quartic(fn, dim, rng, n_samples=100_000):
    """Best value of a function over random unit vectors (optimality probe)."""
    V = rng.standard_normal((n_samples, dim))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return max(fn(v) for v in V)
