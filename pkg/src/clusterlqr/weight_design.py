"""Per-cluster projection weight design.

With the clusters fixed, minimizing the projection mismatch over the
weights decouples into one problem per cluster.  For a stable plant each
cluster's optimal unit weight block is the dominant eigenvector of its
Gramian sub-block.  When the plant has modes with nonnegative real part,
a penalty keeps the weights coupled to those modes; the per-cluster
problem becomes maximizing a quartic form on the unit sphere, solved by
power iteration on the super-symmetrized fourth-order tensor.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from ._linalg import sign_normalize, sym
from .cluster_design import closed_loop_cluster_inputs, weighted_kmeans
from .errors import ArgumentError, IterationFaultError
from .lqr import GramianFactor
from .netgen import ClusterPartition, LtiSystem
from .projection import ProjectionMatrix, build_projection, projection_mismatch

_OBJ_FLOOR = 1e-14


@dataclass
class WeightDesignConfig:
    """Penalized weight-design parameters.

    ``rho`` is the penalty factor; with ``normalize_rho`` it is multiplied
    by ||Phi_kappa||_2 / (v^T Q v) (v the leading penalized mode) so the
    two objective terms share a scale.  ``delta`` is the relative
    improvement below which the power iteration stops.  Clusters larger
    than ``dense_cluster_cap`` use a matrix-free iteration instead of
    materializing the n_i^2 x n_i^2 unfolding.
    """

    rho: float = 0.01
    delta: float = 1e-6
    max_iters: int = 200
    normalize_rho: bool = True
    dense_cluster_cap: int = 150

    def __post_init__(self):
        if self.rho <= 0:
            raise ArgumentError("rho must be positive")
        if self.delta <= 0:
            raise ArgumentError("delta must be positive")


@dataclass
class UnstableModes:
    """Real basis of the eigenvectors of A with nonnegative real part."""

    values: np.ndarray
    V_bar: np.ndarray

    def __post_init__(self):
        self.V_bar = np.atleast_2d(np.asarray(self.V_bar, dtype=float))
        for k in range(self.n_v):
            norm = np.linalg.norm(self.V_bar[:, k])
            if norm > 0:
                self.V_bar[:, k] /= norm

    @property
    def n_v(self) -> int:
        return self.V_bar.shape[1]

    @property
    def S(self) -> np.ndarray:
        return self.V_bar @ self.V_bar.T

    @classmethod
    def from_state_matrix(cls, A: np.ndarray, rtol: float = 1e-9) -> "UnstableModes":
        n = A.shape[0]
        if np.abs(A - A.T).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(A).max(initial=0.0)):
            vals, vecs = np.linalg.eigh(sym(A))
            scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
            keep = vals >= -rtol * scale
            return cls(values=vals[keep].astype(complex), V_bar=vecs[:, keep])
        vals, vecs = np.linalg.eig(A)
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        keep = np.flatnonzero(vals.real >= -rtol * scale)
        cols: list[np.ndarray] = []
        out_vals: list[complex] = []
        seen: set[int] = set()
        for k in keep:
            if k in seen:
                continue
            lam, v = vals[k], vecs[:, k]
            if abs(lam.imag) <= rtol * max(1.0, abs(lam)):
                j = int(np.argmax(np.abs(v)))
                cols.append((v / (v[j] / abs(v[j]))).real)
                out_vals.append(complex(lam.real))
                seen.add(int(k))
            else:
                partner = min(
                    (j for j in keep if j not in seen and j != k),
                    key=lambda j: abs(vals[j] - np.conj(lam)),
                    default=None,
                )
                # real span of the conjugate pair
                block, _ = np.linalg.qr(np.column_stack([v.real, v.imag]))
                cols += [block[:, 0], block[:, 1]]
                out_vals += [lam, np.conj(lam)]
                seen.add(int(k))
                if partner is not None:
                    seen.add(int(partner))
        V = np.column_stack(cols) if cols else np.zeros((n, 0))
        return cls(values=np.array(out_vals, dtype=complex), V_bar=V)


def stable_weight_design(
    partition: ClusterPartition,
    factor: GramianFactor | np.ndarray,
    full_output: bool = False,
):
    """Per-cluster dominant eigenvector of the Gramian sub-block, unit blocks.

    Globally optimal for the mismatch minimization at fixed clusters when
    no unstable-mode penalty is needed.  Warns when a cluster's top
    eigenvalue is (numerically) repeated, in which case any eigenvector of
    the leading eigenspace is returned.  With ``full_output`` also returns
    a report with the per-cluster objective values.
    """
    F = factor.factor if isinstance(factor, GramianFactor) else np.asarray(factor)
    w = np.zeros(partition.n)
    clusters = []
    for i, cell in enumerate(partition.sets):
        idx = list(cell)
        block = F[idx] @ F[idx].T
        vals, vecs = np.linalg.eigh(sym(block))
        if len(vals) > 1 and vals[-1] - vals[-2] <= 1e-10 * max(1.0, vals[-1]):
            warnings.warn(
                f"cluster {i}: repeated dominant Gramian eigenvalue; weight direction is degenerate",
                RuntimeWarning,
                stacklevel=2,
            )
        w[idx] = sign_normalize(vecs[:, -1])
        clusters.append({"size": len(idx), "objective": float(vals[-1]), "iterations": 0})
    if full_output:
        return w, {"clusters": clusters}
    return w


@dataclass
class SymmetricTensorUnfolding:
    """Matrix unfolding F_s of the super-symmetrized quartic tensor of one cluster."""

    F_s: np.ndarray
    n_i: int

    def quartic(self, w: np.ndarray) -> float:
        ww = np.kron(w, w)
        return float(ww @ self.F_s @ ww)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """One power-iteration map: unvec(F_s (v kron v)) v."""
        z = self.F_s @ np.kron(v, v)
        Z = z.reshape(self.n_i, self.n_i, order="F")
        return Z @ v

    def init_vector(self) -> np.ndarray:
        """Dominant eigenvector of the matricized dominant eigenvector of F_s."""
        vals, vecs = np.linalg.eigh(sym(self.F_s))
        y = sign_normalize(vecs[:, -1])
        M = sym(y.reshape(self.n_i, self.n_i, order="F"))
        mv, mV = np.linalg.eigh(M)
        return sign_normalize(mV[:, -1])


def build_cluster_tensor(
    phi_block: np.ndarray,
    q_block: np.ndarray,
    vbar_rows: np.ndarray,
    rho: float,
) -> SymmetricTensorUnfolding:
    """Super-symmetrized unfolding of Phi_ij Phi_kl + rho Q_ij S_kl for one cluster.

    The Gramian product enters with 1/3 weights over its three pairings
    and the penalty with 1/6 weights over all six, which preserves the
    quartic form while making the tensor invariant under index
    permutations (so it unfolds to a symmetric matrix).
    """
    if rho <= 0:
        raise ArgumentError("rho must be positive")
    phi_block = np.atleast_2d(np.asarray(phi_block, dtype=float))
    q_block = np.atleast_2d(np.asarray(q_block, dtype=float))
    vbar_rows = np.atleast_2d(np.asarray(vbar_rows, dtype=float))
    n_i = phi_block.shape[0]
    if phi_block.shape != (n_i, n_i) or q_block.shape != (n_i, n_i):
        raise ArgumentError("phi_block and q_block must be square and conformal")
    if vbar_rows.shape[0] != n_i:
        raise ArgumentError("vbar_rows must have one row per cluster member")
    S = vbar_rows @ vbar_rows.T

    def outer(M, N):
        return np.einsum("ij,kl->ijkl", M, N)

    T = (outer(phi_block, phi_block)
         + np.einsum("ik,jl->ijkl", phi_block, phi_block)
         + np.einsum("il,jk->ijkl", phi_block, phi_block)) / 3.0
    T += (rho / 6.0) * (
        outer(q_block, S)
        + np.einsum("ik,jl->ijkl", q_block, S)
        + np.einsum("il,jk->ijkl", q_block, S)
        + np.einsum("jk,il->ijkl", q_block, S)
        + np.einsum("jl,ik->ijkl", q_block, S)
        + np.einsum("kl,ij->ijkl", q_block, S)
    )
    F_s = T.transpose(0, 2, 1, 3).reshape(n_i**2, n_i**2)
    if np.abs(F_s - F_s.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(F_s).max(initial=0.0)):
        raise ArgumentError("unfolded tensor failed its symmetry check")
    return SymmetricTensorUnfolding(F_s=sym(F_s), n_i=n_i)


class _MatrixFreeQuartic:
    """Power-iteration maps of the super-symmetrized tensor without materializing it."""

    def __init__(self, phi_block, q_block, S_block, rho):
        self.P = phi_block
        self.Q = q_block
        self.S = S_block
        self.rho = rho
        self.n_i = phi_block.shape[0]

    def quartic(self, w):
        return float((w @ self.P @ w) ** 2 + self.rho * (w @ self.Q @ w) * (w @ self.S @ w))

    def apply(self, v):
        Pv, Qv, Sv = self.P @ v, self.Q @ v, self.S @ v
        return (v @ Pv) * Pv + 0.5 * self.rho * ((v @ Sv) * Qv + (v @ Qv) * Sv)

    def init_vector(self):
        n = self.n_i

        def matvec(x):
            M = x.reshape(n, n, order="F")
            N = (M + M.T) / 2.0
            out = (2.0 * self.P @ N @ self.P + np.trace(self.P @ N) * self.P) / 3.0
            out += (self.rho / 6.0) * (
                2.0 * self.Q @ N @ self.S
                + 2.0 * self.S @ N @ self.Q
                + np.trace(self.S @ N) * self.Q
                + np.trace(self.Q @ N) * self.S
            )
            return out.reshape(n * n, order="F")

        op = spla.LinearOperator((n * n, n * n), matvec=matvec, dtype=float)
        _, vecs = spla.eigsh(op, k=1, which="LA")
        y = sign_normalize(vecs[:, 0])
        M = sym(y.reshape(n, n, order="F"))
        _, mV = np.linalg.eigh(M)
        return sign_normalize(mV[:, -1])


def _power_iterate(form, v0, delta, max_iters):
    """Normalized tensor power iteration with a monotone-objective contract."""
    v = v0 / np.linalg.norm(v0)
    obj = form.quartic(v)
    history = [obj]
    for _ in range(max_iters):
        z = form.apply(v)
        norm = np.linalg.norm(z)
        if norm <= 1e-300:
            break
        v_new = z / norm
        obj_new = form.quartic(v_new)
        if obj_new < obj - 1e-10 * max(1.0, abs(obj)):
            raise IterationFaultError(
                f"power iteration objective decreased ({obj:.6e} -> {obj_new:.6e})"
            )
        improvement = obj_new / max(abs(obj), _OBJ_FLOOR) - 1.0
        v, obj = v_new, obj_new
        history.append(obj)
        if improvement <= delta:
            break
    return v, obj, history


def effective_rho(
    cfg: WeightDesignConfig, factor: GramianFactor | np.ndarray, Q: np.ndarray, mode: np.ndarray
) -> float:
    """Penalty factor, optionally normalized by ||Phi||_2 / (mode^T Q mode)."""
    if not cfg.normalize_rho:
        return cfg.rho
    F = factor.factor if isinstance(factor, GramianFactor) else np.asarray(factor)
    phi_norm = float(np.linalg.norm(F, 2)) ** 2
    denom = float(mode @ Q @ mode)
    return cfg.rho * phi_norm / max(denom, _OBJ_FLOOR)


def unstable_weight_design(
    partition: ClusterPartition,
    factor: GramianFactor | np.ndarray,
    Q: np.ndarray,
    modes: UnstableModes,
    cfg: WeightDesignConfig | None = None,
    full_output: bool = False,
):
    """Penalized per-cluster weights coupling every block to the non-stable modes.

    Maximizes (w^T Phi w)^2 + rho (w^T Q w) (w^T S w) on each cluster's
    unit sphere by tensor power iteration, started from the dominant
    eigenvector of the matricized dominant eigenvector of the unfolding.
    The returned blocks have nonzero inner product with every penalized
    mode restricted to the cluster.  With ``full_output`` also returns a
    report with per-cluster objectives, iteration counts, the effective
    penalty factor and the block-diagonal coupling gap.
    """
    cfg = cfg or WeightDesignConfig()
    if modes.n_v < 1:
        raise ArgumentError("no modes to penalize; use stable_weight_design instead")
    F = factor.factor if isinstance(factor, GramianFactor) else np.asarray(factor)
    rho = effective_rho(cfg, F, Q, modes.V_bar[:, 0])
    w = np.zeros(partition.n)
    clusters = []
    for cell in partition.sets:
        idx = list(cell)
        phi_block = F[idx] @ F[idx].T
        q_block = Q[np.ix_(idx, idx)]
        vb = modes.V_bar[idx, :]
        if len(idx) <= cfg.dense_cluster_cap:
            form = build_cluster_tensor(phi_block, q_block, vb, rho)
        else:
            form = _MatrixFreeQuartic(phi_block, q_block, vb @ vb.T, rho)
        v0 = form.init_vector()
        v, obj, history = _power_iterate(form, v0, cfg.delta, cfg.max_iters)
        w[idx] = sign_normalize(v)
        clusters.append(
            {"size": len(idx), "objective": float(obj), "iterations": len(history) - 1}
        )
    if full_output:
        report = {
            "clusters": clusters,
            "rho": rho,
            "coupling_gap": block_diagonal_gap(Q, modes, partition, rho),
        }
        return w, report
    return w


def block_diagonal_gap(
    Q: np.ndarray,
    modes: UnstableModes,
    partition: ClusterPartition,
    rho: float,
) -> float:
    """Gershgorin bound on the objective change from dropping Q's off-diagonal blocks.

    Zero when Q is block diagonal with respect to the partition (the
    penalized problem then decouples exactly).
    """
    V = modes.V_bar
    worst = 0.0
    for i, cell_i in enumerate(partition.sets):
        rows = list(cell_i)
        others = [list(c) for k, c in enumerate(partition.sets) if k != i]
        if not others:
            continue
        q_sums = np.column_stack([np.abs(Q[np.ix_(rows, c)]).sum(axis=1) for c in others])
        vv_sums = np.column_stack(
            [np.abs(V[rows] @ V[c].T).sum(axis=1) for c in others]
        )
        worst = max(worst, float((q_sums @ vv_sums.T).max()))
    return rho * worst


@dataclass
class AlternatingResult:
    """Best projection found by alternating cluster and weight updates."""

    projection: ProjectionMatrix
    mismatch: float
    mismatch_history: list[float]
    outer_iterations: int
    converged: bool


def _repair_assumption_blocks(w, partition, modes, tol=1e-12, bump=1e-6):
    """Perturb weight blocks orthogonal to a penalized-mode block."""
    w = np.array(w, dtype=float)
    for k in range(modes.n_v):
        u = modes.V_bar[:, k]
        for cell in partition.sets:
            idx = list(cell)
            block_norm = np.linalg.norm(u[idx])
            if block_norm == 0.0:
                continue
            if abs(np.dot(w[idx], u[idx])) <= tol * block_norm:
                w[idx] = w[idx] + bump * u[idx]
    return w


def alternating_design(
    sys: LtiSystem,
    factor: GramianFactor | np.ndarray,
    r: int,
    cfg: WeightDesignConfig | None = None,
    max_outer: int = 20,
    kmeans_options: dict | None = None,
) -> AlternatingResult:
    """Alternate cluster assignment and weight design until the clusters fix.

    Starts from all-ones weights, clusters by weighted k-means, then
    redesigns the weights for the found clusters (penalized when the plant
    has non-stable modes), keeping the best-mismatch iterate.  All-ones
    blocks that violate the unstable-mode screening are perturbed along
    the offending mode before clustering.
    """
    cfg = cfg or WeightDesignConfig()
    kmeans_options = dict(kmeans_options or {})
    F = factor.factor if isinstance(factor, GramianFactor) else np.asarray(factor)
    modes = UnstableModes.from_state_matrix(sys.A)
    unstable = modes.n_v >= 1

    n = sys.n
    w = np.ones(n)
    best: tuple[float, ProjectionMatrix] | None = None
    history: list[float] = []
    seen: list[list[tuple[int, ...]]] = []
    converged = False
    outer = 0
    for outer in range(1, max_outer + 1):
        scale = float(np.abs(w).max())
        w = np.where(np.abs(w) < 1e-12 * scale, 1e-12 * scale, w)
        problem = closed_loop_cluster_inputs(sys, w, F, r, **kmeans_options)
        result = weighted_kmeans(problem)
        partition = result.partition
        if unstable:
            w_ones = _repair_assumption_blocks(np.ones(n), partition, modes)
            if outer == 1 and not np.array_equal(w_ones, np.ones(n)):
                w = w_ones
            w_new = unstable_weight_design(partition, F, sys.Q, modes, cfg)
        else:
            w_new = stable_weight_design(partition, F)
        proj = build_projection(partition, w_new)
        mismatch = projection_mismatch(proj, F)
        history.append(mismatch)
        if best is None or mismatch < best[0]:
            best = (mismatch, proj)
        if seen and partition.sets == seen[-1]:
            converged = True
            break
        if partition.sets in seen:
            # entered a cluster/weight cycle; the best iterate is already kept
            break
        seen.append(partition.sets)
        w = w_new
    mismatch, proj = best
    return AlternatingResult(
        projection=proj,
        mismatch=mismatch,
        mismatch_history=history,
        outer_iterations=outer,
        converged=converged,
    )
