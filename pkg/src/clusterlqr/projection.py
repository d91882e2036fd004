"""Structured projection matrices and the control-inversion pipeline.

A clustering-based projection P is an r x n row-orthonormal matrix whose
i-th row carries the normalized weight block of cluster i.  Control
inversion reduces the plant and the LQR weights through P, solves the
r-dimensional Riccati equation (with a small regularizing shift when the
reduced pair loses stabilizability or detectability), and lifts the
solution back as X_hat = P^T X_tilde P with gain K_hat = R^{-1} B^T X_hat.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArgumentError,
    AssumptionViolationError,
    DegenerateWeightError,
    NoStabilizingSolutionError,
    NumericalError,
    SynthesisError,
)
from ._linalg import psd_sqrt, sym
from .lqr import GramianFactor, StabilityCertificate, solve_are_matrices, stability_certificates
from .netgen import ClusterPartition, LtiSystem, pbh_stabilizable

_ORTHO_TOL = 1e-12


@dataclass
class ProjectionMatrix:
    """Cluster partition, weight vector and the structured projection built from them."""

    partition: ClusterPartition
    w: np.ndarray
    P: np.ndarray

    @property
    def r(self) -> int:
        return self.P.shape[0]

    @property
    def n(self) -> int:
        return self.P.shape[1]

    def binary(self) -> np.ndarray:
        """0/1 membership matrix with the same sparsity pattern as P."""
        B = np.zeros_like(self.P)
        for i, cell in enumerate(self.partition.sets):
            B[i, list(cell)] = 1.0
        return B

    def nominal(self) -> np.ndarray:
        """Projection with each weight replaced by 1 / ||w_cell||."""
        N = np.zeros_like(self.P)
        for i, cell in enumerate(self.partition.sets):
            N[i, list(cell)] = 1.0 / np.linalg.norm(self.w[list(cell)])
        return N

    def normalized_weights(self) -> np.ndarray:
        """Weight vector with every cluster block scaled to unit 2-norm."""
        w_hat = np.array(self.w, dtype=float)
        for cell in self.partition.sets:
            idx = list(cell)
            w_hat[idx] /= np.linalg.norm(w_hat[idx])
        return w_hat


def build_projection(partition: ClusterPartition, w: np.ndarray) -> ProjectionMatrix:
    """Structured projection with P[i, j] = w_j / ||w_cell_i|| on cluster i.

    Verifies row orthonormality and the weight-invariance property
    P^T P w = w before returning.
    """
    w = np.asarray(w, dtype=float).ravel()
    if len(w) != partition.n:
        raise ArgumentError("weight vector length must match the partition")
    P = np.zeros((partition.r, partition.n))
    for i, cell in enumerate(partition.sets):
        idx = list(cell)
        block_norm = np.linalg.norm(w[idx])
        if block_norm == 0.0:
            raise DegenerateWeightError(f"weight block of cluster {i} is zero")
        P[i, idx] = w[idx] / block_norm
    if np.abs(P @ P.T - np.eye(partition.r)).max() > _ORTHO_TOL:
        raise NumericalError("projection rows failed the orthonormality check")
    if np.linalg.norm(P.T @ (P @ w) - w) > _ORTHO_TOL * max(1.0, np.linalg.norm(w)):
        raise NumericalError("projection failed the weight-invariance check")
    return ProjectionMatrix(partition=partition, w=w, P=P)


@dataclass
class ReducedSystem:
    """Projected plant triple and LQR pair."""

    A: np.ndarray
    B: np.ndarray
    B_d: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    R: np.ndarray

    @property
    def r(self) -> int:
        return self.A.shape[0]


def reduce_system(sys: LtiSystem, proj: ProjectionMatrix) -> ReducedSystem:
    """Project the plant and LQR weights: A_t = P A P^T, Q_t = P Q P^T, G_t = P G P^T."""
    P = proj.P
    return ReducedSystem(
        A=P @ sys.A @ P.T,
        B=P @ sys.B,
        B_d=P @ sys.B_d,
        Q=sym(P @ sys.Q @ P.T),
        G=sym(P @ sys.G @ P.T),
        R=sys.R,
    )


@dataclass
class ClusteredController:
    """Lifted reduced-order LQR solution with its stability certificates."""

    X_tilde: np.ndarray
    X_hat: np.ndarray
    K_hat: np.ndarray
    alpha_used: float
    certificates: list[StabilityCertificate] = field(default_factory=list)

    def certificate(self, kind: str) -> StabilityCertificate | None:
        for cert in self.certificates:
            if cert.kind == kind:
                return cert
        return None


def _auto_alpha(Q_t: np.ndarray, G_t: np.ndarray) -> float:
    s_q = float(np.linalg.norm(Q_t, 2)) if Q_t.size else 0.0
    s_g = float(np.linalg.norm(G_t, 2)) if G_t.size else 0.0
    return 1e-8 * max(1.0, s_q, s_g)


def solve_reduced_lqr(
    reduced: ReducedSystem, alpha_policy: float | str = "auto"
) -> tuple[np.ndarray, float]:
    """Solve the reduced Riccati equation, shifting Q_t / G_t if needed.

    The shift is engaged only for whichever of the reduced pairs fails its
    PBH test (both when both fail); ``alpha_policy`` may be "auto" (scaled
    1e-8 shift), "off" (raise instead of shifting) or an explicit value.
    Returns the solution and the shift that was applied (0.0 for none).
    """
    A_t, Q_t, G_t = reduced.A, reduced.Q, reduced.G
    stab_ok, _ = pbh_stabilizable(A_t, psd_sqrt(G_t))
    det_ok, _ = pbh_stabilizable(A_t.T, psd_sqrt(Q_t))

    def alpha_value() -> float:
        if alpha_policy == "auto":
            return _auto_alpha(Q_t, G_t)
        if alpha_policy == "off":
            raise SynthesisError("reduced pair fails PBH tests and shifting is disabled")
        return float(alpha_policy)

    alpha = 0.0
    shift_q = shift_g = False
    if not det_ok or not stab_ok:
        alpha = alpha_value()
        shift_q = not det_ok
        shift_g = not stab_ok

    r = reduced.r
    Q_eff = Q_t + alpha * np.eye(r) if shift_q else Q_t
    G_eff = G_t + alpha * np.eye(r) if shift_g else G_t
    try:
        sol = solve_are_matrices(A_t, G_eff, Q_eff)
        return sol.X, alpha
    except NoStabilizingSolutionError:
        if alpha_policy == "off":
            raise
        alpha = alpha if alpha > 0 else alpha_value()
        Q_eff = Q_t + alpha * np.eye(r)
        G_eff = G_t + alpha * np.eye(r)
        try:
            sol = solve_are_matrices(A_t, G_eff, Q_eff)
        except NoStabilizingSolutionError as exc:
            raise SynthesisError(f"reduced Riccati equation unsolvable even with shift {alpha:.1e}") from exc
        return sol.X, alpha


def invert_controller(
    x_tilde: np.ndarray,
    proj: ProjectionMatrix,
    sys: LtiSystem,
    alpha_used: float = 0.0,
    x_full: np.ndarray | None = None,
    beta: float | None = None,
    graph=None,
) -> ClusteredController:
    """Lift the reduced solution back: X_hat = P^T X_tilde P, K_hat = R^{-1} B^T X_hat.

    The direct closed-loop eigenvalue certificate is always attached;
    the sufficient-condition certificates are evaluated when the full
    solution or a Riccati bound is available.  Instability is reported
    through the certificates, never raised.
    """
    P = proj.P
    X_hat = sym(P.T @ x_tilde @ P)
    K_hat = np.linalg.solve(sys.R, sys.B.T @ X_hat)
    certs = stability_certificates(
        sys,
        X_hat,
        x_full=x_full,
        x_tilde=x_tilde,
        beta=beta,
        graph=graph,
        partition=proj.partition if graph is not None else None,
        w=proj.w if graph is not None else None,
    )
    return ClusteredController(
        X_tilde=x_tilde, X_hat=X_hat, K_hat=K_hat, alpha_used=alpha_used, certificates=certs
    )


def screen_projection_weights(
    sys: LtiSystem,
    partition: ClusterPartition,
    w: np.ndarray,
    tol: float = 1e-10,
) -> None:
    """Reject weights orthogonal to an unstable eigenvector on some cluster.

    For every eigenvector v of A with Re(lambda) >= 0, each cluster block
    must satisfy |w_cell^T v_cell| > tol * ||v||; otherwise the projected
    closed loop would retain the unstable mode.
    """
    lam, V = np.linalg.eig(sys.A)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    w = np.asarray(w, dtype=float)
    for k in np.flatnonzero(lam.real >= -1e-9 * scale):
        v = V[:, k]
        v = v / np.linalg.norm(v)
        for i, cell in enumerate(partition.sets):
            idx = list(cell)
            if abs(np.dot(w[idx], v[idx])) <= tol:
                raise AssumptionViolationError(
                    f"weight block of cluster {i} is orthogonal to an unstable "
                    f"eigenvector (eigenvalue {lam[k]:.3e})"
                )


def control_inversion(
    sys: LtiSystem,
    proj: ProjectionMatrix,
    alpha_policy: float | str = "auto",
    x_full: np.ndarray | None = None,
    beta: float | None = None,
    graph=None,
    screen: bool = True,
) -> ClusteredController:
    """Full synthesis pipeline: screen, reduce, solve the reduced LQR, lift back."""
    if screen:
        screen_projection_weights(sys, proj.partition, proj.w)
    reduced = reduce_system(sys, proj)
    x_tilde, alpha = solve_reduced_lqr(reduced, alpha_policy)
    return invert_controller(
        x_tilde, proj, sys, alpha_used=alpha, x_full=x_full, beta=beta, graph=graph
    )


def projection_mismatch(proj: ProjectionMatrix | np.ndarray, factor) -> float:
    """Frobenius mismatch ||(I - P^T P) F|| computed without n x n products.

    Because I - P^T P is an orthogonal projector this equals
    sqrt(||F||_F^2 - ||P F||_F^2).
    """
    P = proj.P if isinstance(proj, ProjectionMatrix) else np.asarray(proj)
    F = factor.factor if isinstance(factor, GramianFactor) else np.asarray(factor)
    total = float(np.sum(F * F))
    kept = float(np.sum((P @ F) ** 2))
    return float(np.sqrt(max(total - kept, 0.0)))


def weighted_error_bound(
    proj: ProjectionMatrix,
    sys: LtiSystem,
    x_full: np.ndarray,
    factor: GramianFactor,
    alpha: float,
    beta_tilde: float,
) -> float:
    """Quadratic upper bound on ||(X - X_hat) Phi^{1/2}||_F as a function of the mismatch.

    Needs the exact (square, invertible) Gramian factor; a diagnostic for
    moderate n.  ``beta_tilde`` bounds the reduced Riccati solution norm.
    """
    F = factor.factor
    n = sys.n
    if F.shape != (n, n):
        raise ArgumentError("weighted_error_bound needs the exact n x n Gramian factor")
    try:
        F_inv = np.linalg.inv(F)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Gramian factor is singular") from exc
    s_inv = np.linalg.svd(F_inv, compute_uv=False)
    inner = np.linalg.svd(F_inv @ (sys.A - sys.G @ x_full) @ F, compute_uv=False)
    eps1 = float(s_inv[0] / inner[-1])
    s_F = float(np.linalg.norm(F, 2))
    eps2 = beta_tilde * float(np.linalg.norm(sys.A, 2)) * s_F + float(np.linalg.norm(sys.Q @ F, 2))
    eps3 = (beta_tilde**2 + 1.0) * s_F**2
    xi = projection_mismatch(proj, factor)
    s_Q = float(np.linalg.norm(sys.Q, 2))
    return eps1 * s_Q * xi**2 + 2.0 * eps1 * eps2 * xi + alpha * eps1 * eps3


def count_links(n: int, r: int) -> dict[str, int]:
    """Bidirectional link counts: two-layer clustered implementation vs full LQR."""
    if not (1 <= r <= n):
        raise ArgumentError("need 1 <= r <= n")
    return {"two_layer": n + r * (r - 1) // 2, "full_lqr": n * (n - 1) // 2}
