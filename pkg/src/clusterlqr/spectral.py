"""Low-rank Gramian machinery.

Computes the kappa slowest stable Hamiltonian eigenpairs by shift-invert
Arnoldi iteration, assembles the rank-limited Gramian surrogate from them,
and evaluates the truncation bound on the optimal projection mismatch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, ConvergenceError, SpectralGapError
from .lqr import (
    GramianFactor,
    StableEigenbasis,
    _stable_hamiltonian_eig,
    canonicalize_stable_pairs,
    gramian_factor_from_basis,
    hamiltonian_matrix,
)
from .netgen import LtiSystem

_IMAG_AXIS_RTOL = 1e-9


@dataclass
class LowRankConfig:
    """Parameters of the partial stable eigensolve."""

    kappa: int
    max_arnoldi_dim: int | None = None
    tol: float = 1e-10
    eta_estimate: float | None = None

    def __post_init__(self):
        if self.kappa < 1:
            raise ArgumentError("kappa must be at least 1")
        if self.tol <= 0:
            raise ArgumentError("tol must be positive")


def _truncate_with_pairs(lam, V, kappa):
    """First kappa canonical eigenpairs, grown by one if a pair would split."""
    completed = False
    if kappa < len(lam):
        tail = lam[kappa - 1]
        if abs(tail.imag) > _IMAG_AXIS_RTOL * max(1.0, abs(tail)) and tail.imag > 0:
            kappa += 1
            completed = True
    return lam[:kappa], V[:, :kappa], completed


def partial_stable_eigenbasis(sys: LtiSystem, cfg: LowRankConfig) -> StableEigenbasis:
    """The kappa stable Hamiltonian eigenvalues of smallest |Re| with their Y block.

    Shift-invert Arnoldi about a small negative real shift; because the
    Hamiltonian spectrum is symmetric about the imaginary axis, twice as
    many eigenvalues are requested and the unstable mirrors discarded.
    Falls back to a dense solve when kappa is within 2 of n (the Arnoldi
    problem would need nearly the whole spectrum anyway).
    """
    n = sys.n
    kappa = cfg.kappa
    if kappa > n:
        raise ArgumentError("kappa cannot exceed the state dimension")

    if 2 * kappa + 2 > 2 * n - 2:
        lam, V = _stable_hamiltonian_eig(sys.A, sys.G, sys.Q)
    else:
        H = sp.csc_matrix(hamiltonian_matrix(sys.A, sys.G, sys.Q))
        shift = -1e-3 * float(np.linalg.norm(sys.A, "fro")) / n
        lam = V = None
        failure = None
        # fixed start vector keeps repeated runs bit-reproducible
        v0 = np.random.default_rng(0).standard_normal(2 * n)
        k_req = 2 * kappa + 2
        while True:
            try:
                lam_r, V_r = spla.eigs(
                    H, k=k_req, sigma=shift, which="LM", tol=cfg.tol,
                    ncv=cfg.max_arnoldi_dim, v0=v0,
                )
            except spla.ArpackNoConvergence as exc:
                raise ConvergenceError(
                    f"Arnoldi iteration did not converge for k={k_req} "
                    f"(converged {len(exc.eigenvalues)} eigenvalues)"
                ) from exc
            scale = max(1.0, float(np.abs(lam_r).max(initial=0.0)))
            if np.any(np.abs(lam_r.real) <= _IMAG_AXIS_RTOL * scale):
                raise SpectralGapError(
                    "Hamiltonian eigenvalue found on the imaginary axis; "
                    "the plant violates the stabilizability/detectability assumptions"
                )
            stable = lam_r.real < 0
            if int(stable.sum()) >= kappa:
                lam, V = lam_r[stable], V_r[:, stable]
                break
            failure = f"only {int(stable.sum())} stable eigenvalues among {k_req}"
            if k_req >= 2 * n - 2:
                raise ConvergenceError(f"partial eigensolve failed: {failure}")
            k_req = min(2 * k_req, 2 * n - 2)
        lam, V = canonicalize_stable_pairs(lam, V)

    lam, V, completed = _truncate_with_pairs(lam, V, kappa)
    Y1 = V[:n, :]
    return StableEigenbasis(
        eigenvalues=lam,
        Y=Y1,
        Omega=np.linalg.pinv(Y1),
        exact=(len(lam) == n),
        pair_completed=completed,
    )


def low_rank_gramian(sys: LtiSystem, basis: StableEigenbasis) -> GramianFactor:
    """Rank-kappa Gramian surrogate factor from a partial stable eigenbasis."""
    source = "exact" if basis.exact else "low_rank"
    return gramian_factor_from_basis(basis, sys.B_d, source=source)


def eta_estimate(basis: StableEigenbasis) -> float:
    """Condition-number estimate of the eigenvector block (an estimate, not a certificate)."""
    s = np.linalg.svd(basis.Y, compute_uv=False)
    if s[-1] <= 0:
        return float("inf")
    return float(s[0] / s[-1])


def low_rank_gap_bound(tail_eigenvalues: np.ndarray, eta: float, n_b: int) -> float:
    """Bound on the loss of the optimal projection mismatch due to rank truncation.

    Evaluates sqrt(eta^2 * n_b * sum(-1 / (2 lambda))) over the discarded
    stable eigenvalues; assumes unit-norm disturbance columns.
    """
    lam = np.asarray(tail_eigenvalues, dtype=complex)
    if lam.size == 0:
        return 0.0
    if np.any(lam.real >= 0):
        raise ArgumentError("tail eigenvalues must all be stable")
    s = float(np.sum(-1.0 / (2.0 * lam)).real)
    return float(np.sqrt(eta**2 * n_b * s))
