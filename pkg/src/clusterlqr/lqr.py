"""Full-order LQR machinery.

Solves the continuous algebraic Riccati equation through the stable
invariant subspace of the Hamiltonian matrix, builds the closed-loop
controllability Gramian from the same eigendata via a Cauchy-kernel
formula, and evaluates the H2/Hinf norms, model-matching errors and
stability certificates used to judge a projected controller.

Conventions: the Hamiltonian is [[A, -G], [-Q, -A^T]] with G = B R^{-1} B^T.
Stable eigenvalues are kept sorted by ascending |Re| (slowest first) with
complex conjugate pairs adjacent, the positive-imaginary member first, so
that downstream Gramian factors realify exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._linalg import psd_sqrt, psd_sqrt_factor, solve_lyapunov, spectral_abscissa, sym
from .errors import (
    ArgumentError,
    InstabilityError,
    InvalidCertificateError,
    NoStabilizingSolutionError,
    NumericalError,
)
from .netgen import LtiSystem

_IMAG_AXIS_RTOL = 1e-9
_PAIR_RTOL = 1e-8


@dataclass
class StableEigenbasis:
    """Stable Hamiltonian eigendata: eigenvalues, top eigenvector block, left rows.

    ``Y`` holds the first n rows of the stable eigenvectors (the right
    eigenspace of the closed loop A - G X), ``Omega`` the matching rows of
    the full inverse (or the pseudo-inverse of Y for a partial basis).
    """

    eigenvalues: np.ndarray
    Y: np.ndarray
    Omega: np.ndarray
    exact: bool
    pair_completed: bool = False

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=complex)
        if np.any(lam.real >= 0):
            raise ArgumentError("stable eigenbasis contains a non-stable eigenvalue")
        self.eigenvalues = lam

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def kappa(self) -> int:
        return len(self.eigenvalues)

    def cauchy_matrix(self) -> np.ndarray:
        """Cauchy kernel C_ij = -1 / (lambda_i + lambda_j)."""
        lam = self.eigenvalues
        return -1.0 / (lam[:, None] + lam[None, :])

    def gap_ratio(self, tail_eigenvalue: complex | None = None) -> float:
        """|lambda_kappa| / |lambda_kappa+1|, 1.0 when no tail is known."""
        if tail_eigenvalue is None:
            return 1.0
        return float(abs(self.eigenvalues[-1]) / abs(tail_eigenvalue))


@dataclass
class AreSolution:
    """Stabilizing Riccati solution with its gain and quality indicators."""

    X: np.ndarray
    K: np.ndarray | None
    residual_norm: float
    positive_definite: bool
    closed_loop_abscissa: float


@dataclass
class GramianFactor:
    """Rectangular factor F with F F^T equal to the (possibly low-rank) Gramian."""

    factor: np.ndarray
    source: str
    cauchy_block: np.ndarray
    eigenvalues: np.ndarray

    @property
    def kappa(self) -> int:
        return self.factor.shape[1]

    def gramian(self) -> np.ndarray:
        return self.factor @ self.factor.T


@dataclass
class StabilityCertificate:
    """One stability test outcome; positive margin means satisfied with room."""

    kind: str
    satisfied: bool
    margin: float
    details: dict[str, float] = field(default_factory=dict)


def hamiltonian_matrix(A: np.ndarray, G: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Hamiltonian block matrix [[A, -G], [-Q, -A^T]]."""
    return np.block([[A, -G], [-Q, -A.T]])


def canonicalize_stable_pairs(lam: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort stable eigenpairs by ascending |Re| (ties by |Im|) and pair conjugates.

    Conjugate pairs end up adjacent with the positive-imaginary member
    first and the partner replaced by the exact conjugate, so that later
    realification is exact.  Real eigenvalues get phase-rotated real
    eigenvectors.
    """
    lam = np.asarray(lam, dtype=complex)
    V = np.asarray(V, dtype=complex)
    order = np.lexsort((np.abs(lam.imag), np.abs(lam.real)))
    lam, V = lam[order], V[:, order]
    out_l: list[complex] = []
    out_v: list[np.ndarray] = []
    taken = np.zeros(len(lam), dtype=bool)
    for i in range(len(lam)):
        if taken[i]:
            continue
        li, vi = lam[i], V[:, i]
        scale = max(1.0, abs(li))
        if abs(li.imag) <= _IMAG_AXIS_RTOL * scale:
            j = int(np.argmax(np.abs(vi)))
            vi = vi / (vi[j] / abs(vi[j]))
            out_l.append(complex(li.real))
            out_v.append(vi.real.astype(complex))
            taken[i] = True
            continue
        partner = None
        best = np.inf
        for j in range(i + 1, len(lam)):
            if taken[j]:
                continue
            d = abs(lam[j] - np.conj(li))
            if d < best:
                best, partner = d, j
        if partner is None or best > _PAIR_RTOL * scale:
            raise NumericalError(f"unpaired complex eigenvalue {li}")
        taken[i] = taken[partner] = True
        if li.imag < 0:
            li, vi = np.conj(li), np.conj(vi)
        out_l += [li, np.conj(li)]
        out_v += [vi, np.conj(vi)]
    return np.array(out_l), np.column_stack(out_v) if out_v else V[:, :0]


def pair_realifier(lam: np.ndarray) -> np.ndarray:
    """Block transformation T with Y = Y_real @ T for a canonical eigenvalue list.

    Real eigenvalues contribute a 1x1 identity block; each conjugate pair
    contributes [[1, 1], [1j, -1j]] so that the pair columns [y, conj(y)]
    equal [Re y, Im y] @ T.
    """
    k = len(lam)
    T = np.zeros((k, k), dtype=complex)
    i = 0
    while i < k:
        if abs(lam[i].imag) <= _IMAG_AXIS_RTOL * max(1.0, abs(lam[i])):
            T[i, i] = 1.0
            i += 1
        else:
            T[i, i] = 1.0
            T[i, i + 1] = 1.0
            T[i + 1, i] = 1j
            T[i + 1, i + 1] = -1j
            i += 2
    return T


def realify_basis(lam: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real column basis Y_real and transformation T with Y = Y_real @ T."""
    T = pair_realifier(lam)
    Yr = np.empty(Y.shape, dtype=float)
    i = 0
    while i < len(lam):
        if abs(lam[i].imag) <= _IMAG_AXIS_RTOL * max(1.0, abs(lam[i])):
            Yr[:, i] = Y[:, i].real
            i += 1
        else:
            Yr[:, i] = Y[:, i].real
            Yr[:, i + 1] = Y[:, i].imag
            i += 2
    return Yr, T


def _stable_hamiltonian_eig(A: np.ndarray, G: np.ndarray, Q: np.ndarray):
    """Dense stable eigenpairs of the Hamiltonian, canonically ordered."""
    n = A.shape[0]
    H = hamiltonian_matrix(A, G, Q)
    lam, V = sla.eig(H)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if np.any(np.abs(lam.real) <= _IMAG_AXIS_RTOL * scale):
        raise NoStabilizingSolutionError(
            "Hamiltonian has eigenvalues on the imaginary axis; "
            "no stabilizing Riccati solution exists"
        )
    stable = lam.real < 0
    if int(stable.sum()) != n:
        raise NoStabilizingSolutionError(
            f"expected {n} stable Hamiltonian eigenvalues, found {int(stable.sum())}"
        )
    return canonicalize_stable_pairs(lam[stable], V[:, stable])


def stable_eigenbasis(sys: LtiSystem) -> StableEigenbasis:
    """Full stable eigenbasis (kappa = n) of the Hamiltonian of ``sys``."""
    lam, V = _stable_hamiltonian_eig(sys.A, sys.G, sys.Q)
    Y = V[: sys.n, :]
    return StableEigenbasis(eigenvalues=lam, Y=Y, Omega=np.linalg.inv(Y), exact=True)


def solve_are_matrices(A: np.ndarray, G: np.ndarray, Q: np.ndarray) -> AreSolution:
    """Stabilizing solution of A^T X + X A + Q - X G X = 0 via the Hamiltonian."""
    n = A.shape[0]
    lam, V = _stable_hamiltonian_eig(A, G, Q)
    Y, Z = V[:n, :], V[n:, :]
    cond_Y = np.linalg.cond(Y)
    if not np.isfinite(cond_Y) or cond_Y > 1e13:
        raise NumericalError(f"stable eigenvector block is ill-conditioned (cond ~ {cond_Y:.2e})")
    X = np.linalg.solve(Y.T, Z.T).T
    X = sym(X.real)
    residual = A.T @ X + X @ A + Q - X @ G @ X
    res_norm = float(np.linalg.norm(residual))
    try:
        np.linalg.cholesky(X)
        pd = True
    except np.linalg.LinAlgError:
        pd = False
    abscissa = spectral_abscissa(A - G @ X)
    if abscissa >= 0:
        raise NumericalError(f"computed Riccati solution is not stabilizing (abscissa {abscissa:.3e})")
    return AreSolution(X=X, K=None, residual_norm=res_norm, positive_definite=pd, closed_loop_abscissa=abscissa)


def solve_are_full(sys: LtiSystem) -> AreSolution:
    """Full-order LQR solution with gain K = R^{-1} B^T X."""
    sol = solve_are_matrices(sys.A, sys.G, sys.Q)
    sol.K = np.linalg.solve(sys.R, sys.B.T @ sol.X)
    return sol


def gramian_factor_from_basis(basis: StableEigenbasis, B_d: np.ndarray, source: str) -> GramianFactor:
    """Gramian factor from eigendata via the Hadamard Cauchy-kernel formula.

    Builds the inner matrix (Omega B_d B_d^T Omega^T) o C in eigenvalue
    coordinates, realifies it over conjugate pairs, and returns the real
    n x kappa factor Y_real @ chol(inner).
    """
    lam = basis.eigenvalues
    C = basis.cauchy_matrix()
    Mb = basis.Omega @ B_d.astype(complex)
    N = (Mb @ Mb.T) * C
    Yr, T = realify_basis(lam, basis.Y)
    Mr = T @ N @ T.T
    scale = max(1e-300, float(np.abs(Mr.real).max(initial=0.0)))
    if np.abs(Mr.imag).max(initial=0.0) > 1e-7 * scale:
        raise NumericalError(
            "realified Gramian kernel has a large imaginary part; "
            "conjugate pairing of the eigenbasis is inconsistent"
        )
    inner = psd_sqrt_factor(Mr.real, neg_tol=1e-10)
    return GramianFactor(factor=Yr @ inner, source=source, cauchy_block=C, eigenvalues=lam.copy())


def closed_loop_gramian(sys: LtiSystem, basis: StableEigenbasis) -> GramianFactor:
    """Exact closed-loop controllability Gramian factor (requires a full basis)."""
    if basis.kappa != sys.n or not basis.exact:
        raise ArgumentError("closed_loop_gramian needs the full stable eigenbasis (kappa = n)")
    return gramian_factor_from_basis(basis, sys.B_d, source="exact")


def h2_norm(A_cl: np.ndarray, B_in: np.ndarray, C_out: np.ndarray | None = None) -> float:
    """H2 norm of C (sI - A)^{-1} B via the controllability Gramian trace."""
    if spectral_abscissa(A_cl) >= 0:
        raise InstabilityError("H2 norm is infinite: closed-loop matrix is not Hurwitz")
    W = solve_lyapunov(A_cl, B_in @ B_in.T)
    if C_out is None:
        value = float(np.trace(W))
    else:
        value = float(np.trace(C_out @ W @ C_out.T))
    return float(np.sqrt(max(value, 0.0)))


def _has_imaginary_eigenvalue(M: np.ndarray) -> bool:
    lam = np.linalg.eigvals(M)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    return bool(np.any(np.abs(lam.real) <= 1e-9 * scale))


def _sigma_max_response(A, B, C, w):
    n = A.shape[0]
    M = np.linalg.solve(1j * w * np.eye(n) - A, B)
    return float(np.linalg.svd(C @ M, compute_uv=False)[0])


def hinf_norm(
    A_cl: np.ndarray,
    B_in: np.ndarray,
    C_out: np.ndarray | None = None,
    rtol: float = 1e-4,
) -> float:
    """Hinf norm by bisection on the gamma-scaled Hamiltonian.

    gamma is an upper bound on the norm iff [[A, B B^T / g], [-C^T C / g, -A^T]]
    has no imaginary-axis eigenvalues; the certified upper end of the
    bracket is returned.
    """
    if spectral_abscissa(A_cl) >= 0:
        raise InstabilityError("Hinf norm is infinite: closed-loop matrix is not Hurwitz")
    n = A_cl.shape[0]
    C = np.eye(n) if C_out is None else C_out
    eigs = np.linalg.eigvals(A_cl)
    freqs = np.unique(np.concatenate([[0.0], np.abs(eigs.imag), np.abs(eigs)]))
    lb = max(_sigma_max_response(A_cl, B_in, C, w) for w in freqs)
    if lb <= 0.0:
        return 0.0

    BBt = B_in @ B_in.T
    CtC = C.T @ C

    def is_upper_bound(g):
        M = np.block([[A_cl, BBt / g], [-CtC / g, -A_cl.T]])
        return not _has_imaginary_eigenvalue(M)

    ub = 2.0 * lb
    for _ in range(80):
        if is_upper_bound(ub):
            break
        lb = ub
        ub *= 2.0
    else:
        raise NumericalError("Hinf bisection failed to bracket the norm")
    while ub - lb > rtol * lb:
        mid = 0.5 * (lb + ub)
        if is_upper_bound(mid):
            ub = mid
        else:
            lb = mid
    return float(ub)


@dataclass
class MatchReport:
    """H2 model-matching error between two closed loops over the same plant."""

    error: float
    rel_error: float
    h2_full: float


def model_matching_error(sys: LtiSystem, K_full: np.ndarray, K_hat: np.ndarray) -> MatchReport:
    """H2 norm of the closed-loop mismatch between the benchmark and projected gains.

    The error system stacks both closed loops driven by +/- B_d with the
    summed state as output; its H2 norm equals ||g - g_hat||.
    """
    A1 = sys.A - sys.B @ K_full
    A2 = sys.A - sys.B @ K_hat
    if spectral_abscissa(A1) >= 0:
        raise InstabilityError("benchmark closed loop is not Hurwitz")
    if spectral_abscissa(A2) >= 0:
        raise InstabilityError("projected closed loop is not Hurwitz")
    n = sys.n
    A_e = np.block([[A1, np.zeros((n, n))], [np.zeros((n, n)), A2]])
    B_e = np.vstack([sys.B_d, -sys.B_d])
    C_e = np.hstack([np.eye(n), np.eye(n)])
    err = h2_norm(A_e, B_e, C_e)
    h2_full = h2_norm(A1, sys.B_d)
    rel = err / h2_full if h2_full > 0 else np.inf
    return MatchReport(error=err, rel_error=float(rel), h2_full=h2_full)


def are_solution_bound_matrices(
    A: np.ndarray,
    G: np.ndarray,
    Q: np.ndarray,
    certificate: dict | None = None,
) -> float:
    """Upper bound beta on the largest eigenvalue of the Riccati solution.

    For dissipative plants (A + A^T negative semidefinite, G - A positive
    definite) the closed form sigma_max(Q + G) / (2 sigma_min(G - A))
    applies without extra data.  Otherwise a certificate dict with keys
    ``K_t``, ``D_t``, ``F`` satisfying
    (A + G^{1/2} K_t)^T D_t + D_t (A + G^{1/2} K_t) <= -F
    must be supplied; the bound is then
    lam_max(D_t) * lam_max((Q + K_t^T K_t) D_t) / lam_min(F D_t).
    """
    n = A.shape[0]
    if certificate is None:
        sA = sym(A)
        scale = max(1.0, float(np.abs(A).max(initial=0.0)))
        dissipative = np.linalg.eigvalsh(sA).max() <= 1e-8 * scale
        GmA = sym(G - A)
        smin = float(np.linalg.eigvalsh(GmA).min())
        if not dissipative or smin <= 0:
            raise ArgumentError(
                "plant is not dissipative with G - A > 0; supply a Lyapunov certificate"
            )
        smax = float(np.linalg.svd(sym(Q + G), compute_uv=False)[0])
        return smax / (2.0 * smin)

    K_t = np.asarray(certificate["K_t"], dtype=float)
    D_t = sym(np.asarray(certificate["D_t"], dtype=float))
    F = sym(np.asarray(certificate["F"], dtype=float))
    if np.linalg.eigvalsh(D_t).min() <= 0 or np.linalg.eigvalsh(F).min() <= 0:
        raise InvalidCertificateError("D_t and F must be positive definite")
    A_t = A + psd_sqrt(G) @ K_t
    residual = sym(A_t.T @ D_t + D_t @ A_t) + F
    scale = max(1.0, float(np.abs(residual).max(initial=0.0)), float(np.abs(F).max()))
    if np.linalg.eigvalsh(residual).max() > 1e-8 * scale:
        raise InvalidCertificateError("certificate violates its Lyapunov inequality")
    lam_D = float(np.linalg.eigvalsh(D_t).max())
    num = float(np.max(np.linalg.eigvals((Q + K_t.T @ K_t) @ D_t).real))
    den = float(np.min(np.linalg.eigvals(F @ D_t).real))
    if den <= 0:
        raise InvalidCertificateError("F D_t has a non-positive eigenvalue")
    return lam_D * num / den


def are_solution_bound(sys: LtiSystem, certificate: dict | None = None) -> float:
    """Riccati solution bound for an LtiSystem (see are_solution_bound_matrices)."""
    return are_solution_bound_matrices(sys.A, sys.G, sys.Q, certificate)


def stability_certificates(
    sys: LtiSystem,
    x_hat: np.ndarray,
    x_full: np.ndarray | None = None,
    x_tilde: np.ndarray | None = None,
    beta: float | None = None,
    graph=None,
    partition=None,
    w: np.ndarray | None = None,
) -> list[StabilityCertificate]:
    """Evaluate every applicable stability certificate for a projected gain.

    The direct closed-loop eigenvalue check is authoritative; the remaining
    entries are sufficient conditions that may legitimately fail while the
    direct check passes.  Unsatisfied certificates are reported, never
    raised.
    """
    certs: list[StabilityCertificate] = []
    A, G, Q = sys.A, sys.G, sys.Q
    n = sys.n

    abscissa = spectral_abscissa(A - G @ x_hat)
    certs.append(
        StabilityCertificate(
            kind="closed_loop_eig",
            satisfied=abscissa < 0,
            margin=-abscissa,
            details={"spectral_abscissa": abscissa},
        )
    )

    if x_full is not None:
        E = x_full - x_hat
        s_q = np.linalg.svd(Q, compute_uv=False)
        s_g = np.linalg.svd(G, compute_uv=False)
        s_x = np.linalg.svd(x_full, compute_uv=False)
        s_e = float(np.linalg.svd(E, compute_uv=False)[0]) if n else 0.0
        margin = float(s_q[-1] - 2.0 * s_x[0] * s_g[0] * s_e + s_x[-1] ** 2 * s_g[-1])
        certs.append(
            StabilityCertificate(
                kind="error_norm_margin",
                satisfied=margin > 0,
                margin=margin,
                details={
                    "sigma_min_Q": float(s_q[-1]),
                    "sigma_max_X": float(s_x[0]),
                    "sigma_min_X": float(s_x[-1]),
                    "sigma_max_G": float(s_g[0]),
                    "sigma_min_G": float(s_g[-1]),
                    "sigma_max_E": s_e,
                },
            )
        )

    if x_tilde is not None and beta is not None and beta > 0:
        s_q_min = float(np.linalg.svd(Q, compute_uv=False)[-1])
        s_g_max = float(np.linalg.svd(G, compute_uv=False)[0])
        s_xt = float(np.linalg.svd(x_tilde, compute_uv=False)[0]) if x_tilde.size else 0.0
        threshold = s_q_min / (2.0 * s_g_max * beta) - beta
        certs.append(
            StabilityCertificate(
                kind="reduced_solution_bound",
                satisfied=s_xt < threshold,
                margin=float(threshold - s_xt),
                details={"beta": float(beta), "sigma_max_Xt": s_xt, "threshold": float(threshold)},
            )
        )

    if sys.B.shape[0] == sys.B.shape[1]:
        svals_B = np.linalg.svd(sys.B, compute_uv=False)
        invertible = svals_B[-1] > max(sys.B.shape) * np.finfo(float).eps * svals_B[0]
        alpha = float(np.trace(G)) / n
        dev = float(np.linalg.norm(G - alpha * np.eye(n), 2))
        # the certificate argument needs A + A^T <= 0 on top of G ~ alpha I
        sym_abscissa = float(np.linalg.eigvalsh(sym(A)).max())
        dissipative = sym_abscissa <= 1e-8 * max(1.0, float(np.abs(A).max(initial=0.0)))
        certs.append(
            StabilityCertificate(
                kind="isotropic_input_gain",
                satisfied=bool(
                    invertible and dissipative and alpha > 0 and dev <= 1e-9 * max(1.0, alpha)
                ),
                margin=alpha - dev,
                details={"alpha": alpha, "deviation": dev, "sym_abscissa": sym_abscissa},
            )
        )

    if graph is not None and partition is not None and w is not None:
        from .netgen import consensus_mode, is_almost_equitable

        vbar = consensus_mode(graph)
        wn = np.asarray(w, dtype=float)
        wn = wn / np.linalg.norm(wn)
        aligned = float(abs(wn @ vbar)) >= 1.0 - 1e-10
        equitable = is_almost_equitable(graph, partition)
        certs.append(
            StabilityCertificate(
                kind="almost_equitable",
                satisfied=bool(aligned and equitable),
                margin=1.0 if (aligned and equitable) else -1.0,
                details={"weight_alignment": float(abs(wn @ vbar))},
            )
        )

    return certs
