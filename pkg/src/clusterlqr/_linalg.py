"""Small dense linear-algebra helpers used throughout the package."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError


def sym(M: np.ndarray) -> np.ndarray:
    """Symmetric part of a square matrix."""
    return (M + M.T) / 2.0


def is_symmetric(M: np.ndarray, rtol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    return bool(np.abs(M - M.T).max(initial=0.0) <= rtol * scale)


def spectral_abscissa(A: np.ndarray) -> float:
    """Largest real part over the eigenvalues of A."""
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(A: np.ndarray, tol: float = 0.0) -> bool:
    return spectral_abscissa(A) < -tol


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip the sign of v so its largest-magnitude entry is positive."""
    j = int(np.argmax(np.abs(v)))
    return -v if v[j] < 0 else v


def dominant_eigvec(M: np.ndarray, symmetric: bool | None = None) -> tuple[float, np.ndarray]:
    """Eigenvalue of largest real part and its unit right eigenvector.

    The eigenvector is returned real, sign-normalized.  Raises
    ``NumericalError`` if the dominant eigenvalue is complex (no real
    dominant direction exists).
    """
    if symmetric is None:
        symmetric = is_symmetric(M)
    if symmetric:
        w, V = np.linalg.eigh(sym(M))
        val, vec = float(w[-1]), V[:, -1]
    else:
        w, V = np.linalg.eig(M)
        k = int(np.argmax(w.real))
        val, vec = w[k], V[:, k]
        scale = max(1.0, abs(val))
        if abs(np.imag(val)) > 1e-9 * scale:
            raise NumericalError("dominant eigenvalue is complex; no real dominant eigenvector")
        # rotate the phase away before dropping the imaginary part
        j = int(np.argmax(np.abs(vec)))
        vec = (vec / (vec[j] / abs(vec[j]))).real
        val = float(val.real)
    vec = vec / np.linalg.norm(vec)
    return val, sign_normalize(vec)


def psd_sqrt_factor(M: np.ndarray, neg_tol: float = 1e-10) -> np.ndarray:
    """Square factor F of a symmetric PSD matrix, M = F F^T.

    Tries Cholesky first; falls back to an eigenvalue square root with
    small negative eigenvalues clipped to zero.  Eigenvalues below
    ``-neg_tol * scale`` mean M is genuinely indefinite and raise.
    """
    M = sym(np.asarray(M, dtype=float))
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(M)
    scale = max(1.0, float(w[-1]))
    if w[0] < -neg_tol * scale:
        raise NumericalError(
            f"matrix is indefinite beyond tolerance (min eig {w[0]:.3e}, scale {scale:.3e})"
        )
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def psd_sqrt(M: np.ndarray, neg_tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root S with S @ S = M."""
    M = sym(np.asarray(M, dtype=float))
    w, V = np.linalg.eigh(M)
    scale = max(1.0, float(abs(w).max(initial=0.0)))
    if w[0] < -neg_tol * scale:
        raise NumericalError(f"matrix is indefinite (min eig {w[0]:.3e})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def is_positive_definite(M: np.ndarray) -> bool:
    """Cholesky-based PD test of the symmetric part."""
    try:
        np.linalg.cholesky(sym(M))
        return True
    except np.linalg.LinAlgError:
        return False


def rank_threshold(svals: np.ndarray, rows: int, cols: int) -> float:
    """Singular-value cutoff max(rows, cols) * eps * sigma_max."""
    smax = float(svals[0]) if len(svals) else 0.0
    return max(rows, cols) * np.finfo(float).eps * smax


def solve_lyapunov(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Solve A X + X A^T + W = 0 for symmetric W (Bartels-Stewart)."""
    X = sla.solve_continuous_lyapunov(A, -np.asarray(W, dtype=float))
    return sym(X)
