"""Dense linear-algebra kernels used by TT rounding, TT-SVD and the DMRG local solves."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

__all__ = ["svd", "qr", "tikhonov_solve", "truncation_rank"]


def _check_finite(M: np.ndarray, what: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{what}: non-finite entries in {M.shape} input")
    return M


def svd(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``M = U @ diag(S) @ Vt`` with ``S`` nonincreasing.

    Uses the divide-and-conquer LAPACK driver and falls back to the slower
    but more robust ``gesvd`` if it does not converge.
    """
    M = _check_finite(M, "svd")
    if M.ndim != 2:
        raise ValueError(f"svd expects a matrix, got shape {M.shape}")
    if M.size == 0:
        k = min(M.shape)
        return np.zeros((M.shape[0], k)), np.zeros(k), np.zeros((k, M.shape[1]))
    try:
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD did not converge for a {M.shape[0]}x{M.shape[1]} matrix"
        ) from exc


def qr(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization ``M = Q @ R``.

    The signs are fixed so that ``diag(R) >= 0``; this makes the
    factorization unique for full-rank input.
    """
    M = _check_finite(M, "qr")
    Q, R = np.linalg.qr(M, mode="reduced")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs, R * signs[:, None]


def truncation_rank(S: np.ndarray, eps: float, chi_max: int | None = None, *, absolute: bool = False) -> int:
    """Smallest rank whose discarded singular-value tail meets the tolerance.

    The tail rule is ``sqrt(sum_{j>k} s_j^2) <= eps * sqrt(sum_j s_j^2)``
    (or ``<= eps`` when ``absolute``). The result is capped by ``chi_max``
    and is never below 1.
    """
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return 1
    budget = eps if absolute else eps * float(np.sqrt(np.sum(S**2)))
    # tail[k] = norm of S[k:]
    tail = np.sqrt(np.cumsum((S**2)[::-1]))[::-1]
    tail = np.append(tail, 0.0)
    k = int(np.argmax(tail <= budget))
    k = max(1, k)
    if chi_max is not None:
        k = min(k, int(chi_max))
    return k


# below this reciprocal condition number the unregularized solve goes through the SVD
_LU_RCOND_MIN = 1e-10
# the normal equations square the condition number; this bound keeps the local
# solve accurate to about 1e-4 relative, far below any DMRG target
_CHOL_RCOND_MIN = 1e-12


def tikhonov_solve(A: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Tikhonov-regularized least-squares solve via the SVD of ``A``.

    Returns ``x = V (S^2 + alpha I)^{-1} S U^T b``. With ``alpha = 0`` this is
    the minimum-norm least-squares solution (singular values that are zero
    to working precision are dropped); well-conditioned systems take an
    LU (``alpha = 0``) or Cholesky (``alpha > 0``) shortcut that yields the
    same vector to near working precision.
    """
    A = _check_finite(A, "tikhonov_solve")
    b = _check_finite(b, "tikhonov_solve rhs")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, b has length {b.shape[0]}")
    if alpha == 0.0 and A.shape[0] == A.shape[1] and A.size:
        # a well-conditioned square system has the pseudoinverse solution as its LU solution
        with warnings.catch_warnings():
            # exactly singular input is handled by the SVD path below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        rcond, info = scipy.linalg.lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
        if info == 0 and rcond > _LU_RCOND_MIN:
            return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    elif alpha > 0.0 and A.size:
        # regularized normal equations; only trusted when well conditioned
        G = A.T @ A
        G[np.diag_indices_from(G)] += alpha
        c, info = scipy.linalg.lapack.dpotrf(G, lower=0)
        if info == 0:
            rcond, info = scipy.linalg.lapack.dpocon(c, np.linalg.norm(G, 1), uplo="U")
            if info == 0 and rcond > _CHOL_RCOND_MIN:
                return scipy.linalg.cho_solve((c, False), A.T @ b, check_finite=False)
    U, S, Vt = svd(A)
    beta = U.T @ b
    if alpha == 0.0:
        cutoff = S[0] * max(A.shape) * np.finfo(float).eps if S.size else 0.0
        filt = np.zeros_like(S)
        keep = S > cutoff
        filt[keep] = 1.0 / S[keep]
    else:
        filt = S / (S**2 + alpha)
    return Vt.T @ (filt * beta)
