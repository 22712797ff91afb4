"""Two-site DMRG for TT linear systems ``J x = b``.

Galerkin variant: with the cores left of the active pair left-orthonormal
and those right of it right-orthonormal, the interface matrices project
``J`` and ``b`` onto the pair, the small dense system is solved with a
Tikhonov-regularized SVD pseudoinverse, and the merged pair is split back by
a truncated SVD whose rank adapts to the solution.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import dense
from .tt import TtOperator, TtVector, tt_matvec, tt_norm, tt_round, tt_sub, tt_zeros

__all__ = ["DmrgConfig", "DmrgResult", "dmrg_solve", "local_system", "relative_residual"]


@dataclass(frozen=True)
class DmrgConfig:
    """Controls of the DMRG solve.

    Attributes
    ----------
    eps_dmrg : float
        Target relative residual ``||J x - b|| / ||b||``.
    n_sweeps : int
        Budget of directional sweeps (left-to-right and right-to-left each count once).
    chi : int or None
        Bond-dimension cap of the iterate.
    alpha : float
        Tikhonov parameter, applied to the local matrix as is (not scaled).
    local_trunc : float
        Relative SVD tolerance when splitting the merged pair.
    """

    eps_dmrg: float = 1e-3
    n_sweeps: int = 3
    chi: int | None = None
    alpha: float = 0.0
    local_trunc: float = 1e-10

    def __post_init__(self):
        if self.eps_dmrg <= 0:
            raise ValueError("eps_dmrg must be positive")
        if self.n_sweeps < 1:
            raise ValueError("n_sweeps must be at least 1")
        if self.chi is not None and self.chi < 1:
            raise ValueError("chi must be at least 1")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")


class DmrgResult(NamedTuple):
    x: TtVector
    achieved_residual: float
    sweeps_used: int


def relative_residual(J: TtOperator, x: TtVector, b: TtVector) -> float:
    """``||J x - b|| / ||b||`` (``||J x||`` when ``b = 0``)."""
    r = tt_norm(tt_sub(tt_matvec(J, x), b))
    nb = tt_norm(b)
    return r / nb if nb > 0 else r


# ---------------------------------------------------------------------------
# environment updates


def _left_op(LA: np.ndarray, X: np.ndarray, M: np.ndarray) -> np.ndarray:
    # LA[y, a, x], bra X[y, i, y'], M[a, i, j, b], ket X[x, j, x']
    t = np.tensordot(LA, X, axes=(2, 0))  # y a j x'
    t = np.tensordot(t, M, axes=([1, 2], [0, 2]))  # y x' i b
    t = np.tensordot(X, t, axes=([0, 1], [0, 2]))  # y' x' b
    return t.transpose(0, 2, 1)


def _right_op(RA: np.ndarray, X: np.ndarray, M: np.ndarray) -> np.ndarray:
    # RA[y', b, x'], result [y, a, x]
    t = np.tensordot(X, RA, axes=(2, 2))  # x j y' b
    t = np.tensordot(M, t, axes=([2, 3], [1, 3]))  # a i x y'
    t = np.tensordot(X, t, axes=([1, 2], [1, 3]))  # y a x
    return t


def _left_rhs(Lb: np.ndarray, X: np.ndarray, G: np.ndarray) -> np.ndarray:
    # Lb[y, c], X[y, i, y'], G[c, i, c']
    t = np.tensordot(Lb, X, axes=(0, 0))  # c i y'
    return np.tensordot(t, G, axes=([0, 1], [0, 1]))  # y' c'


def _right_rhs(Rb: np.ndarray, X: np.ndarray, G: np.ndarray) -> np.ndarray:
    t = np.tensordot(G, Rb, axes=(2, 1))  # c i y'
    return np.tensordot(X, t, axes=([1, 2], [1, 2]))  # y c


def _assemble_local(LA, M1, M2, RA, Lb, G1, G2, Rb) -> tuple[np.ndarray, np.ndarray]:
    t = np.tensordot(LA, M1, axes=(1, 0))  # y x i1 j1 b
    t = np.tensordot(t, M2, axes=(4, 0))  # y x i1 j1 i2 j2 c
    t = np.tensordot(t, RA, axes=(6, 1))  # y x i1 j1 i2 j2 z w
    t = t.transpose(0, 2, 4, 6, 1, 3, 5, 7)  # (y i1 i2 z), (x j1 j2 w)
    n = t.shape[0] * t.shape[1] * t.shape[2] * t.shape[3]
    A = t.reshape(n, -1)
    s = np.tensordot(Lb, G1, axes=(1, 0))  # y i1 c'
    s = np.tensordot(s, G2, axes=(2, 0))  # y i1 i2 c''
    s = np.tensordot(s, Rb, axes=(3, 1))  # y i1 i2 z
    return A, s.reshape(-1)


def local_system(J: TtOperator, b: TtVector, x: TtVector, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Projected system of the pair ``(k, k+1)`` built from scratch.

    Assumes cores ``< k`` of ``x`` are left-orthonormal and cores ``> k+1``
    right-orthonormal; used to cross-check the cached environments.
    """
    d = x.d
    LA, Lb = np.ones((1, 1, 1)), np.ones((1, 1))
    for j in range(k):
        LA = _left_op(LA, x.cores[j], J.cores[j])
        Lb = _left_rhs(Lb, x.cores[j], b.cores[j])
    RA, Rb = np.ones((1, 1, 1)), np.ones((1, 1))
    for j in range(d - 1, k + 1, -1):
        RA = _right_op(RA, x.cores[j], J.cores[j])
        Rb = _right_rhs(Rb, x.cores[j], b.cores[j])
    return _assemble_local(LA, J.cores[k], J.cores[k + 1], RA, Lb, b.cores[k], b.cores[k + 1], Rb)


# ---------------------------------------------------------------------------
# solver


def _right_orthogonalize(cores: list[np.ndarray]) -> list[np.ndarray]:
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        Q, R = dense.qr(cores[k].reshape(r0, n * r1).T)
        cores[k] = Q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], R.T, axes=(2, 0))
    return cores


def dmrg_solve(
    J: TtOperator,
    b: TtVector,
    x0: TtVector | None = None,
    cfg: DmrgConfig | None = None,
    *,
    on_local: Callable[[int, np.ndarray, np.ndarray, list[np.ndarray]], None] | None = None,
) -> DmrgResult:
    """Solve ``J x = b`` by alternating two-site sweeps.

    Parameters
    ----------
    J, b : TtOperator, TtVector
        Square operator and right-hand side with matching modes.
    x0 : TtVector, optional
        Initial guess; defaults to ``b`` rounded at ``local_trunc`` and the rank cap.
    cfg : DmrgConfig, optional
    on_local : callable, optional
        Called as ``on_local(k, A_loc, b_loc, cores)`` before every local
        solve (testing hook).

    Returns
    -------
    DmrgResult
        Solution, its true relative residual and the number of sweeps run.
    """
    cfg = cfg or DmrgConfig()
    if J.row_sizes != J.col_sizes:
        raise ValueError("J must be square")
    if J.col_sizes != b.mode_sizes:
        raise ValueError(f"operator modes {J.col_sizes} do not match right-hand side {b.mode_sizes}")
    d = b.d
    if tt_norm(b) == 0.0:
        return DmrgResult(tt_zeros(b.mode_sizes), 0.0, 0)
    if x0 is None:
        x0 = tt_round(b, cfg.local_trunc, cfg.chi)
    elif x0.mode_sizes != b.mode_sizes:
        raise ValueError("initial guess does not match the right-hand side")
    if d == 1:
        A = J.cores[0][0, :, :, 0]
        x = dense.tikhonov_solve(A, b.cores[0][0, :, 0], cfg.alpha)
        xt = TtVector([x[None, :, None]])
        return DmrgResult(xt, relative_residual(J, xt, b), 1)

    cores = _right_orthogonalize(list(x0.cores))
    LA = [None] * (d + 1)
    Lb = [None] * (d + 1)
    RA = [None] * (d + 1)
    Rb = [None] * (d + 1)
    LA[0], Lb[0] = np.ones((1, 1, 1)), np.ones((1, 1))
    RA[d], Rb[d] = np.ones((1, 1, 1)), np.ones((1, 1))
    for k in range(d - 1, 1, -1):
        RA[k] = _right_op(RA[k + 1], cores[k], J.cores[k])
        Rb[k] = _right_rhs(Rb[k + 1], cores[k], b.cores[k])

    res = np.inf
    sweeps = 0
    x = TtVector(cores)
    for sweep in range(cfg.n_sweeps):
        forward = sweep % 2 == 0
        order = range(d - 1) if forward else range(d - 2, -1, -1)
        for k in order:
            A_loc, b_loc = _assemble_local(
                LA[k], J.cores[k], J.cores[k + 1], RA[k + 2], Lb[k], b.cores[k], b.cores[k + 1], Rb[k + 2]
            )
            if on_local is not None:
                on_local(k, A_loc, b_loc, list(cores))
            if not (np.all(np.isfinite(A_loc)) and np.all(np.isfinite(b_loc))):
                raise FloatingPointError(f"non-finite local system at cores ({k}, {k + 1})")
            w = dense.tikhonov_solve(A_loc, b_loc, cfg.alpha)
            r0, n1, n2, r2 = cores[k].shape[0], cores[k].shape[1], cores[k + 1].shape[1], cores[k + 1].shape[2]
            U, S, Vt = dense.svd(w.reshape(r0 * n1, n2 * r2))
            rk = dense.truncation_rank(S, cfg.local_trunc, cfg.chi)
            U, S, Vt = U[:, :rk], S[:rk], Vt[:rk]
            if forward:
                cores[k] = U.reshape(r0, n1, rk)
                cores[k + 1] = (S[:, None] * Vt).reshape(rk, n2, r2)
                LA[k + 1] = _left_op(LA[k], cores[k], J.cores[k])
                Lb[k + 1] = _left_rhs(Lb[k], cores[k], b.cores[k])
            else:
                cores[k] = (U * S).reshape(r0, n1, rk)
                cores[k + 1] = Vt.reshape(rk, n2, r2)
                RA[k + 1] = _right_op(RA[k + 2], cores[k + 1], J.cores[k + 1])
                Rb[k + 1] = _right_rhs(Rb[k + 2], cores[k + 1], b.cores[k + 1])
        sweeps = sweep + 1
        x = TtVector(cores)
        res = relative_residual(J, x, b)
        if not np.isfinite(res):
            raise FloatingPointError("DMRG iterate became non-finite")
        if res <= cfg.eps_dmrg:
            break
    return DmrgResult(x, float(res), sweeps)
