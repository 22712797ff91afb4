"""Tensor-train vectors and operators.

Conventions
-----------
A :class:`TtVector` with cores ``G[k]`` of shape ``(r_{k-1}, n_k, r_k)``
represents the ``d``-way array ``A[i_1, ..., i_d] = G[1][:, i_1, :] ... G[d][:, i_d, :]``.
The flattened (dense vector) form is the C-order reshape of that array, so
the first core carries the most significant digit. A QTT vector of length
``2**q`` therefore stores bit ``q-1`` of the index in core 1 and bit 0 in
core ``q``. Space-time fields keep all time cores before all space cores,
which makes the flattened vector equal to ``kron(time, space)``.

A :class:`TtOperator` has cores ``M[k]`` of shape ``(r_{k-1}, n_k, m_k, r_k)``
(row index before column index) and dense form of shape
``(prod n_k, prod m_k)`` under the same digit order.
"""

from __future__ import annotations

import struct
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dense

__all__ = [
    "TtVector",
    "TtOperator",
    "tt_from_full",
    "tt_to_full",
    "tt_add",
    "tt_sub",
    "tt_scale",
    "tt_hadamard",
    "tt_matvec",
    "tt_matmat",
    "tt_kron",
    "tt_round",
    "tt_round_operator",
    "tt_orthogonalize",
    "tt_norm",
    "tt_dot",
    "tt_diag",
    "tt_zeros",
    "tt_evaluate",
    "tt_storage",
    "operator_to_full",
    "save_tt",
    "load_tt",
    "FULL_SIZE_CAP",
]

FULL_SIZE_CAP = 2**20


def _as_cores(cores: Sequence[np.ndarray], ndim: int) -> tuple[np.ndarray, ...]:
    out = []
    for k, c in enumerate(cores):
        c = np.asarray(c, dtype=float)
        if c.ndim != ndim:
            raise ValueError(f"core {k} has {c.ndim} indices, expected {ndim}")
        out.append(c)
    if not out:
        raise ValueError("a tensor train needs at least one core")
    if out[0].shape[0] != 1 or out[-1].shape[-1] != 1:
        raise ValueError("boundary ranks must be 1")
    for k in range(len(out) - 1):
        if out[k].shape[-1] != out[k + 1].shape[0]:
            raise ValueError(
                f"bond mismatch between cores {k} and {k + 1}: "
                f"{out[k].shape[-1]} != {out[k + 1].shape[0]}"
            )
    return tuple(out)


@dataclass(frozen=True, eq=False)
class TtVector:
    """A tensor train of 3-index cores. Treated as an immutable value."""

    cores: tuple[np.ndarray, ...]

    def __init__(self, cores: Sequence[np.ndarray]):
        object.__setattr__(self, "cores", _as_cores(cores, 3))

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def mode_sizes(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [1] + [c.shape[2] for c in self.cores]

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def size(self) -> int:
        return int(np.prod(self.mode_sizes, dtype=np.int64))

    def full(self, cap: int = FULL_SIZE_CAP) -> np.ndarray:
        return tt_to_full(self, cap)

    def dense(self, cap: int = FULL_SIZE_CAP) -> np.ndarray:
        """Flattened dense vector."""
        return tt_to_full(self, cap).reshape(-1)

    def __add__(self, other: TtVector) -> TtVector:
        return tt_add(self, other)

    def __sub__(self, other: TtVector) -> TtVector:
        return tt_sub(self, other)

    def __mul__(self, c: float) -> TtVector:
        return tt_scale(self, c)

    __rmul__ = __mul__

    def __neg__(self) -> TtVector:
        return tt_scale(self, -1.0)

    def __repr__(self) -> str:
        return f"TtVector(d={self.d}, modes={self.mode_sizes}, ranks={self.ranks})"


@dataclass(frozen=True, eq=False)
class TtOperator:
    """A TT-matrix (matrix product operator) of 4-index cores."""

    cores: tuple[np.ndarray, ...]

    def __init__(self, cores: Sequence[np.ndarray]):
        object.__setattr__(self, "cores", _as_cores(cores, 4))

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def row_sizes(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def col_sizes(self) -> list[int]:
        return [c.shape[2] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [1] + [c.shape[3] for c in self.cores]

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def shape(self) -> tuple[int, int]:
        return int(np.prod(self.row_sizes)), int(np.prod(self.col_sizes))

    def full(self, cap: int = FULL_SIZE_CAP) -> np.ndarray:
        return operator_to_full(self, cap)

    def __matmul__(self, other):
        if isinstance(other, TtVector):
            return tt_matvec(self, other)
        if isinstance(other, TtOperator):
            return tt_matmat(self, other)
        return NotImplemented

    def __add__(self, other: TtOperator) -> TtOperator:
        return tt_add(self, other)

    def __sub__(self, other: TtOperator) -> TtOperator:
        return tt_sub(self, other)

    def __mul__(self, c: float) -> TtOperator:
        return tt_scale(self, c)

    __rmul__ = __mul__

    def __neg__(self) -> TtOperator:
        return tt_scale(self, -1.0)

    def __repr__(self) -> str:
        return (
            f"TtOperator(d={self.d}, rows={self.row_sizes}, cols={self.col_sizes}, "
            f"ranks={self.ranks})"
        )


# ---------------------------------------------------------------------------
# operator <-> vector core reshapes


def _op_as_vector(A: TtOperator) -> TtVector:
    return TtVector([c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3]) for c in A.cores])


def _vector_as_op(x: TtVector, rows: Sequence[int], cols: Sequence[int]) -> TtOperator:
    return TtOperator(
        [c.reshape(c.shape[0], n, m, c.shape[2]) for c, n, m in zip(x.cores, rows, cols)]
    )


def _same_kind(x, y) -> None:
    if type(x) is not type(y):
        raise TypeError(f"cannot combine {type(x).__name__} with {type(y).__name__}")
    if len(x.cores) != len(y.cores):
        raise ValueError(f"core count mismatch: {len(x.cores)} vs {len(y.cores)}")
    for k, (a, b) in enumerate(zip(x.cores, y.cores)):
        if a.shape[1:-1] != b.shape[1:-1]:
            raise ValueError(f"mode mismatch at core {k}: {a.shape[1:-1]} vs {b.shape[1:-1]}")


# ---------------------------------------------------------------------------
# construction / conversion


def tt_zeros(mode_sizes: Sequence[int]) -> TtVector:
    """Zero tensor as a rank-1 chain of zero cores."""
    return TtVector([np.zeros((1, n, 1)) for n in mode_sizes])


def tt_from_full(T: np.ndarray, eps: float = 1e-12, mode_sizes: Sequence[int] | None = None,
                 chi_max: int | None = None) -> TtVector:
    """TT-SVD of a dense array.

    ``mode_sizes`` reshapes a flat input; otherwise ``T.shape`` is used. The
    per-bond truncation budget is ``eps * ||T|| / sqrt(d - 1)``, so the total
    error is at most ``eps * ||T||``.
    """
    T = np.asarray(T, dtype=float)
    if mode_sizes is None:
        mode_sizes = T.shape
    mode_sizes = [int(n) for n in mode_sizes]
    if int(np.prod(mode_sizes)) != T.size:
        raise ValueError(f"mode sizes {mode_sizes} do not match {T.size} entries")
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = len(mode_sizes)
    nrm = float(np.linalg.norm(T))
    if nrm == 0.0:
        return tt_zeros(mode_sizes)
    delta = eps * nrm / np.sqrt(max(d - 1, 1))
    cores = []
    r = 1
    rest = T.reshape(-1)
    for k in range(d - 1):
        mat = rest.reshape(r * mode_sizes[k], -1)
        U, S, Vt = dense.svd(mat)
        rk = dense.truncation_rank(S, delta, chi_max, absolute=True)
        cores.append(U[:, :rk].reshape(r, mode_sizes[k], rk))
        rest = S[:rk, None] * Vt[:rk]
        r = rk
    cores.append(rest.reshape(r, mode_sizes[-1], 1))
    return TtVector(cores)


def tt_to_full(x: TtVector, cap: int = FULL_SIZE_CAP) -> np.ndarray:
    """Contract all cores into the ``d``-way dense array."""
    if x.size > cap:
        raise ValueError(f"dense size {x.size} exceeds cap {cap}")
    res = x.cores[0].reshape(-1, x.cores[0].shape[-1])
    for c in x.cores[1:]:
        res = res @ c.reshape(c.shape[0], -1)
        res = res.reshape(-1, c.shape[-1])
    return res.reshape(x.mode_sizes)


def operator_to_full(A: TtOperator, cap: int = FULL_SIZE_CAP) -> np.ndarray:
    """Dense matrix of a TT operator."""
    nr, nc = A.shape
    if nr * nc > cap:
        raise ValueError(f"dense size {nr * nc} exceeds cap {cap}")
    d = A.d
    T = tt_to_full(_op_as_vector(A), cap)
    T = T.reshape([s for pair in zip(A.row_sizes, A.col_sizes) for s in pair])
    perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    return T.transpose(perm).reshape(nr, nc)


def tt_evaluate(x: TtVector, indices: np.ndarray) -> np.ndarray:
    """Entries of ``x`` at an ``(m, d)`` array of multi-indices."""
    indices = np.asarray(indices, dtype=np.intp)
    if indices.ndim == 1:
        indices = indices[None, :]
    vals = np.ones((indices.shape[0], 1))
    for k, c in enumerate(x.cores):
        vals = np.einsum("ma,amb->mb", vals, c[:, indices[:, k], :])
    return vals[:, 0]


def tt_storage(x: TtVector | TtOperator) -> int:
    """Number of stored core entries, ``sum_k r_{k-1} n_k r_k``."""
    return int(sum(c.size for c in x.cores))


# ---------------------------------------------------------------------------
# algebra


def tt_add(x, y):
    """Exact sum; ranks add (boundary cores are concatenated)."""
    _same_kind(x, y)
    if x.d == 1:
        return type(x)([x.cores[0] + y.cores[0]])
    cores = []
    for k, (a, b) in enumerate(zip(x.cores, y.cores)):
        mid = a.shape[1:-1]
        if k == 0:
            c = np.concatenate([a, b], axis=-1)
        elif k == x.d - 1:
            c = np.concatenate([a, b], axis=0)
        else:
            c = np.zeros((a.shape[0] + b.shape[0], *mid, a.shape[-1] + b.shape[-1]))
            c[: a.shape[0], ..., : a.shape[-1]] = a
            c[a.shape[0]:, ..., a.shape[-1]:] = b
        cores.append(c)
    return type(x)(cores)


def tt_scale(x, c: float):
    """Multiply every entry by ``c`` (scales the first core)."""
    c = float(c)
    if not np.isfinite(c):
        raise ValueError("scale factor must be finite")
    cores = list(x.cores)
    cores[0] = cores[0] * c
    return type(x)(cores)


def tt_sub(x, y):
    return tt_add(x, tt_scale(y, -1.0))


def tt_hadamard(x: TtVector, y: TtVector) -> TtVector:
    """Elementwise product; ranks multiply."""
    _same_kind(x, y)
    cores = []
    for a, b in zip(x.cores, y.cores):
        c = np.einsum("aib,cid->acibd", a, b)
        cores.append(c.reshape(a.shape[0] * b.shape[0], a.shape[1], a.shape[2] * b.shape[2]))
    return TtVector(cores)


def tt_matvec(A: TtOperator, x: TtVector) -> TtVector:
    """Operator-vector product by local contraction over the column index."""
    if A.col_sizes != x.mode_sizes:
        raise ValueError(f"operator columns {A.col_sizes} do not match vector modes {x.mode_sizes}")
    cores = []
    for M, G in zip(A.cores, x.cores):
        c = np.einsum("aijb,cjd->acibd", M, G)
        cores.append(c.reshape(M.shape[0] * G.shape[0], M.shape[1], M.shape[3] * G.shape[2]))
    return TtVector(cores)


def tt_matmat(A: TtOperator, B: TtOperator) -> TtOperator:
    """Operator-operator product."""
    if A.col_sizes != B.row_sizes:
        raise ValueError(f"operator columns {A.col_sizes} do not match rows {B.row_sizes}")
    cores = []
    for M, N in zip(A.cores, B.cores):
        c = np.einsum("aijb,cjkd->acikbd", M, N)
        cores.append(
            c.reshape(M.shape[0] * N.shape[0], M.shape[1], N.shape[2], M.shape[3] * N.shape[3])
        )
    return TtOperator(cores)


def tt_kron(x, y):
    """Kronecker product: the cores of ``x`` followed by those of ``y``."""
    if type(x) is not type(y):
        raise TypeError("tt_kron needs two vectors or two operators")
    return type(x)(list(x.cores) + list(y.cores))


def tt_diag(x: TtVector) -> TtOperator:
    """Diagonal operator ``diag(x)``."""
    cores = []
    for G in x.cores:
        n = G.shape[1]
        cores.append(np.einsum("aib,ij->aijb", G, np.eye(n)))
    return TtOperator(cores)


# ---------------------------------------------------------------------------
# orthogonalization, rounding, norms


def _orth_right_to_left(cores: list[np.ndarray]) -> list[np.ndarray]:
    """Make cores 2..d right-orthonormal; the first core carries the norm."""
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        c = cores[k]
        r0, n, r1 = c.shape
        Q, R = dense.qr(c.reshape(r0, n * r1).T)
        cores[k] = Q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], R.T, axes=(2, 0))
    return cores


def _orth_left_to_right(cores: list[np.ndarray]) -> list[np.ndarray]:
    cores = list(cores)
    for k in range(len(cores) - 1):
        c = cores[k]
        r0, n, r1 = c.shape
        Q, R = dense.qr(c.reshape(r0 * n, r1))
        cores[k] = Q.reshape(r0, n, -1)
        cores[k + 1] = np.tensordot(R, cores[k + 1], axes=(1, 0))
    return cores


def tt_orthogonalize(x: TtVector, direction: str = "left") -> TtVector:
    """Orthogonalize all cores but one.

    ``direction="left"`` makes cores ``1..d-1`` left-orthonormal (the last core
    carries the norm); ``"right"`` is the mirror image.
    """
    if direction == "left":
        return TtVector(_orth_left_to_right(list(x.cores)))
    if direction == "right":
        return TtVector(_orth_right_to_left(list(x.cores)))
    raise ValueError(f"unknown direction {direction!r}")


def tt_round(x: TtVector, eps: float = 1e-12, chi_max: int | None = None) -> TtVector:
    """TT rounding: right-to-left QR sweep, then left-to-right truncated SVDs.

    The per-bond budget is ``eps * ||x|| / sqrt(d - 1)`` so that
    ``||x - round(x)|| <= eps * ||x||`` whenever ``chi_max`` does not bind.
    """
    if isinstance(x, TtOperator):
        return tt_round_operator(x, eps, chi_max)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if chi_max is not None and chi_max < 1:
        raise ValueError("chi_max must be at least 1")
    d = x.d
    cores = _orth_right_to_left(list(x.cores))
    nrm = float(np.linalg.norm(cores[0]))
    if nrm == 0.0 or not np.isfinite(nrm):
        if not np.isfinite(nrm):
            raise FloatingPointError("non-finite tensor train in tt_round")
        return tt_zeros(x.mode_sizes)
    delta = eps * nrm / np.sqrt(max(d - 1, 1))
    for k in range(d - 1):
        c = cores[k]
        r0, n, r1 = c.shape
        U, S, Vt = dense.svd(c.reshape(r0 * n, r1))
        rk = dense.truncation_rank(S, delta, chi_max, absolute=True)
        cores[k] = U[:, :rk].reshape(r0, n, rk)
        cores[k + 1] = np.tensordot(S[:rk, None] * Vt[:rk], cores[k + 1], axes=(1, 0))
    return TtVector(cores)


def tt_round_operator(A: TtOperator, eps: float = 1e-12, chi_max: int | None = None) -> TtOperator:
    """Round an operator by treating each core's index pair as one mode."""
    return _vector_as_op(tt_round(_op_as_vector(A), eps, chi_max), A.row_sizes, A.col_sizes)


def tt_norm(x: TtVector | TtOperator) -> float:
    """Euclidean (Frobenius) norm via a QR sweep."""
    if isinstance(x, TtOperator):
        x = _op_as_vector(x)
    R = np.ones((1, 1))
    for c in x.cores:
        c = np.tensordot(R, c, axes=(1, 0))
        r0, n, r1 = c.shape
        mat = c.reshape(r0 * n, r1)
        if mat.shape[0] >= mat.shape[1]:
            _, R = np.linalg.qr(mat, mode="reduced")
        else:
            R = mat
    return float(np.linalg.norm(R))


def tt_dot(x: TtVector, y: TtVector) -> float:
    """Inner product ``<x, y>``."""
    _same_kind(x, y)
    E = np.ones((1, 1))
    for a, b in zip(x.cores, y.cores):
        E = np.einsum("ac,aib,cid->bd", E, a, b, optimize=True)
    return float(E[0, 0])


# ---------------------------------------------------------------------------
# serialization
#
# Layout (little-endian): magic b"MLQTT1\0\0", kind byte (0 = vector,
# 1 = operator), uint32 core count, then per core: uint32 ndim, ndim x
# uint64 shape, row-major float64 entries.

_MAGIC = b"MLQTT1\x00\x00"


def save_tt(path: str | Path, x: TtVector | TtOperator) -> None:
    kind = 0 if isinstance(x, TtVector) else 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BI", kind, len(x.cores)))
        for c in x.cores:
            fh.write(struct.pack("<I", c.ndim))
            fh.write(struct.pack(f"<{c.ndim}Q", *c.shape))
            fh.write(np.ascontiguousarray(c, dtype="<f8").tobytes())


def load_tt(path: str | Path) -> TtVector | TtOperator:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a tensor-train checkpoint")
        try:
            kind, ncores = struct.unpack("<BI", fh.read(5))
            if kind not in (0, 1):
                raise ValueError(f"{path}: unknown tensor kind {kind}")
            cores = []
            for _ in range(ncores):
                (ndim,) = struct.unpack("<I", fh.read(4))
                shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
                count = int(np.prod(shape))
                raw = fh.read(8 * count)
                if len(raw) != 8 * count:
                    raise ValueError(f"{path}: truncated core data")
                cores.append(np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float))
        except struct.error as exc:
            raise ValueError(f"{path}: truncated header") from exc
    return TtVector(cores) if kind == 0 else TtOperator(cores)
