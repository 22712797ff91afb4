"""Exact QTT constructions of the banded finite-difference operators.

All chains follow the bit order of :mod:`mlqtt.tt` (first core = most
significant bit). The bond states of the Toeplitz chains track, from the
most significant digit down, whether the leading digits of row and column
index are equal, differ by a pending carry of the lower or upper shift, or
are all zero / all one (for the corner corrections).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tt import TtOperator, TtVector, tt_add, tt_from_full, tt_scale, tt_zeros

__all__ = [
    "BoundaryCondition",
    "GridSpec",
    "qtt_toeplitz3",
    "qtt_circulant3",
    "qtt_penta5",
    "qtt_circulant5",
    "qtt_identity",
    "qtt_ones",
    "qtt_basis",
    "qtt_from_vector",
    "build_time_operator",
    "build_space_operator",
    "boundary_source",
    "TIME_OPERATORS",
    "SPACE_OPERATORS",
]

_I = np.eye(2)
_J = np.array([[0.0, 1.0], [0.0, 0.0]])
_Jp = np.array([[0.0, 0.0], [1.0, 0.0]])
_I1 = np.array([[1.0, 0.0], [0.0, 0.0]])
_I2 = np.array([[0.0, 0.0], [0.0, 1.0]])
_Z = np.zeros((2, 2))

TIME_OPERATORS = ("D_t", "J_t", "K_t", "D_tt")
SPACE_OPERATORS = ("D_x", "D_xx", "D_xxx")


# ---------------------------------------------------------------------------
# grid and boundary data


_BC_KINDS = ("dirichlet", "neumann", "none", "periodic")


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary condition at one end of the interval.

    ``value`` is the boundary value ``u_b`` for Dirichlet and the outward
    normal derivative for Neumann; it is ignored otherwise.
    """

    kind: str = "dirichlet"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in _BC_KINDS:
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")

    @property
    def a(self) -> float:
        """Ghost-cell coefficient: ``u_ghost = a * u_interior + b``."""
        return {"dirichlet": -1.0, "neumann": 1.0, "none": 0.0, "periodic": 0.0}[self.kind]

    def b(self, dx: float) -> float:
        """Ghost-cell offset for spacing ``dx``."""
        if self.kind == "dirichlet":
            return 2.0 * self.value
        if self.kind == "neumann":
            return self.value * dx
        return 0.0

    @property
    def homogeneous(self) -> bool:
        return self.kind in ("none", "periodic") or self.value == 0.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid with ``2**q_x`` cells and ``2**q_t`` time steps."""

    q_x: int
    q_t: int
    x_a: float
    x_b: float
    T: float

    def __post_init__(self):
        if self.q_x < 1 or self.q_t < 1:
            raise ValueError("grid exponents must be positive")
        if not self.x_b > self.x_a or not self.T > 0:
            raise ValueError("grid spacings must be positive")

    @property
    def n_x(self) -> int:
        return 2**self.q_x

    @property
    def n_t(self) -> int:
        return 2**self.q_t

    @property
    def dx(self) -> float:
        return (self.x_b - self.x_a) / self.n_x

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def q(self) -> int:
        return self.q_x + self.q_t

    @property
    def x(self) -> np.ndarray:
        """Cell centers."""
        return self.x_a + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def t(self) -> np.ndarray:
        """Time nodes ``t_1 .. t_{N_t}`` (the unknown levels)."""
        return np.arange(1, self.n_t + 1) * self.dt

    def coarsen(self, levels: int = 1) -> GridSpec:
        return GridSpec(self.q_x - levels, self.q_t - levels, self.x_a, self.x_b, self.T)


# ---------------------------------------------------------------------------
# chain builders


def _check_n(n: int) -> None:
    if int(n) != n or n < 2:
        raise ValueError(f"operator chains need at least 2 cores, got n={n}")


def _chain(first: list[np.ndarray], middle: list[list[np.ndarray]], last: list[np.ndarray],
           n: int) -> TtOperator:
    """Assemble an MPO from block rows of 2x2 matrices."""
    r = len(first)
    c0 = np.stack(first, axis=-1)[None]  # (1, 2, 2, r)
    mid = np.zeros((r, 2, 2, r))
    for a in range(r):
        for b in range(r):
            mid[a, :, :, b] = middle[a][b]
    cl = np.stack(last, axis=0)[..., None]  # (r, 2, 2, 1)
    return TtOperator([c0] + [mid] * (n - 2) + [cl])


def _toeplitz_middle() -> list[list[np.ndarray]]:
    m = [[_Z] * 5 for _ in range(5)]
    m[0][0] = _I1
    m[1][1], m[1][2], m[1][3] = _I, _Jp, _J
    m[2][2] = _J
    m[3][3] = _Jp
    m[4][4] = _I2
    return m


def qtt_penta5(n: int, l2: float, l1: float, d: float, u1: float, u2: float,
               a1: tuple[float, float, float] = (0.0, 0.0, 0.0),
               a2: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> TtOperator:
    """Pentadiagonal Toeplitz matrix of size ``2**n`` with corner corrections.

    ``a1 = (a11, a12, a13)`` are added to entries ``(0,0), (0,1), (1,0)`` and
    ``a2 = (a21, a22, a23)`` to ``(N-1,N-1), (N-1,N-2), (N-2,N-1)``.
    """
    _check_n(n)
    a11, a12, a13 = a1
    a21, a22, a23 = a2
    first = [_I1, _I, _Jp, _J, _I2]
    last = [
        a11 * _I1 + a12 * _J + a13 * _Jp,
        l1 * _Jp + d * _I + u1 * _J,
        l1 * _J + l2 * _I,
        u1 * _Jp + u2 * _I,
        a21 * _I2 + a22 * _Jp + a23 * _J,
    ]
    return _chain(first, _toeplitz_middle(), last, n)


def qtt_toeplitz3(n: int, l: float, d: float, u: float, a1: float = 0.0, a2: float = 0.0) -> TtOperator:
    """Tridiagonal Toeplitz matrix with corners ``a1*l + d`` and ``a2*u + d``."""
    return qtt_penta5(n, 0.0, l, d, u, 0.0, (a1 * l, 0.0, 0.0), (a2 * u, 0.0, 0.0))


def qtt_circulant5(n: int, l2: float, l1: float, d: float, u1: float, u2: float) -> TtOperator:
    """Circulant pentadiagonal matrix of size ``2**n``."""
    _check_n(n)
    first = [_I, _Jp + _J, _J + _Jp]
    middle = [[_I, _Jp, _J], [_Z, _J, _Z], [_Z, _Z, _Jp]]
    last = [l1 * _Jp + d * _I + u1 * _J, l1 * _J + l2 * _I, u1 * _Jp + u2 * _I]
    return _chain(first, middle, last, n)


def qtt_circulant3(n: int, l: float, d: float, u: float) -> TtOperator:
    """Circulant tridiagonal matrix (wrap entries ``l`` top-right, ``u`` bottom-left)."""
    return qtt_circulant5(n, 0.0, l, d, u, 0.0)


def qtt_identity(n: int, mode: int = 2) -> TtOperator:
    return TtOperator([np.eye(mode)[None, :, :, None] for _ in range(n)])


def qtt_ones(n: int, mode: int = 2) -> TtVector:
    return TtVector([np.ones((1, mode, 1)) for _ in range(n)])


def qtt_basis(n: int, k: int) -> TtVector:
    """Unit vector with its one at the 1-based position ``k``."""
    if not 1 <= k <= 2**n:
        raise ValueError(f"basis index {k} outside 1..{2**n}")
    bits = [(k - 1) >> (n - 1 - j) & 1 for j in range(n)]
    cores = []
    for b in bits:
        c = np.zeros((1, 2, 1))
        c[0, b, 0] = 1.0
        cores.append(c)
    return TtVector(cores)


def qtt_from_vector(v: np.ndarray, eps: float = 1e-14, chi_max: int | None = None) -> TtVector:
    """QTT of a dense vector of length ``2**q``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    q = int(round(np.log2(v.size)))
    if 2**q != v.size:
        raise ValueError(f"length {v.size} is not a power of two")
    return tt_from_full(v, eps, [2] * q, chi_max)


# ---------------------------------------------------------------------------
# named operators


def build_time_operator(name: str, q_t: int) -> TtOperator:
    """Lower-triangular time-stepping matrices on ``2**q_t`` levels."""
    if name == "D_t":
        return qtt_toeplitz3(q_t, -1.0, 1.0, 0.0)
    if name == "J_t":
        return qtt_toeplitz3(q_t, 0.5, 0.5, 0.0)
    if name == "K_t":
        return qtt_penta5(q_t, 0.25, 0.5, 0.25, 0.0, 0.0)
    if name == "D_tt":
        return qtt_penta5(q_t, 1.0, -2.0, 1.0, 0.0, 0.0)
    if name == "I_t":
        return qtt_identity(q_t)
    raise ValueError(f"unknown time operator {name!r}; expected one of {TIME_OPERATORS}")


def _periodic(bc_left: BoundaryCondition, bc_right: BoundaryCondition) -> bool:
    if (bc_left.kind == "periodic") != (bc_right.kind == "periodic"):
        raise ValueError("periodic conditions must be set at both ends")
    return bc_left.kind == "periodic"


def build_space_operator(name: str, q_x: int, dx: float, bc_left: BoundaryCondition,
                         bc_right: BoundaryCondition) -> TtOperator:
    """Central-difference operators with ghost-cell boundary elimination.

    ``D_xxx`` is always the circulant five-point stencil. It is accepted with
    periodic or homogeneous Dirichlet ends (the latter assumes the solution
    vanishes near the boundary) and rejected otherwise.
    """
    if dx <= 0:
        raise ValueError("dx must be positive")
    periodic = _periodic(bc_left, bc_right)
    a1, a2 = bc_left.a, bc_right.a
    if name == "D_x":
        op = qtt_circulant3(q_x, -1.0, 0.0, 1.0) if periodic else qtt_toeplitz3(q_x, -1.0, 0.0, 1.0, a1, a2)
        return tt_scale(op, 1.0 / (2.0 * dx))
    if name == "D_xx":
        op = qtt_circulant3(q_x, 1.0, -2.0, 1.0) if periodic else qtt_toeplitz3(q_x, 1.0, -2.0, 1.0, a1, a2)
        return tt_scale(op, 1.0 / dx**2)
    if name == "D_xxx":
        for bc in (bc_left, bc_right):
            if bc.kind not in ("periodic", "dirichlet") or not bc.homogeneous:
                raise ValueError(
                    "D_xxx is circulant; only periodic or homogeneous Dirichlet ends are supported"
                )
        return tt_scale(qtt_circulant5(q_x, -1.0, 2.0, 0.0, -2.0, 1.0), 1.0 / (2.0 * dx**3))
    raise ValueError(f"unknown space operator {name!r}; expected one of {SPACE_OPERATORS}")


def boundary_source(bc_left: BoundaryCondition, bc_right: BoundaryCondition, q_x: int, dx: float,
                    name: str) -> TtVector:
    """Inhomogeneous ghost-cell contribution of a space operator.

    The ghost values ``u_0 = a1 u_1 + b1`` and ``u_{N+1} = a2 u_N + b2`` put
    ``stencil_coefficient * b`` into the first and last rows; the result is
    that pair of entries as a QTT vector (the zero chain when homogeneous).
    """
    if name not in SPACE_OPERATORS:
        raise ValueError(f"unknown space operator {name!r}")
    if _periodic(bc_left, bc_right) or name == "D_xxx":
        return tt_zeros([2] * q_x)
    b1, b2 = bc_left.b(dx), bc_right.b(dx)
    if name == "D_x":
        c1, c2 = -b1 / (2.0 * dx), b2 / (2.0 * dx)
    else:
        c1, c2 = b1 / dx**2, b2 / dx**2
    out = tt_zeros([2] * q_x)
    if c1 != 0.0:
        out = tt_scale(qtt_basis(q_x, 1), c1)
    if c2 != 0.0:
        last = tt_scale(qtt_basis(q_x, 2**q_x), c2)
        out = last if c1 == 0.0 else tt_add(out, last)
    return out
