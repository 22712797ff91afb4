"""Benchmark PDEs of the form ``d^m u/dt^m + L u + N(u) = s``.

Each :class:`ProblemSpec` records the linear operator as a list of
``(coefficient, operator name)`` terms, the nonlinearity
``N(u) = coeff * K g(u)`` (``K`` the identity or ``D_x``), boundary and
initial data and, when known, a closed-form reference solution.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .cross import tt_apply_elementwise
from .operators import (
    BoundaryCondition,
    GridSpec,
    boundary_source,
    build_space_operator,
    qtt_identity,
)
from .tt import TtOperator, TtVector, tt_add, tt_hadamard, tt_kron, tt_matvec, tt_round, tt_scale, tt_zeros

__all__ = [
    "ProblemSpec",
    "PROBLEMS",
    "NONLINEARITIES",
    "make_problem",
    "analytic_solution",
    "linear_operator",
    "nonlinear_space_operator",
    "nonlinear_apply",
    "nonlinear_jacobian_diag",
    "nonlinear_g",
    "nonlinear_dg",
    "default_grid",
]

NONLINEARITIES = (
    "none",
    "quadratic_reaction",
    "conservative_advection",
    "conservative_advection_dispersive",
    "sine",
)

Field = Callable[[np.ndarray], np.ndarray]
SpaceTimeField = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """One PDE benchmark.

    Attributes
    ----------
    linear_terms
        ``(coefficient, name)`` pairs with ``name`` in ``{"I", "D_x", "D_xx", "D_xxx"}``;
        the spatial operator is their sum.
    nonlinearity, nl_coeff
        Kind of ``N`` and its scalar factor (``r`` for the reaction, ``1/2``
        for the conservative advection, ``1`` for the sine term).
    u0, ut0
        Initial value and (for ``m = 2``) initial velocity as functions of ``x``.
    source
        ``s(x, t)`` or ``None`` for the homogeneous equation.
    analytic
        Reference ``u(x, t)`` or ``None``.
    """

    name: str
    m: int
    x_a: float
    x_b: float
    T: float
    linear_terms: tuple[tuple[float, str], ...]
    nonlinearity: str
    nl_coeff: float
    bc_left: BoundaryCondition
    bc_right: BoundaryCondition
    u0: Field
    ut0: Field | None = None
    source: SpaceTimeField | None = None
    analytic: SpaceTimeField | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m not in (1, 2):
            raise ValueError("temporal order m must be 1 or 2")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.m == 2 and self.ut0 is None:
            raise ValueError("second-order problems need an initial velocity")

    def grid(self, q_x: int, q_t: int) -> GridSpec:
        return GridSpec(q_x, q_t, self.x_a, self.x_b, self.T)


# ---------------------------------------------------------------------------
# closed forms


def _fisher(A: float, D: float, r: float) -> tuple[Field, SpaceTimeField]:
    c = 5.0 / np.sqrt(6.0)

    def u(x, t):
        z = np.asarray(x) - c * np.asarray(t)
        # 1 / (1 + A e^{z/sqrt6}) written as a logistic for overflow safety
        return expit(-z / np.sqrt(6.0) - np.log(A)) ** 2

    return (lambda x: u(x, 0.0)), u


def _burgers(nu: float, a: float) -> SpaceTimeField:
    def u(x, t):
        e = np.exp(-np.pi**2 * nu * np.asarray(t))
        return 2 * nu * np.pi * e * np.sin(np.pi * x) / (a + e * np.cos(np.pi * x))

    return u


def _kink(c: float, x0: float) -> tuple[SpaceTimeField, SpaceTimeField]:
    g = 1.0 / np.sqrt(1.0 - c * c)

    def u(x, t):
        return 4.0 * np.arctan(np.exp(g * (np.asarray(x) - c * np.asarray(t) - x0)))

    def ut(x, t):
        return -2.0 * g * c / np.cosh(g * (np.asarray(x) - c * np.asarray(t) - x0))

    return u, ut


def _kdv(c: float, x0: float) -> SpaceTimeField:
    def u(x, t):
        return 3.0 * c / np.cosh(np.sqrt(c) * (np.asarray(x) - c * np.asarray(t) - x0) / 2.0) ** 2

    return u


def _manufactured_reaction() -> tuple[SpaceTimeField, SpaceTimeField]:
    """``u_t + u + u^2 = s`` with exact ``u = (1 + sin(pi x)/2) cos(t)``."""

    def u(x, t):
        return (1.0 + 0.5 * np.sin(np.pi * np.asarray(x))) * np.cos(t)

    def s(x, t):
        p = 1.0 + 0.5 * np.sin(np.pi * np.asarray(x))
        val = p * np.cos(t)
        return -p * np.sin(t) + val + val**2

    return u, s


def make_problem(name: str, **overrides) -> ProblemSpec:
    """Benchmark by name with optional coefficient overrides.

    Names: ``fisher_kpp``, ``burgers_parabolic``, ``burgers_shock``,
    ``sine_gordon_kink``, ``kdv_soliton``, plus the test problems ``heat``
    (linear diffusion) and ``manufactured_reaction``.
    """
    dirichlet0 = BoundaryCondition("dirichlet", 0.0)
    if name == "fisher_kpp":
        D, r, A, L = (overrides.pop(k, v) for k, v in (("D", 1.0), ("r", 1.0), ("A", 1.0), ("L", 40.0)))
        T = overrides.pop("T", 2.0)
        u0, u = _fisher(A, D, r)
        exact = D == 1.0 and r == 1.0
        spec = ProblemSpec(
            name, 1, -L / 2, L / 2, T, ((-D, "D_xx"), (-r, "I")), "quadratic_reaction", r,
            BoundaryCondition("dirichlet", 1.0), dirichlet0, u0,
            analytic=u if exact else None, params=dict(D=D, r=r, A=A, L=L, c=5.0 / np.sqrt(6.0)),
        )
    elif name == "burgers_parabolic":
        nu, a = overrides.pop("nu", 0.01), overrides.pop("a", 1.01)
        T = overrides.pop("T", 1.0)
        u = _burgers(nu, a)
        spec = ProblemSpec(
            name, 1, 0.0, 1.0, T, ((-nu, "D_xx"),), "conservative_advection", 0.5,
            dirichlet0, dirichlet0, lambda x: u(x, 0.0), analytic=u,
            params=dict(nu=nu, a=a, Re_max=2 * np.pi),
        )
    elif name == "burgers_shock":
        nu = overrides.pop("nu", 0.01)
        T = overrides.pop("T", 1.0)
        spec = ProblemSpec(
            name, 1, -np.pi, np.pi, T, ((-nu, "D_xx"),), "conservative_advection", 0.5,
            dirichlet0, dirichlet0, lambda x: -np.sin(x), params=dict(nu=nu),
        )
    elif name == "sine_gordon_kink":
        c, x0 = overrides.pop("c", 0.5), overrides.pop("x0", 0.0)
        T = overrides.pop("T", 10.0)
        u, ut = _kink(c, x0)
        spec = ProblemSpec(
            name, 2, -10.0, 15.0, T, ((-1.0, "D_xx"),), "sine", 1.0,
            dirichlet0, BoundaryCondition("neumann", 0.0),
            lambda x: u(x, 0.0), ut0=lambda x: ut(x, 0.0), analytic=u,
            params=dict(c=c, x0=x0, gamma=1.0 / np.sqrt(1.0 - c * c)),
        )
    elif name == "kdv_soliton":
        c, x0, L = overrides.pop("c", 1.0), overrides.pop("x0", -1.0), overrides.pop("L", 30.0)
        T = overrides.pop("T", 2.0)
        u = _kdv(c, x0)
        spec = ProblemSpec(
            name, 1, -L / 2, L / 2, T, ((1.0, "D_xxx"),), "conservative_advection_dispersive", 0.5,
            dirichlet0, dirichlet0, lambda x: u(x, 0.0), analytic=u, params=dict(c=c, x0=x0, L=L),
        )
    elif name == "heat":
        D = overrides.pop("D", 1.0)
        T = overrides.pop("T", 0.1)

        def u(x, t):
            return np.exp(-D * np.pi**2 * np.asarray(t)) * np.sin(np.pi * np.asarray(x))

        spec = ProblemSpec(
            name, 1, 0.0, 1.0, T, ((-D, "D_xx"),), "none", 0.0, dirichlet0, dirichlet0,
            lambda x: u(x, 0.0), analytic=u, params=dict(D=D),
        )
    elif name == "manufactured_reaction":
        T = overrides.pop("T", 1.0)
        u, s = _manufactured_reaction()
        none = BoundaryCondition("none")
        spec = ProblemSpec(
            name, 1, 0.0, 1.0, T, ((1.0, "I"),), "quadratic_reaction", 1.0, none, none,
            lambda x: u(x, 0.0), source=s, analytic=u,
        )
    else:
        raise ValueError(f"unknown problem {name!r}")
    if overrides:
        spec = replace(spec, **overrides)
    return spec


PROBLEMS = ("fisher_kpp", "burgers_parabolic", "burgers_shock", "sine_gordon_kink", "kdv_soliton")


def default_grid(p: ProblemSpec, q_x: int, q_t: int | None = None) -> GridSpec:
    return p.grid(q_x, q_x if q_t is None else q_t)


def analytic_solution(p: ProblemSpec, x, t):
    """Closed-form reference ``u(x, t)``."""
    if p.analytic is None:
        raise ValueError(f"problem {p.name!r} has no analytic reference")
    return p.analytic(np.asarray(x, dtype=float), np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# discrete operators


def linear_operator(p: ProblemSpec, grid: GridSpec) -> tuple[TtOperator, TtVector]:
    """Spatial operator ``L`` and its inhomogeneous boundary vector.

    The discrete affine map is ``u -> L u + l_aff``.
    """
    q, dx = grid.q_x, grid.dx
    L = None
    l_aff = tt_zeros([2] * q)
    for coeff, name in p.linear_terms:
        if name == "I":
            term = tt_scale(qtt_identity(q), coeff)
        else:
            term = tt_scale(build_space_operator(name, q, dx, p.bc_left, p.bc_right), coeff)
            src = boundary_source(p.bc_left, p.bc_right, q, dx, name)
            l_aff = tt_round(tt_add(l_aff, tt_scale(src, coeff)), 1e-15)
        L = term if L is None else tt_add(L, term)
    if L is None:
        L = tt_scale(qtt_identity(q), 0.0)
    return tt_round(L, 1e-15), l_aff


def nonlinear_space_operator(p: ProblemSpec, grid: GridSpec) -> TtOperator | None:
    """Spatial factor ``K`` of ``N(u) = coeff * K g(u)``; ``None`` means identity."""
    if p.nonlinearity in ("conservative_advection", "conservative_advection_dispersive"):
        return build_space_operator("D_x", grid.q_x, grid.dx, p.bc_left, p.bc_right)
    return None


def nonlinear_g(p: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """Pointwise part ``g`` of the nonlinearity (dense)."""
    if p.nonlinearity == "sine":
        return np.sin(u)
    if p.nonlinearity == "none":
        return np.zeros_like(u)
    return u * u


def nonlinear_dg(p: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """Derivative ``g'`` (dense)."""
    if p.nonlinearity == "sine":
        return np.cos(u)
    if p.nonlinearity == "none":
        return np.zeros_like(u)
    return 2.0 * u


def _lift(K: TtOperator, n_time_cores: int) -> TtOperator:
    return tt_kron(qtt_identity(n_time_cores), K) if n_time_cores else K


def nonlinear_apply(p: ProblemSpec, U: TtVector, grid: GridSpec, eps: float = 1e-12,
                    chi: int | None = None, *, n_time_cores: int | None = None) -> TtVector:
    """``N(U)`` for a space-time (or, with ``n_time_cores=0``, spatial) vector."""
    nt = grid.q_t if n_time_cores is None else n_time_cores
    if p.nonlinearity == "none":
        return tt_zeros(U.mode_sizes)
    if p.nonlinearity == "sine":
        g = tt_apply_elementwise(np.sin, U, eps, chi)
    else:
        g = tt_round(tt_hadamard(U, U), eps, chi)
    K = nonlinear_space_operator(p, grid)
    if K is not None:
        g = tt_round(tt_matvec(_lift(K, nt), g), eps, chi)
    return tt_scale(g, p.nl_coeff)


def nonlinear_jacobian_diag(p: ProblemSpec, U: TtVector, eps: float = 1e-12,
                            chi: int | None = None) -> TtVector:
    """Diagonal ``d`` with ``N'(U) = (I_t (x) K) diag(d)``.

    ``2 r U`` for the reaction, ``U`` for the conservative advection (the
    ``D_x`` factor is applied by the caller), ``cos U`` for the sine term.
    """
    if p.nonlinearity == "none":
        return tt_zeros(U.mode_sizes)
    if p.nonlinearity == "sine":
        return tt_scale(tt_apply_elementwise(np.cos, U, eps, chi), p.nl_coeff)
    return tt_scale(U, 2.0 * p.nl_coeff)
