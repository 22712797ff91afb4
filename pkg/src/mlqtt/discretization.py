"""All-at-once space-time discretization ``f(U) = A(U) + B U - C``.

The space-time vector stacks the levels ``U^1 .. U^{N_t}`` (time slowest),
so every operator is a Kronecker product ``T_time (x) T_space`` and every
TT keeps its ``q_t`` time cores in front of its ``q_x`` space cores.

Per scheme (``W`` the time weight, ``p`` the power of ``dt``)::

    euler_m1           B = D_t  (x) I + dt   I_t (x) L     W = I_t
    crank_nicolson_m1  B = D_t  (x) I + dt   J_t (x) L     W = J_t
    euler_m2           B = D_tt (x) I + dt^2 I_t (x) L     W = I_t
    newmark_m2         B = D_tt (x) I + dt^2 K_t (x) L     W = K_t

and ``A(U) = dt^p (W (x) I) N(U)``. ``C`` gathers the initial data, the
source and the boundary vector ``l_aff`` of the affine operator
``L u + l_aff``, lifted over time as ``-dt^p (W 1_t) (x) l_aff``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cross import tt_apply_elementwise
from .operators import GridSpec, build_time_operator, qtt_basis, qtt_identity, qtt_ones
from .problems import (
    ProblemSpec,
    linear_operator,
    nonlinear_jacobian_diag,
    nonlinear_space_operator,
)
from .tt import (
    TtOperator,
    TtVector,
    tt_add,
    tt_diag,
    tt_from_full,
    tt_hadamard,
    tt_kron,
    tt_matmat,
    tt_matvec,
    tt_round,
    tt_scale,
    tt_sub,
    tt_zeros,
)

__all__ = [
    "SCHEMES",
    "AssembledSystem",
    "assemble",
    "u_minus_one",
    "residual",
    "jacobian",
    "nonlinear_term",
    "initial_vector",
    "spatial_F",
    "linearized_rhs",
]

SCHEMES = {
    "euler_m1": dict(m=1, time_op="D_t", weight="I_t", power=1),
    "crank_nicolson_m1": dict(m=1, time_op="D_t", weight="J_t", power=1),
    "euler_m2": dict(m=2, time_op="D_tt", weight="I_t", power=2),
    "newmark_m2": dict(m=2, time_op="D_tt", weight="K_t", power=2),
}

# pieces of a sum are rounded this much tighter than the sum itself
_PIECE_FACTOR = 1e-2


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Monolithic nonlinear system on one grid.

    ``nl_op`` is ``dt^p (W (x) K)``: the nonlinear term is
    ``A(U) = nl_op g(U)`` with ``g`` the scaled pointwise part of ``N`` and
    ``A'(U) = nl_op diag(g'(U))``.
    """

    problem: ProblemSpec
    grid: GridSpec
    scheme: str
    B: TtOperator
    C: TtVector
    time_weight: TtOperator
    dt_power: float
    nl_op: TtOperator | None
    L: TtOperator
    l_aff: TtVector
    U0: TtVector

    @property
    def c_norm(self) -> float:
        from .tt import tt_norm

        return tt_norm(self.C)

    @property
    def linear(self) -> bool:
        return self.nl_op is None


def initial_vector(f, grid: GridSpec, eps: float = 1e-14) -> TtVector:
    """QTT of a function sampled at the cell centers."""
    return tt_from_full(np.asarray(f(grid.x), dtype=float), eps, [2] * grid.q_x)


def _spatial_n(p: ProblemSpec, grid: GridSpec, u: TtVector, eps: float) -> TtVector:
    """``N(u)`` for a spatial vector."""
    if p.nonlinearity == "none":
        return tt_zeros(u.mode_sizes)
    if p.nonlinearity == "sine":
        g = tt_apply_elementwise(np.sin, u, eps)
    else:
        g = tt_round(tt_hadamard(u, u), eps)
    K = nonlinear_space_operator(p, grid)
    if K is not None:
        g = tt_matvec(K, g)
    return tt_round(tt_scale(g, p.nl_coeff), eps)


def spatial_F(p: ProblemSpec, grid: GridSpec, u: TtVector, t: float, eps: float = 1e-14) -> TtVector:
    """``F(u, s(t)) = L u + l_aff + N(u) - s(t)`` for a spatial vector."""
    L, l_aff = linear_operator(p, grid)
    out = tt_add(tt_add(tt_matvec(L, u), l_aff), _spatial_n(p, grid, u, eps))
    if p.source is not None:
        out = tt_sub(out, initial_vector(lambda x: p.source(x, t), grid, eps))
    return tt_round(out, eps)


def u_minus_one(p: ProblemSpec, grid: GridSpec, scheme: str = "euler_m2", eps: float = 1e-14) -> TtVector:
    """Taylor estimate of the state one step before ``t = 0``.

    ``U0 - dt Ut0 + dt^2/2 Utt0``, with ``Utt0 = -F(U0, S0)`` from the PDE.
    ``newmark_m2`` adds ``-dt^3/6 Uttt0`` with
    ``Uttt0 = s_t(0) - L Ut0 - N'(U0) Ut0``.
    """
    if p.m != 2:
        raise ValueError(f"u_minus_one needs a second-order problem, {p.name!r} has m={p.m}")
    dt = grid.dt
    u0 = initial_vector(p.u0, grid, eps)
    ut0 = initial_vector(p.ut0, grid, eps)
    utt0 = tt_scale(spatial_F(p, grid, u0, 0.0, eps), -1.0)
    out = tt_add(tt_add(u0, tt_scale(ut0, -dt)), tt_scale(utt0, 0.5 * dt * dt))
    if scheme == "newmark_m2":
        L, _ = linear_operator(p, grid)
        d = nonlinear_jacobian_diag(p, u0, eps)
        nprime = tt_hadamard(d, ut0)
        K = nonlinear_space_operator(p, grid)
        if K is not None:
            nprime = tt_matvec(K, nprime)
        uttt0 = tt_scale(tt_add(tt_matvec(L, ut0), nprime), -1.0)
        if p.source is not None:
            h = 1e-6
            st = initial_vector(lambda x: (p.source(x, h) - p.source(x, -h)) / (2 * h), grid, eps)
            uttt0 = tt_add(uttt0, st)
        out = tt_add(out, tt_scale(uttt0, -dt**3 / 6.0))
    return tt_round(out, eps)


def _source_spacetime(p: ProblemSpec, grid: GridSpec, eps: float) -> TtVector | None:
    if p.source is None:
        return None
    vals = p.source(grid.x[None, :], grid.t[:, None])
    return tt_from_full(np.asarray(vals, dtype=float).reshape(-1), eps, [2] * grid.q)


def assemble(p: ProblemSpec, grid: GridSpec, scheme: str, eps: float = 1e-12) -> AssembledSystem:
    """Build ``B``, ``C`` and the nonlinear operator of one scheme."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {tuple(SCHEMES)}")
    info = SCHEMES[scheme]
    if info["m"] != p.m:
        raise ValueError(f"scheme {scheme!r} is for m={info['m']} but {p.name!r} has m={p.m}")
    qt, qx = grid.q_t, grid.q_x
    dt = grid.dt
    dtp = dt ** info["power"]
    L, l_aff = linear_operator(p, grid)
    W = build_time_operator(info["weight"], qt)
    Dt = build_time_operator(info["time_op"], qt)
    Ix = qtt_identity(qx)
    B = tt_round(tt_add(tt_kron(Dt, Ix), tt_scale(tt_kron(W, L), dtp)), 1e-15)

    K = nonlinear_space_operator(p, grid)
    if p.nonlinearity == "none":
        nl_op = None
    else:
        nl_op = tt_scale(tt_kron(W, K if K is not None else Ix), dtp)

    u0 = initial_vector(p.u0, grid, eps)
    e1, e2 = qtt_basis(qt, 1), qtt_basis(qt, 2)
    if scheme == "euler_m1":
        init = tt_kron(e1, u0)
    elif scheme == "crank_nicolson_m1":
        f0 = spatial_F(p, grid, u0, 0.0, eps)
        init = tt_kron(e1, tt_sub(u0, tt_scale(f0, 0.5 * dt)))
    elif scheme == "euler_m2":
        um1 = u_minus_one(p, grid, scheme, eps)
        init = tt_sub(tt_kron(e1, tt_sub(tt_scale(u0, 2.0), um1)), tt_kron(e2, u0))
    else:
        um1 = u_minus_one(p, grid, scheme, eps)
        f0 = spatial_F(p, grid, u0, 0.0, eps)
        fm1 = spatial_F(p, grid, um1, -dt, eps)
        c1 = tt_sub(tt_sub(tt_scale(u0, 2.0), um1), tt_add(tt_scale(f0, 0.5 * dt * dt), tt_scale(fm1, 0.25 * dt * dt)))
        c2 = tt_add(u0, tt_scale(f0, 0.25 * dt * dt))
        init = tt_sub(tt_kron(e1, c1), tt_kron(e2, c2))
    C = tt_round(init, eps)

    WI = tt_kron(W, Ix)
    S = _source_spacetime(p, grid, eps)
    if S is not None:
        C = tt_add(C, tt_scale(tt_matvec(WI, S), dtp))
    w1 = tt_round(tt_matvec(W, qtt_ones(qt)), 1e-15)
    C = tt_add(C, tt_scale(tt_kron(w1, l_aff), -dtp))
    C = tt_round(C, eps)
    return AssembledSystem(p, grid, scheme, B, C, W, dtp, nl_op, L, l_aff, u0)


# ---------------------------------------------------------------------------
# residual and Jacobian


def _pointwise(sys: AssembledSystem, U: TtVector, eps: float, chi: int | None) -> TtVector:
    """``coeff * g(U)``."""
    p = sys.problem
    if p.nonlinearity == "sine":
        g = tt_apply_elementwise(np.sin, U, eps, chi)
    else:
        g = tt_round(tt_hadamard(U, U), eps, chi)
    return tt_scale(g, p.nl_coeff)


def nonlinear_term(sys: AssembledSystem, U: TtVector, eps: float = 1e-12, chi: int | None = None) -> TtVector:
    """``A(U) = dt^p (W (x) I) N(U)``."""
    if sys.nl_op is None:
        return tt_zeros(U.mode_sizes)
    return tt_round(tt_matvec(sys.nl_op, _pointwise(sys, U, eps, chi)), eps, chi)


def _check_layout(sys: AssembledSystem, U: TtVector) -> None:
    if U.mode_sizes != [2] * sys.grid.q:
        raise ValueError(f"vector modes {U.mode_sizes} do not match a 2^{sys.grid.q} space-time grid")


def residual(sys: AssembledSystem, U: TtVector, eps_f: float = 1e-12, chi: int | None = None) -> TtVector:
    """``f(U) = A(U) + B U - C`` rounded to ``eps_f``."""
    _check_layout(sys, U)
    ep = eps_f * _PIECE_FACTOR
    BU = tt_round(tt_matvec(sys.B, U), ep)
    out = tt_sub(BU, sys.C)
    if sys.nl_op is not None:
        out = tt_add(nonlinear_term(sys, U, ep), out)
    return tt_round(out, eps_f, chi)


def jacobian_diag(sys: AssembledSystem, U: TtVector, eps: float, chi: int | None = None) -> TtVector:
    return nonlinear_jacobian_diag(sys.problem, U, eps, chi)


def nonlinear_jacobian(sys: AssembledSystem, U: TtVector, eps_J: float = 1e-12) -> TtOperator | None:
    """``A'(U) = nl_op diag(g'(U))`` rounded to ``eps_J``."""
    if sys.nl_op is None:
        return None
    d = jacobian_diag(sys, U, eps_J * _PIECE_FACTOR)
    return tt_round(tt_matmat(sys.nl_op, tt_diag(d)), eps_J)


def jacobian(sys: AssembledSystem, U: TtVector, eps_J: float = 1e-12, chi: int | None = None) -> TtOperator:
    """``J = A'(U) + B`` rounded to ``eps_J``."""
    _check_layout(sys, U)
    Ap = nonlinear_jacobian(sys, U, eps_J * _PIECE_FACTOR)
    if Ap is None:
        return sys.B
    return tt_round(tt_add(sys.B, Ap), eps_J, chi)


def linearized_rhs(sys: AssembledSystem, U: TtVector, eps: float = 1e-12, chi: int | None = None) -> TtVector:
    """``R(U) = A'(U) U - A(U) + C``, so that ``J(U) V = R(U)`` is one Newton step."""
    _check_layout(sys, U)
    if sys.nl_op is None:
        return sys.C
    ep = eps * _PIECE_FACTOR
    dU = tt_round(tt_hadamard(jacobian_diag(sys, U, ep), U), ep)
    inner = tt_round(tt_sub(dU, _pointwise(sys, U, ep, None)), ep)
    return tt_round(tt_add(tt_matvec(sys.nl_op, inner), sys.C), eps, chi)
