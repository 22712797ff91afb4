"""Classical time stepping with a dense Newton solve per step.

Step ``n`` solves block row ``n`` of the space-time system,

    sum_k D[n,k] U^k + dt^p sum_k W[n,k] F(U^k, t_k) = c_n,

for ``U^n`` given the earlier levels, where ``F(u, t) = L u + l_aff + N(u) - s(t)``
and ``c_n`` carries the initial data. The stencils ``D`` and ``W`` are the
lower-banded time operators of each scheme, so the marched solution equals
the monolithic one up to the Newton tolerance. All spatial matrices are
assembled densely here, independently of the QTT builders.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .operators import BoundaryCondition, GridSpec
from .problems import ProblemSpec, nonlinear_dg, nonlinear_g

__all__ = [
    "CtConfig",
    "CtResult",
    "CtDivergence",
    "MAX_CT_EXPONENT",
    "ct_solve",
    "dense_space_operator",
    "dense_linear_operator",
]

MAX_CT_EXPONENT = 13

# (diagonal, first sub-diagonal, second sub-diagonal) of the time stencils
_STENCILS = {
    "euler_m1": (1, (1.0, -1.0), (1.0,)),
    "crank_nicolson_m1": (1, (1.0, -1.0), (0.5, 0.5)),
    "euler_m2": (2, (1.0, -2.0, 1.0), (1.0,)),
    "newmark_m2": (2, (1.0, -2.0, 1.0), (0.25, 0.5, 0.25)),
}


@dataclass(frozen=True)
class CtConfig:
    """Per-step Newton controls.

    A step stops when ``||G(v)|| <= tol * max(||c||, 1)`` or when the update is
    below ``tol`` relative to ``v``.
    """

    tol: float = 1e-12
    max_iter: int = 50
    s: float = 0.5
    n_line: int = 20

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.n_line < 1 or not 0 < self.s < 1:
            raise ValueError("invalid classical Newton settings")


@dataclass
class CtResult:
    U: np.ndarray  # (N_t, N_x), rows t_1 .. t_{N_t}
    iterations: list[int] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def total_iterations(self) -> int:
        return int(sum(self.iterations))


class CtDivergence(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"time step {step}: {message}")
        self.step = step


def _ghost(bc: BoundaryCondition, dx: float) -> tuple[float, float]:
    a = {"dirichlet": -1.0, "neumann": 1.0}.get(bc.kind, 0.0)
    if bc.kind == "dirichlet":
        b = 2.0 * bc.value
    elif bc.kind == "neumann":
        b = bc.value * dx
    else:
        b = 0.0
    return a, b


def dense_space_operator(name: str, n: int, dx: float, bc_left: BoundaryCondition,
                         bc_right: BoundaryCondition) -> tuple[np.ndarray, np.ndarray]:
    """Dense central difference ``M`` and boundary vector ``m`` (``u -> M u + m``)."""
    periodic = bc_left.kind == "periodic"
    if name == "D_x":
        stencil, scale = {-1: -1.0, 1: 1.0}, 1.0 / (2.0 * dx)
    elif name == "D_xx":
        stencil, scale = {-1: 1.0, 0: -2.0, 1: 1.0}, 1.0 / dx**2
    elif name == "D_xxx":
        stencil, scale = {-2: -1.0, -1: 2.0, 1: -2.0, 2: 1.0}, 1.0 / (2.0 * dx**3)
        periodic = True  # circulant by construction
    else:
        raise ValueError(f"unknown space operator {name!r}")
    M = np.zeros((n, n))
    m = np.zeros(n)
    for i in range(n):
        for off, w in stencil.items():
            j = i + off
            if periodic:
                M[i, j % n] += w
            elif 0 <= j < n:
                M[i, j] += w
            elif j == -1:
                a, b = _ghost(bc_left, dx)
                M[i, 0] += w * a
                m[i] += w * b
            elif j == n:
                a, b = _ghost(bc_right, dx)
                M[i, n - 1] += w * a
                m[i] += w * b
    return scale * M, scale * m


def dense_linear_operator(p: ProblemSpec, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    n = grid.n_x
    L = np.zeros((n, n))
    l_aff = np.zeros(n)
    for coeff, name in p.linear_terms:
        if name == "I":
            L += coeff * np.eye(n)
        else:
            M, m = dense_space_operator(name, n, grid.dx, p.bc_left, p.bc_right)
            L += coeff * M
            l_aff += coeff * m
    return L, l_aff


class _Rhs:
    """Dense ``F(u, t)`` and its Jacobian for one problem and grid."""

    def __init__(self, p: ProblemSpec, grid: GridSpec):
        self.p, self.x = p, grid.x
        self.L, self.l_aff = dense_linear_operator(p, grid)
        if p.nonlinearity in ("conservative_advection", "conservative_advection_dispersive"):
            self.K = dense_space_operator("D_x", grid.n_x, grid.dx, p.bc_left, p.bc_right)[0]
        else:
            self.K = None

    def __call__(self, u: np.ndarray, t: float) -> np.ndarray:
        p = self.p
        g = p.nl_coeff * nonlinear_g(p, u)
        if self.K is not None:
            g = self.K @ g
        out = self.L @ u + self.l_aff + g
        if p.source is not None:
            out = out - p.source(self.x, t)
        return out

    def jac(self, u: np.ndarray) -> np.ndarray:
        d = self.p.nl_coeff * nonlinear_dg(self.p, u)
        return self.L + (d[None, :] * self.K if self.K is not None else np.diag(d))


def _initial_levels(p: ProblemSpec, grid: GridSpec, scheme: str, F: _Rhs) -> dict[int, np.ndarray]:
    """Known levels ``U^0`` and, for second-order schemes, ``U^{-1}``."""
    dt, x = grid.dt, grid.x
    u0 = np.asarray(p.u0(x), dtype=float)
    levels = {0: u0}
    if p.m == 2:
        ut0 = np.asarray(p.ut0(x), dtype=float)
        utt0 = -F(u0, 0.0)
        um1 = u0 - dt * ut0 + 0.5 * dt * dt * utt0
        if scheme == "newmark_m2":
            d = p.nl_coeff * nonlinear_dg(p, u0) * ut0
            uttt0 = -(F.L @ ut0 + (F.K @ d if F.K is not None else d))
            if p.source is not None:
                h = 1e-6
                uttt0 = uttt0 + (p.source(x, h) - p.source(x, -h)) / (2 * h)
            um1 = um1 - dt**3 / 6.0 * uttt0
        levels[-1] = um1
    return levels


def ct_solve(p: ProblemSpec, grid: GridSpec, scheme: str, cfg: CtConfig | None = None) -> CtResult:
    """March the scheme over ``N_t`` steps with a dense Newton solve per step.

    Raises
    ------
    ValueError
        For a scheme of the wrong temporal order or ``N_x > 2**13``.
    CtDivergence
        When a step fails to converge.
    """
    cfg = cfg or CtConfig()
    if scheme not in _STENCILS:
        raise ValueError(f"unknown scheme {scheme!r}")
    m, D, W = _STENCILS[scheme]
    if m != p.m:
        raise ValueError(f"scheme {scheme!r} is for m={m} but {p.name!r} has m={p.m}")
    if grid.q_x > MAX_CT_EXPONENT:
        raise ValueError(f"dense time stepping is limited to 2^{MAX_CT_EXPONENT} cells")
    dt = grid.dt
    dtp = dt**m
    F = _Rhs(p, grid)
    U = _initial_levels(p, grid, scheme, F)
    Fcache = {k: F(U[k], k * dt) for k in U}
    n_x = grid.n_x
    result = CtResult(np.zeros((grid.n_t, n_x)))
    t0 = time.perf_counter()
    for n in range(1, grid.n_t + 1):
        tn = n * dt
        known = np.zeros(n_x)
        for k, w in enumerate(D[1:], start=1):
            known += w * U[n - k]
        for k, w in enumerate(W[1:], start=1):
            known += dtp * w * Fcache[n - k]
        d0, w0 = D[0], W[0]

        def G(v):
            return d0 * v + dtp * w0 * F(v, tn) + known

        v = U[n - 1].copy()
        gv = G(v)
        scale = max(np.linalg.norm(known), 1.0)
        its = 0
        while np.linalg.norm(gv) > cfg.tol * scale:
            if its >= cfg.max_iter:
                raise CtDivergence(n, f"no convergence in {cfg.max_iter} Newton iterations")
            J = d0 * np.eye(n_x) + dtp * w0 * F.jac(v)
            try:
                step = scipy.linalg.solve(J, -gv, check_finite=False)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise CtDivergence(n, f"singular Jacobian ({exc})") from exc
            omega, g0 = 1.0, np.linalg.norm(gv)
            for _ in range(cfg.n_line):
                trial = v + omega * step
                gt = G(trial)
                if np.linalg.norm(gt) < g0:
                    break
                omega *= cfg.s
            v, gv = trial, gt
            its += 1
            if not np.all(np.isfinite(v)):
                raise CtDivergence(n, "iterate became non-finite")
            if np.linalg.norm(omega * step) <= cfg.tol * max(np.linalg.norm(v), 1.0):
                break
        U[n] = v
        Fcache[n] = F(v, tn)
        result.iterations.append(its)
        result.U[n - 1] = v
        U.pop(n - 3, None)
        Fcache.pop(n - 3, None)
    result.seconds = time.perf_counter() - t0
    return result
