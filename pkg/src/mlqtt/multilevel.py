"""Coarse-to-fine continuation: Newton on a grid hierarchy with TT prolongation.

Each level is solved independently to its own convergence test; the
prolongated solution only serves as the initial guess of the next finer
level. There is no restriction of residuals and no cycling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import assemble, residual
from .newton import CompressionPolicy, NewtonConfig, NewtonFailure, NewtonTrace, newton_solve
from .operators import GridSpec, qtt_identity, qtt_ones, qtt_toeplitz3
from .problems import ProblemSpec
from .tt import TtOperator, TtVector, tt_add, tt_kron, tt_matvec, tt_norm, tt_round

__all__ = [
    "prolong_1d",
    "prolong_spacetime",
    "prolongate",
    "coarse_initial_guess",
    "LevelPlan",
    "LevelRecord",
    "MultilevelResult",
    "MultilevelFailure",
    "multilevel_solve",
]

log = logging.getLogger(__name__)


def _new_bit(M0: TtOperator, M1: TtOperator) -> TtOperator:
    """``M0 (x) e0 + M1 (x) e1``: fine index ``2 i + b`` takes row ``i`` of ``M_b``."""
    e = [TtOperator([np.eye(2)[:, b].reshape(1, 2, 1, 1)]) for b in (0, 1)]
    return tt_round(tt_add(tt_kron(M0, e[0]), tt_kron(M1, e[1])), 1e-14)


def prolong_1d(n: int, centering: str = "cell") -> TtOperator:
    """Linear interpolation from ``2**n`` to ``2**(n+1)`` points.

    Parameters
    ----------
    n : int
        Coarse exponent, at least 2.
    centering : {"cell", "node"}
        ``cell``: fine cells ``2i`` and ``2i+1`` take weights (1/4, 3/4) and
        (3/4, 1/4) of the neighboring coarse cells. ``node``: coarse node
        ``j`` is injected into fine node ``2j+1`` and fine node ``2j`` is the
        midpoint average of coarse nodes ``j-1`` and ``j``.
        At the ends the missing neighbor is replaced by the boundary value
        itself, which keeps every row sum equal to one.

    Returns
    -------
    TtOperator
        ``n + 1`` cores; the last one has row mode 2 and column mode 1.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"prolongation needs a coarse exponent of at least 2, got {n}")
    if centering == "cell":
        M0 = qtt_toeplitz3(n, 0.25, 0.75, 0.0, a1=1.0)
        M1 = qtt_toeplitz3(n, 0.0, 0.75, 0.25, a2=1.0)
    elif centering == "node":
        M0 = qtt_toeplitz3(n, 0.5, 0.5, 0.0, a1=1.0)
        M1 = qtt_identity(n)
    else:
        raise ValueError(f"unknown centering {centering!r}")
    return _new_bit(M0, M1)


def prolong_spacetime(q_x: int, q_t: int) -> TtOperator:
    """``P_t (x) P_x`` from a ``2**q_x x 2**q_t`` grid to the next finer one.

    Time nodes are node-centered, spatial unknowns cell-centered. The
    operator has ``q_t + 1`` time cores followed by ``q_x + 1`` space cores;
    use :func:`prolongate` to apply it to a coarse solution.
    """
    return tt_kron(prolong_1d(q_t, "node"), prolong_1d(q_x, "cell"))


def _insert_unit_cores(U: TtVector, q_t: int) -> TtVector:
    """Add mode-1 identity cores after the last time core and at the end."""
    cores = list(U.cores)
    r_mid = cores[q_t - 1].shape[2]
    unit_mid = np.eye(r_mid)[:, None, :]
    return TtVector(cores[:q_t] + [unit_mid] + cores[q_t:] + [np.ones((1, 1, 1))])


def prolongate(U: TtVector, q_x: int, q_t: int, eps: float = 1e-14, chi: int | None = None) -> TtVector:
    """Interpolate a coarse space-time solution onto the next finer grid."""
    if U.mode_sizes != [2] * (q_x + q_t):
        raise ValueError(f"vector modes {U.mode_sizes} do not match a 2^{q_t} x 2^{q_x} grid")
    P = prolong_spacetime(q_x, q_t)
    return tt_round(tt_matvec(P, _insert_unit_cores(U, q_t)), eps, chi)


def coarse_initial_guess(U0: TtVector, q_t: int) -> TtVector:
    """``1_t (x) U0``: the initial condition repeated at every time level."""
    return tt_kron(qtt_ones(q_t), U0)


@dataclass(frozen=True)
class LevelPlan:
    """Grid hierarchy below ``finest``; level 0 is the finest grid.

    ``overrides`` maps a level index to NewtonConfig field overrides.
    """

    finest: GridSpec
    n_levels: int
    overrides: dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError("a plan needs at least one level")
        coarsest = min(self.finest.q_x, self.finest.q_t) - (self.n_levels - 1)
        if coarsest < 2:
            raise ValueError(
                f"{self.n_levels} levels leave a coarsest exponent of {coarsest}; at least 2 is required"
            )

    @classmethod
    def from_offset(cls, finest: GridSpec, offset: int, **kw) -> LevelPlan:
        """``n_levels = min(q_x, q_t) - offset`` (at least one level)."""
        return cls(finest, max(1, min(finest.q_x, finest.q_t) - offset), **kw)

    @property
    def grids(self) -> list[GridSpec]:
        return [self.finest.coarsen(level) for level in range(self.n_levels)]

    def config(self, level: int, cfg: NewtonConfig) -> NewtonConfig:
        extra = self.overrides.get(level)
        return cfg.with_overrides(**extra) if extra else cfg


@dataclass
class LevelRecord:
    level: int
    grid: GridSpec
    trace: NewtonTrace
    converged: bool
    naive_residual: float
    seconds: float


@dataclass
class MultilevelResult:
    U: TtVector
    levels: list[LevelRecord]

    @property
    def converged(self) -> bool:
        return bool(self.levels) and self.levels[-1].converged

    @property
    def finest(self) -> LevelRecord:
        return self.levels[-1]


class MultilevelFailure(RuntimeError):
    def __init__(self, level: int, cause: NewtonFailure, levels: list[LevelRecord]):
        super().__init__(f"Newton failed on level {level}: {cause}")
        self.level = level
        self.trace = cause.trace
        self.levels = levels


def multilevel_solve(
    problem: ProblemSpec,
    plan: LevelPlan,
    scheme: str,
    cfg: NewtonConfig | None = None,
    policy: CompressionPolicy | None = None,
    *,
    assemble_eps: float = 1e-12,
) -> MultilevelResult:
    """Solve coarse to fine, seeding each level with the prolongated solution.

    The coarsest level starts from ``1_t (x) U0``. ``naive_residual`` of each
    level record is ``||f(1_t (x) U0)||`` on that level, kept for comparison
    with the residual of the prolongated guess (``trace.initial_residual``).
    """
    import time

    cfg = cfg or NewtonConfig()
    records: list[LevelRecord] = []
    U_prev: TtVector | None = None
    g_prev: GridSpec | None = None
    for level in range(plan.n_levels - 1, -1, -1):
        g = plan.finest.coarsen(level)
        sys = assemble(problem, g, scheme, assemble_eps)
        naive = coarse_initial_guess(sys.U0, g.q_t)
        naive_res = tt_norm(residual(sys, naive, 1e-10))
        guess = naive if U_prev is None else prolongate(U_prev, g_prev.q_x, g_prev.q_t, 1e-12)
        lcfg = plan.config(level, cfg)
        t0 = time.perf_counter()
        try:
            res = newton_solve(sys, guess, lcfg, policy)
        except NewtonFailure as exc:
            raise MultilevelFailure(level, exc, records) from exc
        records.append(LevelRecord(level, g, res.trace, res.converged, naive_res, time.perf_counter() - t0))
        log.info("level %d (2^%d x 2^%d): %d iterations, converged=%s", level, g.q_x, g.q_t, len(res.trace),
                 res.converged)
        U_prev, g_prev = res.U, g
    return MultilevelResult(U_prev, records)
