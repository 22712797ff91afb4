"""Globalized Newton iteration on ``f(U) = 0`` in TT format.

Two equivalent formulations are provided:

``correction``
    solve ``J_k dU = -f(U_k)`` and set ``U_{k+1} = U_k + w dU``;
``rhs_reformulated``
    solve ``J_k V = R_k`` with ``R_k = A'(U_k) U_k - A(U_k) + C`` and set
    ``U_{k+1} = (1 - w) U_k + w V``.

Both use a backtracking line search on ``||f||`` and an adaptive rounding
tolerance ``eps_tt_k`` that starts loose and is tightened by a factor 0.8
(down to the floor ``eps_tt``) whenever the residual stagnates.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .discretization import AssembledSystem, jacobian, linearized_rhs, residual
from .dmrg import DmrgConfig, dmrg_solve
from .tt import TtVector, tt_add, tt_norm, tt_round, tt_scale, tt_sub

__all__ = [
    "NewtonConfig",
    "CompressionPolicy",
    "NewtonTrace",
    "IterationRecord",
    "NewtonResult",
    "NewtonFailure",
    "newton_solve",
]

log = logging.getLogger(__name__)

VARIANTS = ("correction", "rhs_reformulated")


@dataclass(frozen=True)
class NewtonConfig:
    """Newton, line-search and rounding controls.

    ``eps_tt_floor`` is the final rounding tolerance; ``eps_tt_init`` the
    starting value of the adaptive tolerance. ``chi`` caps the solution rank.
    ``dmrg_trunc`` sets the DMRG split tolerance; ``None`` ties it to the
    current adaptive tolerance.
    """

    variant: str = "rhs_reformulated"
    n_iter: int = 10
    eps_res: float = 1e-5
    eps_cor: float = 1e-5
    s: float = 0.8
    n_line: int = 4
    beta: float = 0.9
    eps_tt_floor: float = 1e-6
    eps_tt_init: float = 1e-3
    chi: int | None = None
    dmrg: DmrgConfig = field(default_factory=DmrgConfig)
    dmrg_trunc: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown Newton variant {self.variant!r}")
        if not 0 < self.s < 1:
            raise ValueError("line-search factor s must lie in (0, 1)")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.n_iter < 1 or self.n_line < 1:
            raise ValueError("iteration budgets must be positive")
        for name in ("eps_res", "eps_cor", "eps_tt_floor", "eps_tt_init"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def with_overrides(self, **kw) -> NewtonConfig:
        dmrg_kw = {k[5:]: kw.pop(k) for k in list(kw) if k.startswith("dmrg_") and k != "dmrg_trunc"}
        cfg = replace(self, **kw)
        if dmrg_kw:
            cfg = replace(cfg, dmrg=replace(cfg.dmrg, **dmrg_kw))
        return cfg


@dataclass(frozen=True)
class CompressionPolicy:
    """Mesh-dependent rounding tolerances.

    ``eps_tt = C_m * eps_tt_base`` with
    ``C_m = min((dx/dx0)^r, (dt/dt0)^s)``, so the reference mesh gets
    ``eps_tt_base`` and coarser meshes a proportionally looser tolerance.
    Residual-type quantities use ``eps_f = sigma_factor * eps_res``.
    """

    eps_tt_base: float
    dx0: float
    dt0: float
    r: int = 2
    s: int = 1
    sigma_factor: float = 0.25

    def __post_init__(self):
        if min(self.eps_tt_base, self.dx0, self.dt0, self.sigma_factor) <= 0 or min(self.r, self.s) <= 0:
            raise ValueError("compression policy entries must be positive")

    def c_m(self, dx: float, dt: float) -> float:
        return min((dx / self.dx0) ** self.r, (dt / self.dt0) ** self.s)

    def eps_tt(self, dx: float, dt: float) -> float:
        return self.c_m(dx, dt) * self.eps_tt_base

    def eps_f(self, eps_res: float) -> float:
        return self.sigma_factor * eps_res


@dataclass
class IterationRecord:
    residual_norm: float
    relative_residual: float
    omega: float
    line_trials: int
    eps_tt_k: float
    max_rank: int
    dmrg_residual: float
    dmrg_sweeps: int
    correction_ratio: float


@dataclass
class NewtonTrace:
    """Per-iteration history of one Newton solve."""

    initial_residual: float = float("nan")
    c_norm: float = float("nan")
    iterations: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def residuals(self) -> list[float]:
        return [self.initial_residual] + [it.residual_norm for it in self.iterations]

    def to_dict(self) -> dict:
        return dict(
            initial_residual=self.initial_residual,
            c_norm=self.c_norm,
            iterations=[asdict(it) for it in self.iterations],
        )


@dataclass
class NewtonResult:
    U: TtVector
    trace: NewtonTrace
    converged: bool

    def __iter__(self):
        return iter((self.U, self.trace, self.converged))


class NewtonFailure(RuntimeError):
    """Newton aborted; ``trace`` holds the history up to the failure."""

    def __init__(self, message: str, trace: NewtonTrace):
        super().__init__(message)
        self.trace = trace


def newton_solve(
    sys: AssembledSystem,
    U0: TtVector,
    cfg: NewtonConfig | None = None,
    policy: CompressionPolicy | None = None,
    *,
    omegas: list[float] | None = None,
) -> NewtonResult:
    """Run the globalized Newton iteration from ``U0``.

    Parameters
    ----------
    sys : AssembledSystem
    U0 : TtVector
        Initial guess in the space-time layout of ``sys``.
    cfg : NewtonConfig, optional
    policy : CompressionPolicy, optional
        Supplies the mesh-dependent floor ``eps_tt`` and ``eps_f``; without
        it the floor is ``cfg.eps_tt_floor`` and ``eps_f = 0.25 eps_res``.
    omegas : list of float, optional
        Fixed step lengths that replace the line search (testing aid).

    Returns
    -------
    NewtonResult
        ``(U, trace, converged)``.
    """
    cfg = cfg or NewtonConfig()
    g = sys.grid
    if policy is not None:
        eps_tt = policy.eps_tt(g.dx, g.dt)
        eps_f = policy.eps_f(cfg.eps_res)
    else:
        eps_tt = cfg.eps_tt_floor
        eps_f = 0.25 * cfg.eps_res
    eps_k = max(cfg.eps_tt_init, eps_tt)
    chi = cfg.chi
    chi_dmrg = cfg.dmrg.chi if cfg.dmrg.chi is not None else chi

    trace = NewtonTrace()
    U = tt_round(U0, eps_tt, chi)
    f = residual(sys, U, eps_f)
    fn = tt_norm(f)
    cn = tt_norm(sys.C)
    cn = cn if cn > 0 else 1.0
    trace.initial_residual, trace.c_norm = fn, cn
    if not np.isfinite(fn):
        raise NewtonFailure("initial residual is not finite", trace)
    if fn / cn < cfg.eps_res:
        return NewtonResult(U, trace, True)

    converged = False
    for k in range(cfg.n_iter):
        J = jacobian(sys, U, eps_k)
        trunc = cfg.dmrg_trunc if cfg.dmrg_trunc is not None else eps_k
        dcfg = replace(cfg.dmrg, chi=chi_dmrg, local_trunc=trunc)
        try:
            if cfg.variant == "correction":
                sol = dmrg_solve(J, tt_scale(f, -1.0), None, dcfg)
                step = tt_round(sol.x, eps_k, chi)
            else:
                R = linearized_rhs(sys, U, eps_f)
                sol = dmrg_solve(J, R, U, dcfg)
                target = tt_round(sol.x, eps_k, chi)
                step = tt_round(tt_sub(target, U), eps_k)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise NewtonFailure(f"linear solve failed at iteration {k}: {exc}", trace) from exc

        def trial(w: float) -> TtVector:
            if cfg.variant == "correction":
                return tt_round(tt_add(U, tt_scale(step, w)), eps_tt, chi)
            return tt_round(tt_add(tt_scale(U, 1.0 - w), tt_scale(target, w)), eps_tt, chi)

        if omegas is not None:
            w = float(omegas[k])
            Un = trial(w)
            fnew = residual(sys, Un, eps_f)
            fn_new = tt_norm(fnew)
            trials = 1
        else:
            w = 1.0
            for trials in range(1, cfg.n_line + 1):
                Un = trial(w)
                fnew = residual(sys, Un, eps_f)
                fn_new = tt_norm(fnew)
                if fn_new < fn:
                    break
                if trials < cfg.n_line:
                    w *= cfg.s
        if not np.isfinite(fn_new):
            raise NewtonFailure(f"residual became non-finite at iteration {k}", trace)
        if fn_new >= cfg.beta * fn:
            eps_k = max(0.8 * eps_k, eps_tt)
        un = tt_norm(Un)
        corr = tt_norm(step) / un if un > 0 else np.inf
        trace.iterations.append(
            IterationRecord(
                residual_norm=fn_new,
                relative_residual=fn_new / cn,
                omega=w,
                line_trials=trials,
                eps_tt_k=eps_k,
                max_rank=Un.max_rank,
                dmrg_residual=sol.achieved_residual,
                dmrg_sweeps=sol.sweeps_used,
                correction_ratio=corr,
            )
        )
        log.debug("newton %d: |f|/|C|=%.3e w=%.3g rank=%d dmrg=%.2e", k, fn_new / cn, w, Un.max_rank,
                  sol.achieved_residual)
        U, f, fn = Un, fnew, fn_new
        if fn / cn < cfg.eps_res or corr < cfg.eps_cor:
            converged = True
            break
    return NewtonResult(U, trace, converged)
