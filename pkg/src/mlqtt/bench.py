"""Benchmark harness: single runs, convergence studies and table reproduction.

Three methods are compared on the same discretization:

``SL``  single-level space-time Newton from ``1_t (x) U0``;
``ML``  coarse-to-fine multilevel continuation;
``CT``  classical time stepping with dense per-step Newton.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
import uuid
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classical import CtConfig, ct_solve
from .discretization import assemble
from .dmrg import DmrgConfig
from .multilevel import LevelPlan, MultilevelFailure, coarse_initial_guess, multilevel_solve
from .newton import CompressionPolicy, NewtonConfig, NewtonFailure, newton_solve
from .operators import GridSpec
from .problems import ProblemSpec, analytic_solution, make_problem
from .tt import TtVector, tt_to_full

__all__ = [
    "METHODS",
    "SolverConfig",
    "benchmark_defaults",
    "RunReport",
    "StudyResult",
    "l2_error",
    "extract_time_slice",
    "run_case",
    "convergence_study",
    "reproduce_table",
    "TABLES",
    "worker_count",
]

log = logging.getLogger(__name__)

METHODS = ("SL", "ML", "CT")
WORKERS_ENV = "MLQTT_WORKERS"

# temporal order of each scheme, used by the compression policy
_TIME_ORDER = {"euler_m1": 1, "crank_nicolson_m1": 2, "euler_m2": 1, "newmark_m2": 2}


@dataclass(frozen=True)
class SolverConfig:
    """Flat solver settings shared by the CLI, config files and run reports.

    ``eps_newton`` sets both Newton thresholds unless ``eps_res`` or
    ``eps_cor`` are given. ``level_offset`` gives
    ``n_levels = min(q_x, q_t) - level_offset`` unless ``n_levels`` is set.
    ``q_t_offset`` picks ``q_t = q_x - q_t_offset`` when only ``q_x`` is known.
    """

    scheme: str = "euler_m1"
    variant: str = "correction"
    n_iter: int = 20
    eps_newton: float = 1e-5
    eps_res: float | None = None
    eps_cor: float | None = None
    s: float = 0.8
    n_line: int = 4
    beta: float = 0.9
    eps_tt: float = 1e-6
    eps_tt_init: float = 1e-3
    chi: int | None = None
    eps_dmrg: float = 1e-3
    n_sweeps: int = 3
    chi_dmrg: int | None = None
    alpha: float = 0.0
    dmrg_trunc: float | None = None
    use_policy: bool = True
    level_offset: int = 1
    n_levels: int | None = None
    q_t_offset: int = 0
    ct_tol: float = 1e-12

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    def updated(self, values: Mapping[str, object] | None) -> SolverConfig:
        """Copy with ``values`` applied; strings are converted to the field type."""
        if not values:
            return self
        unknown = set(values) - set(self.keys())
        if unknown:
            raise KeyError(f"unknown configuration keys: {sorted(unknown)}")
        kw = {k: _coerce(getattr(self, k), k, v) for k, v in values.items()}
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def newton(self) -> NewtonConfig:
        return NewtonConfig(
            variant=self.variant,
            n_iter=self.n_iter,
            eps_res=self.eps_res if self.eps_res is not None else self.eps_newton,
            eps_cor=self.eps_cor if self.eps_cor is not None else self.eps_newton,
            s=self.s,
            n_line=self.n_line,
            beta=self.beta,
            eps_tt_floor=self.eps_tt,
            eps_tt_init=self.eps_tt_init,
            chi=self.chi,
            dmrg=DmrgConfig(eps_dmrg=self.eps_dmrg, n_sweeps=self.n_sweeps, chi=self.chi_dmrg, alpha=self.alpha),
            dmrg_trunc=self.dmrg_trunc,
        )

    def policy(self, finest: GridSpec) -> CompressionPolicy | None:
        if not self.use_policy:
            return None
        return CompressionPolicy(self.eps_tt, finest.dx, finest.dt, r=2, s=_TIME_ORDER[self.scheme])

    def plan(self, finest: GridSpec) -> LevelPlan:
        if self.n_levels is not None:
            return LevelPlan(finest, self.n_levels)
        return LevelPlan.from_offset(finest, self.level_offset)


_OPTIONAL_INT = {"chi", "chi_dmrg", "n_levels"}
_OPTIONAL_FLOAT = {"eps_res", "eps_cor", "dmrg_trunc"}


def _coerce(current, key: str, value):
    if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
        if key in _OPTIONAL_INT | _OPTIONAL_FLOAT:
            return None
        raise ValueError(f"{key} cannot be empty")
    if key in _OPTIONAL_INT:
        return int(value)
    if key in _OPTIONAL_FLOAT:
        return float(value)
    if isinstance(current, bool):
        if isinstance(value, str):
            if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(f"{key} expects a boolean, got {value!r}")
            return value.lower() in ("1", "true", "yes")
        return bool(value)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return str(value)


_DEFAULTS: dict[str, dict] = {
    "fisher_kpp": dict(scheme="euler_m1", eps_tt=1e-6, eps_dmrg=1e-3, eps_newton=1e-5, n_sweeps=3, level_offset=1),
    "burgers_parabolic": dict(scheme="euler_m1", eps_tt=1e-6, eps_dmrg=1e-3, eps_newton=1e-5, n_sweeps=3,
                              level_offset=1),
    "burgers_shock": dict(scheme="euler_m1", eps_tt=1e-6, eps_dmrg=1e-3, eps_newton=1e-5, n_sweeps=3,
                          level_offset=1),
    "sine_gordon_kink": dict(scheme="euler_m2", eps_tt=1e-4, eps_dmrg=1e-3, eps_newton=5e-4, n_sweeps=2,
                             alpha=1e-7, chi_dmrg=18, level_offset=2, q_t_offset=2),
    "kdv_soliton": dict(scheme="euler_m1", eps_tt=1e-6, eps_dmrg=1e-3, eps_newton=1e-3, n_sweeps=3, n_iter=20,
                        s=0.8, chi=13, alpha=1e-12, level_offset=2),
    "heat": dict(scheme="euler_m1", eps_newton=1e-8, eps_tt=1e-10),
    "manufactured_reaction": dict(scheme="crank_nicolson_m1", eps_newton=1e-8, eps_tt=1e-10),
}


def benchmark_defaults(problem: str) -> SolverConfig:
    """Solver settings of a benchmark (generic defaults for unknown names)."""
    return SolverConfig().updated(_DEFAULTS.get(problem, {}))


# ---------------------------------------------------------------------------
# error measurement


def extract_time_slice(U: TtVector, grid: GridSpec, n: int) -> TtVector:
    """Spatial TT of the level ``U^n`` (``1 <= n <= N_t``).

    The time cores come first, most significant bit leading, so the slice is
    the contraction of each time core at the bits of ``n - 1``.
    """
    if not 1 <= n <= grid.n_t:
        raise IndexError(f"time index {n} outside 1..{grid.n_t}")
    if U.mode_sizes != [2] * grid.q:
        raise ValueError("vector does not match the grid layout")
    qt = grid.q_t
    v = np.ones((1,))
    for j in range(qt):
        bit = (n - 1) >> (qt - 1 - j) & 1
        v = v @ U.cores[j][:, bit, :]
    cores = list(U.cores[qt:])
    cores[0] = np.tensordot(v, cores[0], axes=(0, 0))[None]
    return TtVector(cores)


def _slice_dense(U, grid: GridSpec, n: int) -> np.ndarray:
    if isinstance(U, TtVector):
        return tt_to_full(extract_time_slice(U, grid, n)).reshape(-1)
    arr = np.asarray(U, dtype=float).reshape(grid.n_t, grid.n_x)
    return arr[n - 1]


def _time_index(grid: GridSpec, t_eval: float | None) -> int:
    if t_eval is None:
        return grid.n_t
    n = int(round(t_eval / grid.dt))
    if not 1 <= n <= grid.n_t or not math.isclose(n * grid.dt, t_eval, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"t = {t_eval} is not a time level of the grid")
    return n


def l2_error(U, p: ProblemSpec, grid: GridSpec, t_eval: float | None = None) -> tuple[float, float]:
    """Discrete ``L2`` error ``(sum e_j^2 dx)^(1/2)`` at ``t_eval`` (default ``T``) and its relative value."""
    n = _time_index(grid, t_eval)
    u = _slice_dense(U, grid, n)
    ref = analytic_solution(p, grid.x, n * grid.dt)
    err = math.sqrt(float(np.sum((u - ref) ** 2)) * grid.dx)
    norm = math.sqrt(float(np.sum(ref**2)) * grid.dx)
    return err, (err / norm if norm > 0 else math.inf)


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunReport:
    method: str
    problem: str
    q_x: int
    q_t: int
    scheme: str
    converged: bool = False
    newton_iterations: int = 0
    wall_time_seconds: float = 0.0
    max_rank: int = 1
    l2_error: float = math.nan
    relative_error: float = math.nan
    residual_history: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    error: str | None = None
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])

    COLUMNS = (
        "run_id", "method", "problem", "q_x", "q_t", "scheme", "converged", "newton_iterations",
        "wall_time_seconds", "max_rank", "l2_error", "relative_error", "residual_history", "config", "error",
    )

    def row(self) -> dict:
        d = {k: getattr(self, k) for k in self.COLUMNS}
        d["residual_history"] = json.dumps(self.residual_history)
        d["config"] = json.dumps(self.config, sort_keys=True)
        return d


def _grid_for(p: ProblemSpec, q_x: int, q_t: int | None, cfg: SolverConfig) -> GridSpec:
    return p.grid(q_x, q_t if q_t is not None else q_x - cfg.q_t_offset)


def run_case(method: str, problem: str, q_x: int, q_t: int | None = None, scheme: str | None = None,
             overrides: Mapping[str, object] | None = None) -> RunReport:
    """Run one method on one grid; solver failures give a failed report."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    cfg = benchmark_defaults(problem).updated(overrides)
    if scheme is not None:
        cfg = cfg.updated({"scheme": scheme})
    p = make_problem(problem)
    g = _grid_for(p, q_x, q_t, cfg)
    report = RunReport(method, problem, g.q_x, g.q_t, cfg.scheme, config=cfg.as_dict())
    try:
        U = _run(method, p, g, cfg, report)
    except (NewtonFailure, MultilevelFailure, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        report.converged = False
        report.error = f"{type(exc).__name__}: {exc}"
        log.warning("%s %s 2^%d x 2^%d failed: %s", method, problem, g.q_x, g.q_t, exc)
        return report
    if p.analytic is not None:
        report.l2_error, report.relative_error = l2_error(U, p, g)
    return report


def _run(method: str, p: ProblemSpec, g: GridSpec, cfg: SolverConfig, report: RunReport):
    if method == "CT":
        t0 = time.perf_counter()
        res = ct_solve(p, g, cfg.scheme, CtConfig(tol=cfg.ct_tol))
        report.wall_time_seconds = time.perf_counter() - t0
        report.converged = True
        report.newton_iterations = res.total_iterations
        report.max_rank = 1
        return res.U
    ncfg, policy = cfg.newton(), cfg.policy(g)
    if method == "SL":
        sys = assemble(p, g, cfg.scheme)
        guess = coarse_initial_guess(sys.U0, g.q_t)
        t0 = time.perf_counter()
        res = newton_solve(sys, guess, ncfg, policy)
        report.wall_time_seconds = time.perf_counter() - t0
        U, trace, report.converged = res.U, res.trace, res.converged
    else:
        t0 = time.perf_counter()
        res = multilevel_solve(p, cfg.plan(g), cfg.scheme, ncfg, policy)
        report.wall_time_seconds = time.perf_counter() - t0
        U, trace, report.converged = res.U, res.finest.trace, res.converged
    report.newton_iterations = len(trace)
    report.residual_history = [float(r) for r in trace.residuals]
    report.max_rank = U.max_rank
    return U


def worker_count() -> int:
    """Worker threads for independent runs, from ``MLQTT_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _run_many(jobs: list[tuple]) -> list[RunReport]:
    workers = min(worker_count(), max(1, len(jobs)))
    if workers == 1:
        return [run_case(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: run_case(*job), jobs))


# ---------------------------------------------------------------------------
# studies


@dataclass
class StudyResult:
    reports: list[RunReport]
    slopes: dict[str, float]

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.reports)


def fitted_order(dts: Iterable[float], errors: Iterable[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``."""
    dts, errors = np.asarray(list(dts), float), np.asarray(list(errors), float)
    ok = np.isfinite(errors) & (errors > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(dts[ok]), np.log(errors[ok]), 1)[0])


def write_csv(reports: list[RunReport], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RunReport.COLUMNS)
        w.writeheader()
        for r in reports:
            w.writerow(r.row())
    return path


def convergence_study(problem: str, methods: Iterable[str], ladder: list[tuple[int, int | None]],
                      scheme: str | None = None, overrides: Mapping[str, object] | None = None,
                      out: str | Path | None = None) -> StudyResult:
    """Run every method on every grid of ``ladder`` and fit the temporal order.

    Failed runs stay in the report list (and are skipped by the fit).
    """
    if len(ladder) < 3:
        raise ValueError("a convergence study needs a ladder of at least 3 grids")
    methods = list(methods)
    jobs = [(m, problem, qx, qt, scheme, overrides) for qx, qt in ladder for m in methods]
    reports = _run_many(jobs)
    p = make_problem(problem)
    slopes = {}
    for m in methods:
        rows = [r for r in reports if r.method == m]
        dts = [p.T / 2**r.q_t for r in rows]
        errs = [r.relative_error if r.converged else math.nan for r in rows]
        slopes[m] = fitted_order(dts, errs)
    if out is not None:
        write_csv(reports, out)
    return StudyResult(reports, slopes)


TABLES = {
    "fisher": ("fisher_kpp", 4),
    "burgers": ("burgers_parabolic", 4),
    "sine_gordon": ("sine_gordon_kink", 6),
    "kdv": ("kdv_soliton", 4),
}


def summary_text(reports: list[RunReport]) -> str:
    """Plain-text table with one row per grid and one column group per method."""
    grids = sorted({(r.q_x, r.q_t) for r in reports})
    methods = [m for m in METHODS if any(r.method == m for r in reports)]
    by = {(r.method, r.q_x, r.q_t): r for r in reports}
    head = ["grid"] + [f"{m} {c}" for c in ("iter", "time", "rank", "rel.err") for m in methods]
    lines = [" | ".join(head)]
    for qx, qt in grids:
        cells = [f"2^{qx} x 2^{qt}"]
        for col in ("iter", "time", "rank", "err"):
            for m in methods:
                r = by.get((m, qx, qt))
                if r is None or not r.converged:
                    cells.append("fail" if r is not None else "-")
                elif col == "iter":
                    cells.append(str(r.newton_iterations))
                elif col == "time":
                    cells.append(f"{r.wall_time_seconds:.2f}")
                elif col == "rank":
                    cells.append(str(r.max_rank))
                else:
                    cells.append(f"{r.relative_error:.2e}")
        lines.append(" | ".join(cells))
    return "\n".join(lines)


def reproduce_table(name: str, max_q: int, overrides: Mapping[str, object] | None = None,
                    out: str | Path | None = None, methods: Iterable[str] = METHODS) -> StudyResult:
    """Run SL, ML and CT over a benchmark's grid ladder up to ``2^max_q`` cells."""
    if name not in TABLES:
        raise ValueError(f"unknown table {name!r}; expected one of {tuple(TABLES)}")
    problem, q_min = TABLES[name]
    if max_q < q_min + 2:
        raise ValueError(f"table {name!r} needs max_q >= {q_min + 2}")
    ladder = [(q, None) for q in range(q_min, max_q + 1)]
    res = convergence_study(problem, methods, ladder, overrides=overrides,
                            out=None if out is None else Path(out) / f"{name}.csv")
    if out is not None:
        (Path(out) / f"{name}.txt").write_text(summary_text(res.reports) + "\n")
    return res
