from __future__ import annotations

import numpy as np
import pytest

from dense_reference import DenseSystem
from mlqtt.discretization import assemble
from mlqtt.dmrg import DmrgConfig
from mlqtt.multilevel import coarse_initial_guess
from mlqtt.newton import CompressionPolicy, NewtonConfig, newton_solve
from mlqtt.problems import make_problem
from mlqtt.tt import tt_from_full

EXACT = dict(eps_res=1e-300, eps_cor=1e-300, eps_tt_floor=1e-14, eps_tt_init=1e-14,
             dmrg=DmrgConfig(eps_dmrg=1e-13, n_sweeps=12), dmrg_trunc=1e-14)


def _setup(name="fisher_kpp", scheme="euler_m1", q=3):
    p = make_problem(name)
    S = assemble(p, p.grid(q, q), scheme)
    return S, coarse_initial_guess(S.U0, q)


def test_config_validation_and_overrides():
    with pytest.raises(ValueError):
        NewtonConfig(variant="secant")
    with pytest.raises(ValueError):
        NewtonConfig(s=1.0)
    with pytest.raises(ValueError):
        NewtonConfig(beta=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(eps_res=0.0)
    cfg = NewtonConfig().with_overrides(n_iter=3, dmrg_chi=7, dmrg_trunc=1e-9)
    assert cfg.n_iter == 3 and cfg.dmrg.chi == 7 and cfg.dmrg_trunc == 1e-9


def test_compression_policy():
    pol = CompressionPolicy(1e-6, dx0=0.1, dt0=0.01, r=2, s=1)
    assert pol.eps_tt(0.1, 0.01) == pytest.approx(1e-6)
    # one level coarser: min(2^2, 2^1) = 2
    assert pol.eps_tt(0.2, 0.02) == pytest.approx(2e-6)
    assert pol.c_m(0.4, 0.02) == pytest.approx(2.0)
    assert pol.eps_f(1e-5) == pytest.approx(2.5e-6)
    with pytest.raises(ValueError):
        CompressionPolicy(0.0, 1.0, 1.0)


def test_variants_agree_with_fixed_steps():
    S, U0 = _setup()
    a = newton_solve(S, U0, NewtonConfig(variant="correction", n_iter=3, **EXACT), omegas=[0.5, 1.0, 1.0])
    b = newton_solve(S, U0, NewtonConfig(variant="rhs_reformulated", n_iter=3, **EXACT), omegas=[0.5, 1.0, 1.0])
    assert np.linalg.norm(a.U.dense() - b.U.dense()) <= 1e-8 * np.linalg.norm(a.U.dense())


@pytest.mark.parametrize("variant", ["correction", "rhs_reformulated"])
def test_quadratic_convergence_to_dense_solution(variant):
    S, U0 = _setup("burgers_parabolic")
    ref = DenseSystem(S.problem, S.grid, "euler_m1").newton()
    res = newton_solve(S, U0, NewtonConfig(variant=variant, n_iter=8, **EXACT))
    assert np.linalg.norm(res.U.dense() - ref) <= 1e-10 * np.linalg.norm(ref)
    r = res.trace.residuals
    assert r[-1] < 1e-10 * r[0]


def test_trace_and_convergence_flags():
    S, U0 = _setup()
    cfg = NewtonConfig(variant="correction", n_iter=10, eps_res=1e-8, eps_cor=1e-8, eps_tt_floor=1e-12)
    res = newton_solve(S, U0, cfg)
    U, trace, converged = res
    assert converged
    assert len(trace) == len(trace.iterations) == len(trace.residuals) - 1
    last = trace.iterations[-1]
    assert last.relative_residual < 1e-8 or last.correction_ratio < 1e-8
    assert all(0 < it.omega <= 1 for it in trace.iterations)
    assert trace.to_dict()["iterations"][0]["max_rank"] >= 1


def test_already_converged_start_returns_immediately():
    S, U0 = _setup()
    ref = DenseSystem(S.problem, S.grid, "euler_m1").newton()
    res = newton_solve(S, tt_from_full(ref, 1e-14, [2] * 6), NewtonConfig(eps_tt_floor=1e-14))
    assert res.converged and len(res.trace) == 0


def test_budget_exhaustion_is_reported():
    S, U0 = _setup("burgers_parabolic", q=4)
    res = newton_solve(S, U0, NewtonConfig(n_iter=1, eps_res=1e-14, eps_cor=1e-14))
    assert not res.converged and len(res.trace) == 1


def test_adaptive_tolerance_reaches_floor():
    S, U0 = _setup("fisher_kpp", q=4)
    cfg = NewtonConfig(variant="correction", n_iter=30, eps_res=1e-12, eps_cor=1e-14, eps_tt_floor=1e-9,
                       eps_tt_init=1e-3)
    res = newton_solve(S, U0, cfg)
    eps = [it.eps_tt_k for it in res.trace.iterations]
    assert all(b <= a for a, b in zip(eps, eps[1:]))
    assert eps[-1] < 1e-3
