from __future__ import annotations

import numpy as np
import pytest

from mlqtt.bench import benchmark_defaults
from mlqtt.discretization import assemble
from mlqtt.multilevel import (
    LevelPlan,
    coarse_initial_guess,
    multilevel_solve,
    prolong_1d,
    prolong_spacetime,
    prolongate,
)
from mlqtt.newton import newton_solve
from mlqtt.problems import make_problem
from mlqtt.tt import tt_from_full


def cell_prolongation(n):
    """Linear interpolation between cell centers; ends reuse the end value."""
    N = 2**n
    P = np.zeros((2 * N, N))
    for i in range(N):
        lo, hi = max(i - 1, 0), min(i + 1, N - 1)
        P[2 * i, i] += 0.75
        P[2 * i, lo] += 0.25
        P[2 * i + 1, i] += 0.75
        P[2 * i + 1, hi] += 0.25
    return P


def node_prolongation(n):
    """Nodes t_j = j dt (j >= 1): odd fine nodes inject, even ones average."""
    N = 2**n
    P = np.zeros((2 * N, N))
    for j in range(N):
        P[2 * j + 1, j] = 1.0
        P[2 * j, j] += 0.5
        P[2 * j, max(j - 1, 0)] += 0.5
    return P


@pytest.mark.parametrize("n", [2, 3, 4])
def test_prolong_1d_matches_dense(n):
    assert np.allclose(prolong_1d(n, "cell").full(), cell_prolongation(n))
    assert np.allclose(prolong_1d(n, "node").full(), node_prolongation(n))


def test_prolong_spacetime_is_kronecker():
    P = prolong_spacetime(3, 2).full()
    assert np.allclose(P, np.kron(node_prolongation(2), cell_prolongation(3)))


def test_prolongate_matches_dense_and_preserves_linears():
    q_x, q_t = 4, 3
    x = (np.arange(16) + 0.5) / 16
    t = np.arange(1, 9) / 8
    U = np.add.outer(2 * t, 3 * x + 1).reshape(-1)
    Ut = tt_from_full(U, 1e-14, [2] * (q_x + q_t))
    fine = prolongate(Ut, q_x, q_t).dense()
    P = np.kron(node_prolongation(q_t), cell_prolongation(q_x))
    assert np.allclose(fine, P @ U)
    xf = (np.arange(32) + 0.5) / 32
    tf = np.arange(1, 17) / 16
    exact = np.add.outer(2 * tf, 3 * xf + 1)
    inner = fine.reshape(16, 32)[1:, 1:-1]
    assert np.allclose(inner, exact[1:, 1:-1])
    const = prolongate(tt_from_full(np.full(128, 2.5), 1e-14, [2] * 7), q_x, q_t).dense()
    assert np.allclose(const, 2.5)


def test_prolongate_rejects_wrong_layout():
    with pytest.raises(ValueError):
        prolongate(tt_from_full(np.ones(64), 1e-14, [2] * 6), 4, 3)
    with pytest.raises(ValueError):
        prolong_1d(1)
    with pytest.raises(ValueError):
        prolong_1d(3, "edge")


def test_level_plan():
    p = make_problem("fisher_kpp")
    plan = LevelPlan.from_offset(p.grid(6, 6), 1)
    assert plan.n_levels == 5
    assert [g.q_x for g in plan.grids] == [6, 5, 4, 3, 2]
    with pytest.raises(ValueError):
        LevelPlan(p.grid(4, 4), 4)
    with pytest.raises(ValueError):
        LevelPlan(p.grid(4, 4), 0)
    plan = LevelPlan(p.grid(4, 4), 2, overrides={1: dict(n_iter=2)})
    cfg = benchmark_defaults("fisher_kpp").newton()
    assert plan.config(1, cfg).n_iter == 2 and plan.config(0, cfg) is cfg


def test_single_level_plan_equals_single_level_newton():
    p = make_problem("fisher_kpp")
    sc = benchmark_defaults("fisher_kpp")
    g = p.grid(4, 4)
    ml = multilevel_solve(p, LevelPlan(g, 1), "euler_m1", sc.newton(), sc.policy(g))
    S = assemble(p, g, "euler_m1")
    sl = newton_solve(S, coarse_initial_guess(S.U0, 4), sc.newton(), sc.policy(g))
    assert np.allclose(ml.U.dense(), sl.U.dense())
    assert len(ml.levels) == 1 and ml.converged


def test_prolongated_guess_beats_constant_guess():
    p = make_problem("fisher_kpp")
    sc = benchmark_defaults("fisher_kpp")
    g = p.grid(6, 6)
    res = multilevel_solve(p, sc.plan(g), "euler_m1", sc.newton(), sc.policy(g))
    assert res.converged
    assert [rec.grid.q_x for rec in res.levels] == [2, 3, 4, 5, 6]
    fin = res.finest
    assert fin.trace.initial_residual < fin.naive_residual
