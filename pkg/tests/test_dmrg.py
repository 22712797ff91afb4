from __future__ import annotations

import numpy as np
import pytest

from mlqtt.discretization import assemble, jacobian
from mlqtt.dmrg import DmrgConfig, dmrg_solve, local_system, relative_residual
from mlqtt.multilevel import coarse_initial_guess
from mlqtt.operators import qtt_identity, qtt_toeplitz3
from mlqtt.problems import make_problem
from mlqtt.tt import TtVector, tt_from_full, tt_kron, tt_zeros


def _system(q_x=4, q_t=4):
    p = make_problem("burgers_parabolic")
    S = assemble(p, p.grid(q_x, q_t), "euler_m1")
    U = coarse_initial_guess(S.U0, q_t)
    return jacobian(S, U), S.C


def test_solution_matches_dense_solve():
    J, b = _system()
    sol = dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-12, n_sweeps=10, local_trunc=1e-14))
    ref = np.linalg.solve(J.full(), b.dense())
    assert np.linalg.norm(sol.x.dense() - ref) <= 1e-10 * np.linalg.norm(ref)
    assert sol.achieved_residual <= 1e-12
    assert np.isclose(sol.achieved_residual, np.linalg.norm(J.full() @ sol.x.dense() - b.dense())
                      / np.linalg.norm(b.dense()))


def test_stops_at_tolerance_and_counts_sweeps():
    J, b = _system()
    sol = dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-3, n_sweeps=6))
    assert 1 <= sol.sweeps_used <= 6
    assert sol.achieved_residual <= 1e-3
    one = dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-300, n_sweeps=1))
    assert one.sweeps_used == 1


def test_cached_environments_match_scratch_projection():
    J, b = _system(3, 3)
    seen = []

    def hook(k, A, rhs, cores):
        A2, b2 = local_system(J, b, TtVector(cores), k)
        seen.append(k)
        assert np.allclose(A, A2, atol=1e-10 * np.abs(A).max())
        assert np.allclose(rhs, b2, atol=1e-10 * max(np.abs(rhs).max(), 1e-300))

    dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-300, n_sweeps=2), on_local=hook)
    d = J.d
    assert seen == list(range(d - 1)) + list(range(d - 2, -1, -1))


def test_rank_cap_is_respected():
    J, b = _system()
    sol = dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-12, n_sweeps=4, chi=3))
    assert sol.x.max_rank <= 3


def test_identity_operator_returns_rhs(rng):
    b = tt_from_full(rng.standard_normal(32), 1e-14, [2] * 5)
    sol = dmrg_solve(qtt_identity(5), b, None, DmrgConfig(eps_dmrg=1e-12, local_trunc=1e-14))
    assert np.allclose(sol.x.dense(), b.dense())


def test_explicit_initial_guess(rng):
    A = tt_kron(qtt_toeplitz3(3, -1.0, 4.0, -1.0), qtt_identity(2))
    b = tt_from_full(rng.standard_normal(32), 1e-14, [2] * 5)
    x0 = tt_from_full(np.ones(32), 1e-14, [2] * 5)
    sol = dmrg_solve(A, b, x0, DmrgConfig(eps_dmrg=1e-10, n_sweeps=8, local_trunc=1e-14))
    assert np.allclose(sol.x.dense(), np.linalg.solve(A.full(), b.dense()), atol=1e-8)


def test_regularization_shrinks_solution():
    J, b = _system(3, 3)
    plain = dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-300, n_sweeps=4, local_trunc=1e-14))
    reg = dmrg_solve(J, b, None, DmrgConfig(eps_dmrg=1e-300, n_sweeps=4, local_trunc=1e-14, alpha=1e-2))
    assert np.linalg.norm(reg.x.dense()) < np.linalg.norm(plain.x.dense())
    assert relative_residual(J, reg.x, b) > relative_residual(J, plain.x, b)


def test_zero_rhs_and_validation():
    J, _ = _system(2, 2)
    res = dmrg_solve(J, tt_zeros([2] * 4))
    assert res.sweeps_used == 0 and np.all(res.x.dense() == 0)
    with pytest.raises(ValueError):
        dmrg_solve(J, tt_zeros([2] * 5))
    for bad in (dict(eps_dmrg=0), dict(n_sweeps=0), dict(chi=0), dict(alpha=-1)):
        with pytest.raises(ValueError):
            DmrgConfig(**bad)
