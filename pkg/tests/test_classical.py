from __future__ import annotations

import numpy as np
import pytest

from dense_reference import DenseSystem
from mlqtt.bench import fitted_order, l2_error
from mlqtt.classical import CtConfig, ct_solve
from mlqtt.problems import make_problem


@pytest.mark.parametrize("name,scheme", [
    ("fisher_kpp", "euler_m1"),
    ("burgers_parabolic", "crank_nicolson_m1"),
    ("kdv_soliton", "euler_m1"),
    ("sine_gordon_kink", "euler_m2"),
    ("sine_gordon_kink", "newmark_m2"),
    ("manufactured_reaction", "crank_nicolson_m1"),
])
def test_marching_solves_monolithic_dense_system(name, scheme):
    p = make_problem(name)
    g = p.grid(4, 4)
    D = DenseSystem(p, g, scheme)
    U = ct_solve(p, g, scheme).U.reshape(-1)
    assert np.linalg.norm(D.residual(U)) <= 1e-11 * np.linalg.norm(D.C)


@pytest.mark.parametrize("name", ["fisher_kpp", "burgers_parabolic", "kdv_soliton"])
def test_marching_equals_monolithic_dense_newton(name):
    p = make_problem(name)
    g = p.grid(4, 4)
    ref = DenseSystem(p, g, "euler_m1").newton()
    U = ct_solve(p, g, "euler_m1").U.reshape(-1)
    assert np.linalg.norm(U - ref) <= 1e-10 * np.linalg.norm(ref)


def test_zero_data_stays_zero():
    p = make_problem("burgers_parabolic", u0=lambda x: np.zeros_like(x))
    res = ct_solve(p, p.grid(4, 3), "euler_m1")
    assert np.all(res.U == 0) and res.total_iterations == 0


def test_euler_error_halves_with_dt():
    p = make_problem("heat")
    errs = [l2_error(ct_solve(p, p.grid(9, q), "euler_m1").U, p, p.grid(9, q))[1] for q in (3, 4, 5)]
    assert fitted_order([p.T / 2**q for q in (3, 4, 5)], errs) == pytest.approx(1.0, abs=0.1)


def test_crank_nicolson_is_second_order():
    p = make_problem("manufactured_reaction")
    qs = (3, 4, 5)
    errs = [l2_error(ct_solve(p, p.grid(4, q), "crank_nicolson_m1").U, p, p.grid(4, q))[1] for q in qs]
    assert fitted_order([p.T / 2**q for q in qs], errs) == pytest.approx(2.0, abs=0.1)


def test_validation():
    p = make_problem("fisher_kpp")
    with pytest.raises(ValueError):
        ct_solve(p, p.grid(3, 3), "euler_m2")
    with pytest.raises(ValueError):
        ct_solve(p, p.grid(14, 2), "euler_m1")
    with pytest.raises(ValueError):
        ct_solve(p, p.grid(3, 3), "rk4")
    with pytest.raises(ValueError):
        CtConfig(tol=0.0)
