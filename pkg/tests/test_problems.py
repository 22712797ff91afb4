from __future__ import annotations

import numpy as np
import pytest

from mlqtt.problems import PROBLEMS, analytic_solution, make_problem, nonlinear_apply, nonlinear_jacobian_diag
from mlqtt.tt import tt_from_full


def _fd_residual(p, x, t, h=1e-4):
    """Pointwise PDE residual of the closed form by centered differences."""
    u = lambda xx, tt: analytic_solution(p, xx, tt)
    ux = (u(x + h, t) - u(x - h, t)) / (2 * h)
    uxx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2
    k = 1e-3  # larger step: the third difference amplifies roundoff by 1/k^3
    uxxx = (u(x + 2 * k, t) - 2 * u(x + k, t) + 2 * u(x - k, t) - u(x - 2 * k, t)) / (2 * k**3)
    if p.m == 1:
        ut = (u(x, t + h) - u(x, t - h)) / (2 * h)
    else:
        ut = (u(x, t + h) - 2 * u(x, t) + u(x, t - h)) / h**2
    lin = {"I": u(x, t), "D_x": ux, "D_xx": uxx, "D_xxx": uxxx}
    out = ut + sum(c * lin[name] for c, name in p.linear_terms)
    uu = u(x, t)
    if p.nonlinearity == "quadratic_reaction":
        out = out + p.nl_coeff * uu**2
    elif p.nonlinearity.startswith("conservative"):
        out = out + p.nl_coeff * 2 * uu * ux
    elif p.nonlinearity == "sine":
        out = out + np.sin(uu)
    if p.source is not None:
        out = out - p.source(x, t)
    return out


@pytest.mark.parametrize("name", ["fisher_kpp", "burgers_parabolic", "sine_gordon_kink", "kdv_soliton",
                                  "heat", "manufactured_reaction"])
def test_closed_forms_solve_their_pde(name):
    p = make_problem(name)
    x = np.linspace(p.x_a + 0.3 * (p.x_b - p.x_a), p.x_b - 0.3 * (p.x_b - p.x_a), 17)
    for t in (0.3 * p.T, 0.7 * p.T):
        res = _fd_residual(p, x, t)
        assert np.max(np.abs(res)) < 1e-4 * max(1.0, np.max(np.abs(analytic_solution(p, x, t))))


def test_initial_data_consistent_with_closed_forms():
    for name in ("fisher_kpp", "burgers_parabolic", "sine_gordon_kink", "kdv_soliton"):
        p = make_problem(name)
        x = np.linspace(p.x_a, p.x_b, 33)
        assert np.allclose(p.u0(x), analytic_solution(p, x, 0.0))
    p = make_problem("sine_gordon_kink")
    x = np.linspace(-3, 3, 11)
    h = 1e-6
    ut = (analytic_solution(p, x, h) - analytic_solution(p, x, -h)) / (2 * h)
    assert np.allclose(p.ut0(x), ut, atol=1e-6)


def test_kink_limits():
    p = make_problem("sine_gordon_kink")
    assert np.isclose(analytic_solution(p, -50.0, 0.0), 0.0, atol=1e-12)
    assert np.isclose(analytic_solution(p, 50.0, 0.0), 2 * np.pi)
    assert np.isclose(analytic_solution(p, 0.0, 0.0), np.pi)


def test_fisher_front_and_boundary_values():
    p = make_problem("fisher_kpp")
    # (1 + e^{-20/sqrt6})^{-2}
    assert np.isclose(analytic_solution(p, p.x_a, 0.0), (1 + np.exp(-20 / np.sqrt(6))) ** -2)
    assert np.isclose(analytic_solution(p, p.x_a, 0.0), 1.0, atol=1e-3)
    assert np.isclose(analytic_solution(p, p.x_b, p.T), 0.0, atol=1e-5)
    assert np.isclose(analytic_solution(p, 0.0, 0.0), 0.25)
    assert p.bc_left.value == 1.0 and p.bc_right.value == 0.0


def test_burgers_vanishes_at_ends():
    p = make_problem("burgers_parabolic")
    assert np.allclose(analytic_solution(p, np.array([0.0, 1.0]), 0.5), 0.0, atol=1e-12)


def test_kdv_soliton_peak_moves_with_speed_c():
    p = make_problem("kdv_soliton")
    x = np.linspace(-15, 15, 3001)
    for t in (0.0, 1.0, 2.0):
        u = analytic_solution(p, x, t)
        assert np.isclose(x[np.argmax(u)], -1.0 + t, atol=0.02)
        assert np.isclose(u.max(), 3.0, rtol=1e-4)


def test_unknown_problem_and_overrides():
    with pytest.raises(ValueError):
        make_problem("navier_stokes")
    assert make_problem("kdv_soliton", T=1.0).T == 1.0
    assert make_problem("fisher_kpp", r=2.0).analytic is None
    with pytest.raises(ValueError):
        analytic_solution(make_problem("burgers_shock"), 0.0, 0.0)
    assert set(PROBLEMS) >= {"fisher_kpp", "burgers_parabolic", "sine_gordon_kink", "kdv_soliton"}


@pytest.mark.parametrize("name", ["fisher_kpp", "burgers_parabolic", "sine_gordon_kink", "kdv_soliton"])
def test_nonlinear_apply_matches_dense(name):
    from mlqtt.classical import dense_space_operator
    from mlqtt.problems import nonlinear_g

    p = make_problem(name)
    g = p.grid(4, 2)
    u = p.u0(g.x)
    U = np.kron(np.linspace(1, 2, 4), u)
    Ut = tt_from_full(U, 1e-14, [2] * 6)
    K = np.eye(16)
    if p.nonlinearity.startswith("conservative"):
        K = dense_space_operator("D_x", 16, g.dx, p.bc_left, p.bc_right)[0]
    ref = p.nl_coeff * np.kron(np.eye(4), K) @ nonlinear_g(p, U)
    assert np.allclose(nonlinear_apply(p, Ut, g).dense(), ref, atol=1e-10)
    d = nonlinear_jacobian_diag(p, Ut).dense()
    dref = {"quadratic_reaction": 2 * p.nl_coeff * U, "sine": np.cos(U)}.get(p.nonlinearity, 2 * p.nl_coeff * U)
    assert np.allclose(d, dref, atol=1e-10)
