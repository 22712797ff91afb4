from __future__ import annotations

import numpy as np
import pytest

from mlqtt.classical import dense_space_operator
from mlqtt.operators import (
    BoundaryCondition,
    GridSpec,
    boundary_source,
    build_space_operator,
    build_time_operator,
    qtt_basis,
    qtt_circulant3,
    qtt_circulant5,
    qtt_from_vector,
    qtt_identity,
    qtt_ones,
    qtt_penta5,
    qtt_toeplitz3,
)

D0 = BoundaryCondition("dirichlet", 0.0)


def banded(n, diags, wrap=False):
    """Dense matrix with ``diags[offset] = value`` (offset = column - row)."""
    M = np.zeros((n, n))
    for off, v in diags.items():
        for i in range(n):
            j = i + off
            if wrap:
                M[i, j % n] += v
            elif 0 <= j < n:
                M[i, j] += v
    return M


@pytest.mark.parametrize("n", [2, 3, 4])
def test_toeplitz3_with_corners(n):
    N = 2**n
    M = banded(N, {-1: 2.0, 0: -3.0, 1: 5.0})
    M[0, 0] += 0.5 * 2.0
    M[-1, -1] += -1.0 * 5.0
    assert np.allclose(qtt_toeplitz3(n, 2.0, -3.0, 5.0, a1=0.5, a2=-1.0).full(), M)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_penta5_with_corners(n):
    N = 2**n
    M = banded(N, {-2: 1.0, -1: 2.0, 0: 3.0, 1: 4.0, 2: 5.0})
    M[0, 0] += 0.1
    M[0, 1] += 0.2
    M[1, 0] += 0.3
    M[-1, -1] += 0.4
    M[-1, -2] += 0.5
    M[-2, -1] += 0.6
    A = qtt_penta5(n, 1.0, 2.0, 3.0, 4.0, 5.0, (0.1, 0.2, 0.3), (0.4, 0.5, 0.6))
    assert np.allclose(A.full(), M)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_circulants(n):
    N = 2**n
    assert np.allclose(qtt_circulant3(n, 1.0, -2.0, 3.0).full(), banded(N, {-1: 1.0, 0: -2.0, 1: 3.0}, True))
    M5 = banded(N, {-2: 1.0, -1: 2.0, 0: 3.0, 1: 4.0, 2: 5.0}, True)
    assert np.allclose(qtt_circulant5(n, 1.0, 2.0, 3.0, 4.0, 5.0).full(), M5)


def test_chain_ranks_are_small():
    assert qtt_toeplitz3(10, 1, -2, 1, 1, 1).max_rank <= 5
    assert qtt_circulant5(10, 1, 2, 3, 4, 5).max_rank <= 3


def test_chain_needs_two_cores():
    with pytest.raises(ValueError):
        qtt_toeplitz3(1, 1.0, 1.0, 1.0)


def test_identity_ones_basis():
    assert np.allclose(qtt_identity(3).full(), np.eye(8))
    assert np.allclose(qtt_ones(3).dense(), np.ones(8))
    for k in (1, 5, 8):
        assert np.allclose(qtt_basis(3, k).dense(), np.eye(8)[k - 1])
    with pytest.raises(ValueError):
        qtt_basis(3, 9)


def test_from_vector():
    v = np.arange(16.0)
    assert np.allclose(qtt_from_vector(v).dense(), v)
    with pytest.raises(ValueError):
        qtt_from_vector(np.ones(6))


@pytest.mark.parametrize("q", [2, 3, 4])
def test_time_operators(q):
    N = 2**q
    assert np.allclose(build_time_operator("D_t", q).full(), banded(N, {0: 1.0, -1: -1.0}))
    assert np.allclose(build_time_operator("J_t", q).full(), banded(N, {0: 0.5, -1: 0.5}))
    assert np.allclose(build_time_operator("K_t", q).full(), banded(N, {0: 0.25, -1: 0.5, -2: 0.25}))
    assert np.allclose(build_time_operator("D_tt", q).full(), banded(N, {0: 1.0, -1: -2.0, -2: 1.0}))
    with pytest.raises(ValueError):
        build_time_operator("D_x", q)


BCS = [
    (BoundaryCondition("dirichlet", 0.0), BoundaryCondition("dirichlet", 0.0)),
    (BoundaryCondition("dirichlet", 1.0), BoundaryCondition("dirichlet", 0.0)),
    (BoundaryCondition("dirichlet", 0.0), BoundaryCondition("neumann", 0.0)),
    (BoundaryCondition("neumann", 0.5), BoundaryCondition("dirichlet", -2.0)),
    (BoundaryCondition("none"), BoundaryCondition("none")),
    (BoundaryCondition("periodic"), BoundaryCondition("periodic")),
]


@pytest.mark.parametrize("bcs", BCS)
@pytest.mark.parametrize("name", ["D_x", "D_xx"])
def test_space_operators_match_dense_stencils(bcs, name):
    q, dx = 4, 0.3
    M, m = dense_space_operator(name, 2**q, dx, *bcs)
    assert np.allclose(build_space_operator(name, q, dx, *bcs).full(), M)
    assert np.allclose(boundary_source(*bcs, q, dx, name).dense(), m)


def test_space_operator_exact_on_polynomials():
    q, dx = 5, 1.0 / 32
    x = (np.arange(32) + 0.5) * dx
    Dxx = build_space_operator("D_xx", q, dx, D0, D0).full()
    u = x * (1 - x)  # vanishes at both ends
    assert np.allclose((Dxx @ u)[1:-1], -2.0)
    Dx = build_space_operator("D_x", q, dx, D0, D0).full()
    assert np.allclose((Dx @ u)[1:-1], (1 - 2 * x)[1:-1])


def test_dxxx_is_circulant_and_restricted():
    q, dx = 4, 0.5
    M = banded(16, {-2: -1.0, -1: 2.0, 1: -2.0, 2: 1.0}, True) / (2 * dx**3)
    assert np.allclose(build_space_operator("D_xxx", q, dx, D0, D0).full(), M)
    assert np.allclose(dense_space_operator("D_xxx", 16, dx, D0, D0)[0], M)
    with pytest.raises(ValueError):
        build_space_operator("D_xxx", q, dx, BoundaryCondition("neumann", 0.0), D0)
    with pytest.raises(ValueError):
        build_space_operator("D_xxx", q, dx, BoundaryCondition("dirichlet", 1.0), D0)


def test_bad_boundary_inputs():
    with pytest.raises(ValueError):
        BoundaryCondition("robin")
    with pytest.raises(ValueError):
        build_space_operator("D_x", 3, 0.1, BoundaryCondition("periodic"), D0)
    with pytest.raises(ValueError):
        build_space_operator("D_y", 3, 0.1, D0, D0)


def test_grid_spec():
    g = GridSpec(3, 2, -1.0, 1.0, 2.0)
    assert g.n_x == 8 and g.n_t == 4 and g.q == 5
    assert np.isclose(g.dx, 0.25) and np.isclose(g.dt, 0.5)
    assert np.allclose(g.x, -1 + 0.125 + 0.25 * np.arange(8))
    assert np.allclose(g.t, [0.5, 1.0, 1.5, 2.0])
    assert g.coarsen(1) == GridSpec(2, 1, -1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        GridSpec(0, 2, 0.0, 1.0, 1.0)
