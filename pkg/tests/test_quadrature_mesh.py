import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemoslab.errors import ConfigurationError, DimensionError
from chemoslab.quadrature_mesh import (
    discrete_norm, gamma_out, gauss_legendre, h1_seminorm, l2_q, l2_time, l2_x, lift, linf_time,
    make_mesh, make_timegrid, velocity_average,
)


def golub_welsch(n):
    """Legendre nodes/weights from the symmetric Jacobi matrix."""
    k = np.arange(1, n)
    off = k / np.sqrt(4.0 * k**2 - 1.0)
    J = np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = np.linalg.eigh(J)
    return vals, 2.0 * vecs[0] ** 2


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 8, 16, 33])
def test_gauss_legendre_matches_golub_welsch(n):
    q = gauss_legendre(n)
    nodes, weights = golub_welsch(n)
    assert np.allclose(q.nodes, nodes, atol=1e-13, rtol=0)
    assert np.allclose(q.weights, weights, atol=1e-13, rtol=0)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 12])
def test_quadrature_exact_on_polynomials(n, rng):
    q = gauss_legendre(n)
    for _ in range(20):
        coef = rng.standard_normal(2 * n)  # degree 2n-1
        approx = q.weights @ np.polynomial.polynomial.polyval(q.nodes, coef)
        anti = np.polynomial.polynomial.polyint(coef)
        exact = np.polynomial.polynomial.polyval(1.0, anti) - np.polynomial.polynomial.polyval(-1.0, anti)
        assert abs(approx - exact) <= 1e-12 * np.abs(coef).sum()


@pytest.mark.parametrize("n", range(2, 65))
def test_moments(n):
    q = gauss_legendre(n)
    assert abs(q.weights @ q.nodes) <= 1e-14
    assert abs(0.5 * q.weights @ q.nodes**2 - 1.0 / 3.0) <= 1e-14
    assert np.array_equal(q.nodes, -q.nodes[::-1])


@pytest.mark.parametrize("n", [0, -3, 257])
def test_quadrature_size_limits(n):
    with pytest.raises(ConfigurationError):
        gauss_legendre(n)


def test_mesh_and_timegrid():
    m = make_mesh(2.0, 8)
    assert m.n_nodes == 9 and m.x[0] == 0.0 and m.x[-1] == 2.0
    assert math.isclose(m.trapezoid_weights().sum(), 2.0)
    g = make_timegrid(0.2, 4)
    assert g.time(0) == 0.0 and g.time(4) == 0.2


@given(arrays(np.float64, 17, elements=st.floats(-1e6, 1e6)))
@settings(max_examples=60, deadline=None)
def test_velocity_average_projection_bitwise(f):
    q = gauss_legendre(8)
    once = velocity_average(lift(f, q), q)
    assert np.array_equal(once, f)
    assert np.array_equal(velocity_average(lift(once, q), q), once)


@pytest.mark.parametrize("ell", [1.0, 2.5])
def test_l2q_of_isotropic_field(ell, rng):
    m = make_mesh(ell, 20)
    q = gauss_legendre(6)
    f = rng.standard_normal(m.n_nodes)
    assert math.isclose(l2_q(lift(f, q), m, q), math.sqrt(2.0) * l2_x(f, m), rel_tol=1e-14)


def test_norm_values():
    m = make_mesh(1.0, 4)
    f = np.ones(5)
    assert math.isclose(l2_x(f, m), 1.0)
    assert h1_seminorm(m.x, m) == pytest.approx(1.0)
    # left-endpoint sum drops the last level
    assert l2_time([1.0, 2.0, 100.0], 0.5) == pytest.approx(math.sqrt(0.5 * (1 + 4)))
    assert linf_time([1.0, -3.0, 2.0]) == 3.0


def test_gamma_out_picks_outgoing_traces():
    q = gauss_legendre(4)
    u = np.zeros((3, 4))
    u[0, q.nodes > 0] = 5.0  # incoming at x=0: ignored
    assert gamma_out(u, q) == 0.0
    u[0, q.nodes < 0] = 1.0
    expected = math.sqrt(np.sum(q.weights[q.nodes < 0] * np.abs(q.nodes[q.nodes < 0])))
    assert gamma_out(u, q) == pytest.approx(expected)


def test_discrete_norm_dispatch_and_errors():
    m = make_mesh(1.0, 4)
    q = gauss_legendre(2)
    f = np.arange(5.0)
    assert discrete_norm(f, "L2_X", m) == l2_x(f, m)
    assert discrete_norm(lift(f, q), "L2_Q", m, q) == l2_q(lift(f, q), m, q)
    assert discrete_norm([1.0, 2.0], "L2_T", dt=1.0) == 1.0
    with pytest.raises(ConfigurationError):
        discrete_norm(f, "H7", m)
    with pytest.raises(DimensionError):
        l2_x(np.ones(3), m)
