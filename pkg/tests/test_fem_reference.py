import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shapeuq.fem_reference import LagrangeBasis, lagrange_points, n_local, triangle_quadrature


def exact_monomial(i, j):
    # int_T x^i y^j over the reference triangle = i! j! / (i + j + 2)!
    from math import factorial
    return factorial(i) * factorial(j) / factorial(i + j + 2)


@given(st.integers(0, 8), st.integers(0, 8))
def test_quadrature_exactness(i, j):
    deg = i + j
    pts, w = triangle_quadrature(deg)
    val = np.sum(w * pts[:, 0] ** i * pts[:, 1] ** j)
    assert val == pytest.approx(exact_monomial(i, j), rel=1e-13, abs=1e-16)


def test_quadrature_weights_positive_and_sum_to_area():
    for d in range(0, 12):
        pts, w = triangle_quadrature(d)
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(0.5, rel=1e-14)
        assert np.all(pts >= 0) and np.all(pts.sum(1) <= 1)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_nodal_property(p):
    b = LagrangeBasis(p)
    nodes = lagrange_points(p)[:, 1:]
    assert nodes.shape[0] == n_local(p)
    assert np.allclose(b.values(nodes), np.eye(n_local(p)), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_partition_of_unity(p, rng):
    b = LagrangeBasis(p)
    x = rng.random((50, 2)) * 0.5
    assert np.allclose(b.values(x).sum(1), 1.0)
    assert np.allclose(b.gradients(x).sum(1), 0.0, atol=1e-11)
    assert np.allclose(b.hessians(x).sum(1), 0.0, atol=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_derivatives_match_finite_differences(p, rng):
    b = LagrangeBasis(p)
    x = rng.random((10, 2)) * 0.4 + 0.1
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (b.values(x + e) - b.values(x - e)) / (2 * h)
        assert np.allclose(b.gradients(x)[..., d], fd, atol=1e-7)
        fd2 = (b.gradients(x + e) - b.gradients(x - e)) / (2 * h)
        assert np.allclose(b.hessians(x)[..., d, :], fd2, atol=1e-6)


def test_reproduces_polynomials(rng):
    # degree-3 interpolation is exact for a cubic
    b = LagrangeBasis(3)
    f = lambda x: 1 + x[:, 0] ** 3 - 2 * x[:, 0] * x[:, 1] ** 2 + x[:, 1]
    nodes = lagrange_points(3)[:, 1:]
    x = rng.random((20, 2)) * 0.5
    assert np.allclose(b.values(x) @ f(nodes), f(x))


def test_edge_node_order():
    pts = lagrange_points(3)
    # second edge node block runs from corner 1 to corner 2
    assert np.allclose(pts[5], [0, 2 / 3, 1 / 3])
    assert np.allclose(pts[9], [1 / 3, 1 / 3, 1 / 3])
