"""Reference-triangle ingredients: Lagrange nodes, nodal bases and quadrature.

The reference triangle has corners (0,0), (1,0), (0,1); barycentric
coordinates are ``(1 - xi - eta, xi, eta)``.  Local node order is: the three
corners, then ``p - 1`` nodes along each edge (0,1), (1,2), (2,0) in that
direction, then interior nodes.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _lagrange_points(p):
    if p < 1:
        raise ValueError("polynomial degree must be >= 1")
    pts = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for i in range(1, p):
            lam = [0.0, 0.0, 0.0]
            lam[a] = 1.0 - i / p
            lam[b] = i / p
            pts.append(tuple(lam))
    for j in range(1, p):
        for i in range(1, p - j):
            pts.append((1.0 - (i + j) / p, i / p, j / p))
    out = np.array(pts)
    out.setflags(write=False)
    return out


def lagrange_points(p):
    """Barycentric coordinates ``(n_loc, 3)`` of the degree-``p`` nodes."""
    return _lagrange_points(p)


def n_local(p):
    return (p + 1) * (p + 2) // 2


def _monomial_exponents(p):
    return [(i, j) for j in range(p + 1) for i in range(p + 1 - j)]


class LagrangeBasis:
    """Nodal basis of degree ``p`` on the reference triangle."""

    def __init__(self, p):
        self.p = p
        self.exps = _monomial_exponents(p)
        nodes = lagrange_points(p)[:, 1:]
        V = self._monomials(nodes)
        self.coef = np.linalg.inv(V)  # columns: basis functions in monomial coordinates

    def _monomials(self, pts):
        pts = np.atleast_2d(pts)
        return np.stack([pts[:, 0] ** i * pts[:, 1] ** j for i, j in self.exps], axis=1)

    def values(self, pts):
        """``(P, n_loc)`` basis values at reference points ``(P, 2)``."""
        return self._monomials(pts) @ self.coef

    def gradients(self, pts):
        """``(P, n_loc, 2)`` reference gradients."""
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        dx = np.stack([i * x ** max(i - 1, 0) * y**j if i else 0 * x for i, j in self.exps], 1)
        dy = np.stack([j * x**i * y ** max(j - 1, 0) if j else 0 * x for i, j in self.exps], 1)
        return np.stack([dx @ self.coef, dy @ self.coef], axis=-1)

    def hessians(self, pts):
        """``(P, n_loc, 2, 2)`` reference second derivatives."""
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]

        def d(i, j, a, b):
            ci = 1.0
            for t in range(a):
                ci *= i - t
            cj = 1.0
            for t in range(b):
                cj *= j - t
            if ci == 0 or cj == 0:
                return 0 * x
            return ci * cj * x ** (i - a) * y ** (j - b)

        cols = {}
        for a, b in ((2, 0), (1, 1), (0, 2)):
            cols[(a, b)] = np.stack([d(i, j, a, b) for i, j in self.exps], 1) @ self.coef
        H = np.empty((pts.shape[0], len(self.exps), 2, 2))
        H[..., 0, 0] = cols[(2, 0)]
        H[..., 0, 1] = H[..., 1, 0] = cols[(1, 1)]
        H[..., 1, 1] = cols[(0, 2)]
        return H


@lru_cache(maxsize=None)
def _triangle_rule(degree):
    n = max(1, int(np.ceil((degree + 1) / 2)))
    a, wa = np.polynomial.legendre.leggauss(n)
    b, wb = roots_jacobi(n, 1.0, 0.0)
    # collapsed coordinates: xi = (1+a)(1-b)/4, eta = (1+b)/2
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa, wb) / 8.0
    xi = 0.25 * (1 + A) * (1 - B)
    eta = 0.5 * (1 + B)
    pts = np.stack([xi.ravel(), eta.ravel()], axis=1)
    w = W.ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def triangle_quadrature(degree):
    """Points ``(Q, 2)`` and weights ``(Q,)`` exact for polynomials of total ``degree``.

    Tensor Gauss-Legendre by Gauss-Jacobi rule mapped through the collapsed
    (Duffy) coordinates; weights sum to the reference area 1/2.
    """
    return _triangle_rule(int(degree))
