"""Lagrange finite elements for the PML-truncated transmission problem.

The discrete problem is: find ``u_h`` in the order-``p`` Lagrange space on the
fitted mesh, vanishing on the outer circle, with

    int k^-2 (A grad u_h) . grad v - n u_h v  =  int f v

for every test function ``v``.  Basis functions are real, so the conjugation
in the test slot changes nothing and the matrix is complex symmetric.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fem_reference import LagrangeBasis, lagrange_points, n_local, triangle_quadrature
from .mesh import LOCAL_EDGES
from .ramp import RadialRamp, plane_wave

RESIDUAL_TOL = 1e-9


class SingularSystemError(RuntimeError):
    pass


class FeSpace:
    """Continuous order-``p`` Lagrange space on an order-``q`` isoparametric mesh.

    Global numbering: vertex dofs, then ``p - 1`` dofs per edge ordered from
    the lower to the higher vertex index, then interior dofs cell by cell.
    """

    def __init__(self, mesh, p, q=None, quad_degree=None):
        if p not in (1, 2, 3):
            raise ValueError("supported polynomial degrees are 1, 2 and 3")
        self.mesh = mesh
        self.p = p
        self.q = p if q is None else q
        self.basis = LagrangeBasis(p)
        self.geo_basis = LagrangeBasis(self.q)
        self.quad_degree = 2 * p + 2 if quad_degree is None else quad_degree
        self._build_dofs()
        self._geometry = None

    def _build_dofs(self):
        mesh, p = self.mesh, self.p
        V, F = mesh.n_vertices, mesh.n_cells
        uniq, c2e = mesh.edges()
        self.n_edges = uniq.shape[0]
        ne, ni = p - 1, (p - 1) * (p - 2) // 2
        dofs = np.empty((F, n_local(p)), dtype=np.int64)
        dofs[:, :3] = mesh.cells
        col = 3
        for e, (a, b) in enumerate(LOCAL_EDGES):
            forward = mesh.cells[:, a] < mesh.cells[:, b]
            for i in range(ne):
                k_fwd = i
                k_rev = ne - 1 - i
                kk = np.where(forward, k_fwd, k_rev)
                dofs[:, col + i] = V + c2e[:, e] * ne + kk
            col += ne
        if ni:
            base = V + self.n_edges * ne
            dofs[:, col:] = base + np.arange(F)[:, None] * ni + np.arange(ni)[None]
        self.cell_dofs = dofs
        self.n_dofs = V + self.n_edges * ne + F * ni

        outer = np.zeros(V, dtype=bool)
        outer[mesh.tags["outer"]] = True
        bnd = [np.flatnonzero(outer)]
        if ne:
            on_b = outer[uniq[:, 0]] & outer[uniq[:, 1]]
            eidx = np.flatnonzero(on_b)
            bnd.append((V + eidx[:, None] * ne + np.arange(ne)[None]).ravel())
        self.dirichlet = np.unique(np.concatenate(bnd))
        free = np.ones(self.n_dofs, dtype=bool)
        free[self.dirichlet] = False
        self.free = np.flatnonzero(free)
        self.free_index = np.full(self.n_dofs, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(self.free.size)

    def dof_coordinates(self):
        """Physical location of every dof (nodes of the order-``p`` Lagrange set)."""
        from .mesh import map_barycentric

        X = map_barycentric(self.mesh, lagrange_points(self.p))
        out = np.empty((self.n_dofs, 2))
        out[self.cell_dofs.ravel()] = X.reshape(-1, 2)
        return out

    def interpolate(self, fn):
        """Nodal interpolant of a callable ``fn(x)``."""
        return fn(self.dof_coordinates())

    @property
    def geometry(self):
        """Cached quadrature geometry: points, weights*|det J|, inverse Jacobians."""
        if self._geometry is None:
            self._geometry = QuadGeometry.build(self)
        return self._geometry


@dataclass
class QuadGeometry:
    ref_points: np.ndarray   # (Q, 2)
    phi: np.ndarray          # (Q, n_loc)
    dphi: np.ndarray         # (Q, n_loc, 2)
    x: np.ndarray            # (F, Q, 2)
    wdet: np.ndarray         # (F, Q)
    invJ: np.ndarray         # (F, Q, 2, 2)
    inside: np.ndarray       # (F,)

    @classmethod
    def build(cls, space, chunk=50000):
        pts, w = triangle_quadrature(space.quad_degree)
        nodes = space.mesh.geometry_nodes(space.q)
        gN = space.geo_basis.values(pts)
        gdN = space.geo_basis.gradients(pts)
        F = space.mesh.n_cells
        Q = pts.shape[0]
        x = np.empty((F, Q, 2))
        wdet = np.empty((F, Q))
        invJ = np.empty((F, Q, 2, 2))
        for s in range(0, F, chunk):
            X = nodes[s:s + chunk]
            x[s:s + chunk] = np.einsum("qn,fnj->fqj", gN, X)
            J = np.einsum("qni,fnj->fqji", gdN, X)
            det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
            if np.any(det <= 0):
                raise ValueError("inverted element in quadrature geometry")
            wdet[s:s + chunk] = det * w[None]
            inv = np.empty_like(J)
            inv[..., 0, 0] = J[..., 1, 1] / det
            inv[..., 1, 1] = J[..., 0, 0] / det
            inv[..., 0, 1] = -J[..., 0, 1] / det
            inv[..., 1, 0] = -J[..., 1, 0] / det
            invJ[s:s + chunk] = inv
        return cls(pts, space.basis.values(pts), space.basis.gradients(pts), x, wdet, invJ,
                   space.mesh.inside_mask())


@dataclass
class FeSystem:
    space: FeSpace
    matrix: sp.csr_matrix    # on free dofs
    load: np.ndarray         # on free dofs
    k: float
    info: dict = field(default_factory=dict)


@dataclass
class FeSolution:
    space: FeSpace
    dofs: np.ndarray
    k: float
    residual: float
    info: dict = field(default_factory=dict)

    def values_at_quadrature(self, cells=None):
        """``(u, grad u)`` at the cached quadrature points of the selected cells."""
        g = self.space.geometry
        sel = slice(None) if cells is None else cells
        U = self.dofs[self.space.cell_dofs[sel]]
        u = U @ g.phi.T
        gref = np.einsum("qai,fa->fqi", g.dphi, U)
        grad = np.einsum("fqi,fqij->fqj", gref, g.invJ[sel])
        return u, grad


def _stiffness_table(dphi):
    # T[(q,i,j),(a,b)] = dphi[q,a,i] * dphi[q,b,j]
    Q, n, _ = dphi.shape
    T = np.einsum("qai,qbj->qijab", dphi, dphi)
    return T.reshape(Q * 4, n * n)


def _mass_table(phi):
    Q, n = phi.shape
    return np.einsum("qa,qb->qab", phi, phi).reshape(Q, n * n)


def _cmatmul(M, T):
    if np.iscomplexobj(M):
        return M.real @ T + 1j * (M.imag @ T)
    return M @ T


def local_matrices(space, k, coefficients, cells=None):
    """Element matrices ``(F, n_loc, n_loc)`` of ``k^-2 (A grad, grad) - (n ., .)``."""
    g = space.geometry
    sel = slice(None) if cells is None else cells
    x = g.x[sel]
    inside = np.broadcast_to(g.inside[sel][:, None], x.shape[:2])
    A, n = coefficients(x, inside)
    invJ = g.invJ[sel]
    B = np.einsum("fqai,fqij,fqbj->fqab", invJ, A, invJ)
    B = B * (g.wdet[sel] / k**2)[..., None, None]
    nl = g.phi.shape[1]
    K = _cmatmul(B.reshape(B.shape[0], -1), _stiffness_table(g.dphi))
    K -= _cmatmul(n * g.wdet[sel], _mass_table(g.phi))
    return K.reshape(-1, nl, nl)


def local_loads(space, f, cells=None):
    g = space.geometry
    sel = slice(None) if cells is None else cells
    x = g.x[sel]
    if getattr(f, "needs_inside", False):
        vals = f(x, np.broadcast_to(g.inside[sel][:, None], x.shape[:2]))
    else:
        vals = f(x)
    return _cmatmul(vals * g.wdet[sel], g.phi)


def assemble(space, k, coefficients, f=None, chunk=40000):
    """Assemble the reduced (Dirichlet-eliminated) system.

    ``coefficients(x, inside) -> (A, n)`` is evaluated at quadrature points
    ``x`` of shape ``(F, Q, 2)``; ``inside`` marks cells of the reference
    scatterer.  ``f(x)`` is the volume density of the load.
    """
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    F = space.mesh.n_cells
    fi = space.free_index
    rows, cols, data = [], [], []
    b = np.zeros(space.free.size, dtype=complex)
    for s in range(0, F, chunk):
        cells = slice(s, min(F, s + chunk))
        Ke = local_matrices(space, k, coefficients, cells)
        D = fi[space.cell_dofs[cells]]
        r = np.repeat(D, D.shape[1], axis=1).ravel()
        c = np.tile(D, (1, D.shape[1])).ravel()
        keep = (r >= 0) & (c >= 0)
        rows.append(r[keep])
        cols.append(c[keep])
        data.append(Ke.ravel()[keep])
        if f is not None:
            be = local_loads(space, f, cells)
            m = D >= 0
            np.add.at(b, D[m], be[m])
    n = space.free.size
    K = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    K.sum_duplicates()
    return FeSystem(space, K, b, k)


def solve(system, check_residual=True):
    """Sparse LU solve; the relative Galerkin residual is recorded and checked."""
    K, b = system.matrix, system.load
    space = system.space
    dofs = np.zeros(space.n_dofs, dtype=complex)
    if not np.any(b):
        return FeSolution(space, dofs, system.k, 0.0, dict(system.info))
    try:
        lu = splu(K.tocsc().astype(np.result_type(K.dtype, b.dtype)), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystemError(
            "sparse factorization failed; k may sit at a resonance of the truncated "
            f"problem or the shape is inadmissible ({exc})") from exc
    uf = lu.solve(b)
    res = float(np.linalg.norm(K @ uf - b) / np.linalg.norm(b))
    if check_residual and not res < RESIDUAL_TOL:
        raise SingularSystemError(f"Galerkin residual {res:.2e} exceeds {RESIDUAL_TOL:.0e}")
    dofs[space.free] = uf
    return FeSolution(space, dofs, system.k, res, dict(system.info))


def phi_ramp(eta):
    """Descending ramp: 1 on ``B_{2-eta}``, 0 outside ``B_{2-eta/2}``."""
    return RadialRamp(2.0 - eta, 2.0 - 0.5 * eta, descending=True)


def rhs_falt(k, direction=(1.0, 0.0), eta=0.1):
    """Volume density ``-k^-2 (2 grad(phi).grad(u_inc) + u_inc lap(phi))``."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("incident direction must be a unit vector")
    ramp = phi_ramp(eta)

    def f(x):
        u, gu = plane_wave(k, d, x)
        return -(2.0 * np.sum(ramp.gradient(x) * gu, -1) + u * ramp.laplacian(x)) / k**2

    f.support = (ramp.start, ramp.stop)
    return f


def rhs_contrast(k, domain_map, n_interior, direction=(1.0, 0.0)):
    """Density ``-det DPhi (1 - n0) u_inc(Phi(x))`` whose solution is the scattered field."""
    d = np.asarray(direction, dtype=float)

    def f(x, inside=None):
        rho = np.hypot(x[..., 0], x[..., 1])
        if inside is None:
            inside = rho < 1.0
        _, det, _ = domain_map.jacobian(x)
        u, _ = plane_wave(k, d, domain_map.map_point(x))
        return -det * np.where(inside, 1.0 - n_interior, 0.0) * u

    f.needs_inside = True
    return f


@dataclass(frozen=True)
class KNorms:
    k: float
    l2: float
    h1_semi: float
    h2_semi: float | None = None

    @property
    def h1k(self):
        return float(np.sqrt(self.l2**2 + self.h1_semi**2 / self.k**2))

    @property
    def h1(self):
        return float(np.sqrt(self.l2**2 + self.h1_semi**2))

    @property
    def h2k(self):
        if self.h2_semi is None:
            return None
        return float(np.sqrt(self.h1k**2 + self.h2_semi**2 / self.k**4))


def norms(space, k, solution=None, exact=None, cells=None, chunk=40000):
    """k-scaled norms of ``u_h - exact`` (either may be omitted) over selected cells.

    ``exact(x)`` returns ``(u, grad u)`` at points ``(..., 2)``.
    """
    g = space.geometry
    F = space.mesh.n_cells
    mask = np.ones(F, dtype=bool) if cells is None else np.asarray(cells)
    idx = np.flatnonzero(mask)
    l2 = h1 = 0.0
    for s in range(0, idx.size, chunk):
        sel = idx[s:s + chunk]
        w = g.wdet[sel]
        u = np.zeros(w.shape, dtype=complex)
        gu = np.zeros(w.shape + (2,), dtype=complex)
        if solution is not None:
            u, gu = solution.values_at_quadrature(sel)
        if exact is not None:
            ue, ge = exact(g.x[sel])
            u = u - ue
            gu = gu - ge
        l2 += float(np.sum(w * np.abs(u) ** 2))
        h1 += float(np.sum(w * np.sum(np.abs(gu) ** 2, -1)))
    return KNorms(k, np.sqrt(l2), np.sqrt(h1))


def callable_norms(space, k, fn, hess=None, cells=None):
    """Norms of a callable ``fn(x) -> (u, grad u)``; ``hess(x)`` adds the H2 seminorm."""
    base = norms(space, k, exact=fn, cells=cells)
    if hess is None:
        return base
    g = space.geometry
    mask = slice(None) if cells is None else np.asarray(cells)
    H = hess(g.x[mask])
    h2 = float(np.sqrt(np.sum(g.wdet[mask] * np.sum(np.abs(H) ** 2, axis=(-1, -2)))))
    return KNorms(k, base.l2, base.h1_semi, h2)


@dataclass(frozen=True)
class ThresholdReport:
    h: float
    k: float
    p: int
    quasi_indicator: float      # (hk)^p k
    relative_indicator: float   # (hk)^(2p) k
    regime: str


def mesh_threshold_report(h, k, p, c_quasi=1.0, c_relative=1.0):
    """Classify ``(h, k, p)`` by the two resolution indicators ``(hk)^p k`` and ``(hk)^{2p} k``."""
    if min(h, k, p) <= 0:
        raise ValueError("h, k and p must be positive")
    a = (h * k) ** p * k
    b = (h * k) ** (2 * p) * k
    if a <= c_quasi:
        regime = "quasioptimal"
    elif b <= c_relative:
        regime = "controllable-relative-error"
    else:
        regime = "out-of-regime"
    return ThresholdReport(h, k, p, a, b, regime)


def threshold_mesh_size(k, p, indicator=1.0, power=1):
    """``h`` with ``(hk)^(power*p) k = indicator``."""
    return (indicator / k) ** (1.0 / (power * p)) / k
