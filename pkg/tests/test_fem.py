import numpy as np
import pytest

from shapeuq.fem import (FeSpace, KNorms, SingularSystemError, assemble, mesh_threshold_report,
                         norms, rhs_falt, solve, threshold_mesh_size)
from shapeuq.mesh import build_annular_mesh, mesh_hierarchy
from shapeuq.pml import PmlProfile
from shapeuq.ramp import plane_wave
from shapeuq.shape import CutoffChi, DomainMap, RadialShape
from shapeuq.solver import MeshSettings, TransmissionSolver, make_mesh


def free_space(x, inside):
    A = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))
    return A, np.ones(x.shape[:-1])


def p1_reference_matrix(mesh, k):
    """Straight-sided P1 matrix built triangle by triangle, all dofs kept."""
    V = mesh.n_vertices
    K = np.zeros((V, V))
    for tri in mesh.cells:
        P = mesh.vertices[tri]
        T = np.array([P[1] - P[0], P[2] - P[0]]).T
        area = 0.5 * np.linalg.det(T)
        G = np.linalg.solve(T.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))
        S = area * G.T @ G
        M = area / 12 * (np.ones((3, 3)) + np.eye(3))
        K[np.ix_(tri, tri)] += S / k**2 - M
    return K


def test_p1_assembly_matches_hand_built_matrix():
    mesh = build_annular_mesh(R_tr=2.0, ring_radii=(1.0,), n_theta=8, q=1)
    space = FeSpace(mesh, 1, q=1, quad_degree=4)
    k = 1.7
    sysm = assemble(space, k, free_space)
    ref = p1_reference_matrix(mesh, k)[np.ix_(space.free, space.free)]
    assert np.allclose(sysm.matrix.toarray(), ref, atol=1e-13)
    # complex symmetric by construction
    assert abs(sysm.matrix - sysm.matrix.T).max() < 1e-14


def manufactured(k, R=3.0):
    d = np.array([1.0, 0.0])

    def exact(x):
        w, gw = plane_wave(k, d, x)
        g = R**2 - np.sum(x**2, -1)
        return g * w, -2 * x * w[..., None] + g[..., None] * gw

    def f(x):
        w, _ = plane_wave(k, d, x)
        return (4 + 4j * k * x[..., 0]) * w / k**2

    return exact, f


@pytest.mark.parametrize("p", [1, 2, 3])
def test_manufactured_solution_rates(p):
    k = 2.0
    exact, f = manufactured(k)
    errs, hs = [], []
    for mesh in mesh_hierarchy(3, R_tr=3.0, ring_radii=(1.0,), n_theta=16, q=p):
        space = FeSpace(mesh, p)
        sol = solve(assemble(space, k, free_space, f))
        e = norms(space, k, sol, exact)
        errs.append((e.l2, e.h1_semi))
        hs.append(mesh.mesh_size())
    errs = np.array(errs)
    rates = np.log(errs[:-1] / errs[1:]) / np.log(np.array(hs[:-1]) / np.array(hs[1:]))[:, None]
    assert rates[-1, 1] == pytest.approx(p, abs=0.3)
    assert rates[-1, 0] == pytest.approx(p + 1, abs=0.4)


def test_zero_load_gives_zero_solution():
    mesh = build_annular_mesh(R_tr=2.0, ring_radii=(1.0,), n_theta=8)
    space = FeSpace(mesh, 1)
    sol = solve(assemble(space, 1.0, free_space))
    assert not np.any(sol.dofs)


def test_singular_matrix_is_reported():
    mesh = build_annular_mesh(R_tr=2.0, ring_radii=(1.0,), n_theta=8)
    space = FeSpace(mesh, 1)

    def zero(x, inside):
        return np.zeros(x.shape[:-1] + (2, 2)), np.zeros(x.shape[:-1])

    with pytest.raises(SingularSystemError):
        solve(assemble(space, 1.0, zero, lambda x: np.ones(x.shape[:-1])))


def test_falt_load_lives_in_the_ramp_annulus(rng):
    f = rhs_falt(3.0, eta=0.1)
    rho = np.concatenate([rng.uniform(0, 1.9, 200), rng.uniform(1.95, 3, 200)])
    th = rng.uniform(0, 2 * np.pi, rho.size)
    x = np.stack([rho * np.cos(th), rho * np.sin(th)], -1)
    assert np.all(f(x) == 0)
    x = np.array([[1.925, 0.0], [0.0, -1.93]])
    assert np.all(np.abs(f(x)) > 0)
    with pytest.raises(ValueError):
        rhs_falt(3.0, direction=(1.0, 1.0))


def test_alternative_and_contrast_loads_agree_inside_the_ramp():
    # on B_{2-eta} the two formulations differ by the pulled-back incident wave
    prof = PmlProfile(sigma0=0.5)
    shape = RadialShape([0.1, 0.05, -0.03])
    dm = DomainMap(shape, CutoffChi(0.2))
    gaps = []
    for lev in (0, 1):
        mesh = make_mesh(prof, MeshSettings(16, lev, 4, 8.0), q=2)
        alt = TransmissionSolver(mesh, prof, 2.0, 1 / 3, 2)
        con = TransmissionSolver(mesh, prof, 2.0, 1 / 3, 2, rhs="contrast")
        cells = np.flatnonzero(mesh.cells_between(0.0, 1.9))
        ua, _ = alt.solve(shape).values_at_quadrature(cells)
        us, _ = con.solve(shape).values_at_quadrature(cells)
        g = alt.space.geometry
        ui, _ = plane_wave(2.0, np.array([1.0, 0.0]), dm.map_point(g.x[cells]))
        gaps.append(np.sqrt(np.sum(g.wdet[cells] * np.abs(ua - ui - us) ** 2)))
    assert gaps[0] < 0.15
    assert gaps[0] / gaps[1] > 4


def test_knorms():
    n = KNorms(k=2.0, l2=3.0, h1_semi=8.0, h2_semi=16.0)
    assert n.h1k == pytest.approx(5.0)
    assert n.h1 == pytest.approx(np.sqrt(73))
    assert n.h2k == pytest.approx(np.sqrt(41))


def test_threshold_classification():
    k, p = 10.0, 2
    h = threshold_mesh_size(k, p)
    assert mesh_threshold_report(h, k, p).quasi_indicator == pytest.approx(1.0)
    assert mesh_threshold_report(0.9 * h, k, p).regime == "quasioptimal"
    h2 = threshold_mesh_size(k, p, power=2)
    assert h2 > h
    assert mesh_threshold_report(0.5 * (h + h2), k, p).regime == "controllable-relative-error"
    assert mesh_threshold_report(1.1 * h2, k, p).regime == "out-of-regime"
    with pytest.raises(ValueError):
        mesh_threshold_report(0.0, k, p)
