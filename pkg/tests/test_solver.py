import numpy as np
import pytest

from shapeuq.farfield import directions, mie_farfield, mie_solve
from shapeuq.fem import FeSpace, assemble, rhs_contrast, rhs_falt
from shapeuq.pml import PmlProfile, pml_coefficients
from shapeuq.shape import CutoffChi, DomainMap, RadialShape
from shapeuq.solver import MeshSettings, TransmissionSolver, band_rings, make_mesh
from shapeuq.uq import MultiIndexSet, WeightSequence, mean_farfield

PROFILE = PmlProfile(sigma0=0.5)


@pytest.fixture(scope="module")
def mesh():
    return make_mesh(PROFILE, MeshSettings(12, 0, 2, 8.0), q=2)


@pytest.mark.parametrize("rhs", ["falt", "contrast"])
def test_split_assembly_equals_full_assembly(mesh, rhs):
    shape = RadialShape([0.08 + 0.02j, -0.05, 0.03])
    solver = TransmissionSolver(mesh, PROFILE, 3.0, 1 / 3, 2, rhs=rhs)
    fast = solver.assemble(shape)
    dm = DomainMap(shape, CutoffChi(0.2))
    f = rhs_falt(3.0) if rhs == "falt" else rhs_contrast(3.0, dm, 1 / 3)
    full = assemble(FeSpace(mesh, 2), 3.0,
                    lambda x, inside: pml_coefficients(PROFILE, dm, 1 / 3, x, inside), f)
    assert abs(fast.matrix - full.matrix).max() < 1e-13
    assert np.allclose(fast.load, full.load, atol=1e-14)


def test_shape_cells_cover_the_cutoff_support(mesh):
    solver = TransmissionSolver(mesh, PROFILE, 3.0, 1 / 3, 2)
    rho = np.hypot(*solver.space.geometry.x[solver.fixed_cells].reshape(-1, 2).T)
    lo, hi = solver.chi.support()
    assert np.all((rho <= lo + 1e-12) | (rho >= hi - 1e-12))


def test_band_rings():
    assert band_rings(0.1, 1) == ()
    assert band_rings(0.1, 4) == pytest.approx((1.9125, 1.925, 1.9375))


def test_disk_far_field_close_to_series(mesh):
    solver = TransmissionSolver(mesh, PROFILE, 3.0, 1 / 3, 2)
    theta = directions(64)
    ff = solver.farfield_of_shape(None, theta)
    ref = mie_farfield(mie_solve(3.0, 1 / 3), theta)
    assert (ff - ref).l2() < 0.05 * ref.l2()


def test_argument_validation(mesh):
    with pytest.raises(ValueError):
        TransmissionSolver(mesh, PROFILE, 3.0, 1 / 3, 2, rhs="other")
    with pytest.raises(ValueError):
        TransmissionSolver(mesh, PROFILE, 3.0, 1 / 3, 2, eta=0.3)


def test_mean_far_field_of_constant_shape_family(mesh):
    # a single-point rule reproduces the nominal far field
    solver = TransmissionSolver(mesh, PROFILE, 3.0, 1 / 3, 1)
    theta = directions(16)
    w = WeightSequence((0.2, 0.1))
    res = mean_farfield(solver, w, 2, [MultiIndexSet.box(2, 0), MultiIndexSet.total_degree(2, 1)],
                        theta)
    nominal = solver.farfield_of_shape(None, theta).values
    assert np.allclose(res.means[0], nominal)
    assert res.n_points == [1, 5]
    assert len(res.manifest) == 5
    assert res.differences()[0] < 0.05 * np.linalg.norm(nominal)
    with pytest.raises(ValueError):
        mean_farfield(solver, w, 3, [MultiIndexSet.box(2, 0)], theta)


def test_contrast_load_uses_complex_map():
    shape = RadialShape([0.05j])
    dm = DomainMap(shape, CutoffChi(0.2))
    f = rhs_contrast(2.0, dm, 1 / 3)
    x = np.array([[0.9, 0.0]])
    y = dm.map_point(x)
    assert np.iscomplexobj(y)
    expected = -dm.jacobian(x)[1] * (1 - 1 / 3) * np.exp(2j * y[..., 0])
    assert np.allclose(f(x, np.array([True])), expected)
