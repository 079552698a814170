import json

import numpy as np
import pytest

from shapeuq.fem import FeSpace
from shapeuq.mesh import (_grade_layers, build_annular_mesh, check_orientation, default_rings,
                          mesh_hierarchy, refine)


@pytest.fixture(scope="module")
def coarse():
    return build_annular_mesh(R_tr=3.0, ring_radii=default_rings(), n_theta=16, q=2)


def test_disk_topology(coarse):
    assert coarse.euler_characteristic() == 1
    assert coarse.euler_characteristic() == refine(coarse).euler_characteristic()


def test_ring_vertices_lie_on_their_circles(coarse):
    for i, r in enumerate(coarse.circles):
        v = coarse.vertices[coarse.vertex_ring == i]
        assert v.shape[0] > 0
        assert np.allclose(np.hypot(v[:, 0], v[:, 1]), r, atol=1e-13)


def test_cells_are_counter_clockwise(coarse):
    t = coarse.vertices[coarse.cells]
    e1, e2 = t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]
    assert np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0)


def test_no_cell_straddles_a_ring(coarse):
    t = coarse.vertices[coarse.cells]
    r = np.hypot(t[..., 0], t[..., 1])
    for c in coarse.circles[:-1]:
        assert not np.any((r.min(1) < c - 1e-12) & (r.max(1) > c + 1e-12))


def test_refinement_halves_mesh_size(coarse):
    fine = refine(coarse)
    assert fine.n_cells == 4 * coarse.n_cells
    assert fine.mesh_size() / coarse.mesh_size() == pytest.approx(0.5, abs=0.05)
    # midpoints of arc edges are pushed back on the circle
    for i, r in enumerate(fine.circles):
        v = fine.vertices[fine.vertex_ring == i]
        assert np.allclose(np.hypot(v[:, 0], v[:, 1]), r, atol=1e-13)
    check_orientation(fine, 2)


def test_tags(coarse):
    assert set(coarse.tags) >= {"outer", "interface", "pml_start"}
    v = coarse.vertices[coarse.tags["interface"]]
    assert np.allclose(np.hypot(v[:, 0], v[:, 1]), 1.0)
    v = coarse.vertices[coarse.tags["pml_start"]]
    assert np.allclose(np.hypot(v[:, 0], v[:, 1]), 2.25)
    assert coarse.boundary_edges().shape[0] == coarse.tags["outer"].size


def test_inside_mask_matches_unit_disk(coarse):
    t = coarse.vertices[coarse.cells]
    r = np.hypot(t[..., 0], t[..., 1]).max(1)
    assert np.array_equal(coarse.inside_mask(), r <= 1 + 1e-12)


@pytest.mark.parametrize("q, rate", [(1, 2), (2, 4), (3, 4)])
def test_curved_area_converges(q, rate):
    # exact area of B_3 is 9 pi; the straight mesh is second order, curved cells better
    errs = []
    for m in mesh_hierarchy(3, R_tr=3.0, n_theta=16, q=q):
        space = FeSpace(m, 1, q=q, quad_degree=2 * q + 2)
        errs.append(abs(space.geometry.wdet.sum() - 9 * np.pi))
    if q == 1:
        assert errs[0] > 1e-3
    observed = np.log2(errs[0] / errs[1])
    assert observed > rate - 0.3 or errs[1] < 1e-12


def test_interior_area_is_pi():
    errs = []
    for m in mesh_hierarchy(2, R_tr=3.0, n_theta=16, q=3):
        g = FeSpace(m, 1, q=3, quad_degree=10).geometry
        errs.append(abs(g.wdet[m.inside_mask()].sum() - np.pi))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] > 12


def test_grading_rule():
    r = _grade_layers(np.array([0.5, 1.0, 1.01, 2.0]))
    thick = np.diff(np.concatenate([[0.0], r]))
    for i in range(1, len(thick)):
        nb = [thick[j] for j in (i - 1, i + 1) if 1 <= j < len(thick)]
        assert thick[i] <= 2 * min(nb) * (1 + 1e-9)
    assert {0.5, 1.0, 1.01, 2.0} <= set(np.round(r, 12))


def test_min_angle_bounded(coarse):
    angles = [coarse.min_angle()]
    m = coarse
    for _ in range(2):
        m = refine(m)
        angles.append(m.min_angle())
    assert min(angles) >= 15.0
    assert all(b > 0.9 * a for a, b in zip(angles, angles[1:]))


def test_bad_arguments():
    with pytest.raises(ValueError):
        build_annular_mesh(n_theta=15)
    with pytest.raises(ValueError):
        build_annular_mesh(ring_radii=(0.5, 1.5))
    with pytest.raises(ValueError):
        build_annular_mesh(R_tr=2.0, ring_radii=(1.0, 2.5))


def test_to_json_roundtrip(coarse, tmp_path):
    p = tmp_path / "mesh.json"
    coarse.to_json(p)
    data = json.loads(p.read_text())
    assert np.array_equal(np.array(data["cells"]), coarse.cells)
    assert data["circles"] == list(coarse.circles)
    assert set(data["tags"]) == set(coarse.tags)
