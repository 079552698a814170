"""Interface-fitted curved triangular meshes of a disk.

The disk ``B_{R_tr}`` is cut into concentric layers whose boundaries include
every requested ring (unit interface, cutoff radii, PML radii).  Each layer
is triangulated from vertices placed on circles; the angular vertex count may
double or halve from one circle to the next so that thin layers and the disk
centre still get well-shaped cells.

Cells are straight-sided except for edges joining two consecutive vertices of
a fitted ring, which are exact circular arcs.  A cell's geometry map is the
affine map plus a blended correction pulling that edge onto its arc; it is
sampled at Lagrange nodes to obtain isoparametric elements of any order.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .fem_reference import LagrangeBasis, lagrange_points

TAG_TOL = 1e-12
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


@dataclass(frozen=True)
class AnnularMesh:
    vertices: np.ndarray      # (V, 2)
    cells: np.ndarray         # (F, 3) counter-clockwise vertex indices
    vertex_ring: np.ndarray   # (V,) index into ``circles`` or -1
    cell_region: np.ndarray   # (F,) index of the annulus between consecutive circles
    circles: tuple            # fitted radii, increasing, ending with R_tr
    level: int = 0
    tags: dict = field(default_factory=dict)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def R_tr(self):
        return self.circles[-1]

    @property
    def ring_radii(self):
        return self.circles[:-1]

    def edges(self):
        """Unique undirected edges as sorted vertex pairs, and the ``(F, 3)`` cell-to-edge map."""
        e = np.sort(self.cells[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        return uniq, inv.reshape(-1, 3)

    def region_bounds(self):
        stops = np.concatenate([[0.0], self.circles])
        return stops[self.cell_region], stops[self.cell_region + 1]

    def inside_mask(self):
        """Cells of the reference scatterer ``|x| < 1``."""
        return self.region_bounds()[1] <= 1.0 + TAG_TOL

    def cells_between(self, r_lo, r_hi):
        lo, hi = self.region_bounds()
        return (lo >= r_lo - TAG_TOL) & (hi <= r_hi + TAG_TOL)

    def curved_edges(self):
        """Per cell: local index of the edge lying on a fitted ring (-1 if none) and its radius."""
        ring = self.vertex_ring[self.cells[:, LOCAL_EDGES]]  # (F, 3, 2)
        on = (ring[..., 0] >= 0) & (ring[..., 0] == ring[..., 1])
        which = np.where(on.any(axis=1), np.argmax(on, axis=1), -1)
        radius = np.zeros(self.n_cells)
        has = which >= 0
        idx = ring[np.flatnonzero(has), which[has], 0]
        radius[has] = np.asarray(self.circles)[idx]
        return which, radius

    def geometry_nodes(self, q):
        """Physical positions ``(F, n_loc, 2)`` of the order-``q`` Lagrange nodes."""
        return map_barycentric(self, lagrange_points(q))

    def boundary_edges(self):
        uniq, _ = self.edges()
        ring = self.vertex_ring
        outer = len(self.circles) - 1
        return uniq[(ring[uniq[:, 0]] == outer) & (ring[uniq[:, 1]] == outer)]

    def mesh_size(self):
        """Maximum circumdiameter over the straight-sided vertex triangles."""
        return float(np.max(circumdiameters(self.vertices[self.cells])))

    def min_angle(self):
        return float(np.min(triangle_angles(self.vertices[self.cells])))

    def euler_characteristic(self):
        uniq, _ = self.edges()
        return self.n_vertices - uniq.shape[0] + self.n_cells

    def to_json(self, path):
        data = {
            "circles": list(self.circles),
            "level": self.level,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "cell_region": self.cell_region.tolist(),
            "tags": {k: np.asarray(v).tolist() for k, v in self.tags.items()},
        }
        with open(path, "w") as fh:
            json.dump(data, fh)


def _arc_angles(pa, pb):
    ta = np.arctan2(pa[..., 1], pa[..., 0])
    tb = np.arctan2(pb[..., 1], pb[..., 0])
    d = np.mod(tb - ta + np.pi, 2 * np.pi) - np.pi
    return ta, d


def map_barycentric(mesh, bary):
    """Map barycentric points ``(P, 3)`` of every cell to physical space ``(F, P, 2)``."""
    bary = np.asarray(bary, dtype=float)
    X = mesh.vertices[mesh.cells]  # (F, 3, 2)
    out = np.einsum("pi,fij->fpj", bary, X)
    which, radius = mesh.curved_edges()
    for e, (a, b) in enumerate(LOCAL_EDGES):
        sel = np.flatnonzero(which == e)
        if sel.size == 0:
            continue
        s = bary[:, a] + bary[:, b]
        ss = np.where(s > 0, s, 1.0)
        t = np.where(s > 0, bary[:, b] / ss, 0.0)
        pa, pb = X[sel, a], X[sel, b]
        ta, d = _arc_angles(pa, pb)
        ang = ta[:, None] + t[None] * d[:, None]
        arc = radius[sel, None, None] * np.stack([np.cos(ang), np.sin(ang)], -1)
        chord = (1 - t)[None, :, None] * pa[:, None] + t[None, :, None] * pb[:, None]
        out[sel] += s[None, :, None] * (arc - chord)
    return out


def circumdiameters(tri):
    a = np.linalg.norm(tri[:, 1] - tri[:, 2], axis=1)
    b = np.linalg.norm(tri[:, 2] - tri[:, 0], axis=1)
    c = np.linalg.norm(tri[:, 0] - tri[:, 1], axis=1)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    area2 = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return a * b * c / area2


def triangle_angles(tri):
    out = []
    for i in range(3):
        p, q, r = tri[:, i], tri[:, (i + 1) % 3], tri[:, (i + 2) % 3]
        u, v = q - p, r - p
        cosang = np.sum(u * v, 1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return np.stack(out, axis=1)


def default_rings(lam=0.2, eta=0.1, R1=2.25, R2=3.0, R_tr=3.0):
    """Circles a mesh must resolve for the default solver configuration."""
    rings = {1.0, 2.0 - lam, 2.0 - eta, 2.0 - eta / 2.0, R1}
    if R2 < R_tr:
        rings.add(R2)
    return tuple(sorted(r for r in rings if 0 < r < R_tr))


def _allowed_counts(n_theta, n_min=12):
    counts = [n_theta]
    n = n_theta
    while n % 2 == 0 and n // 2 >= n_min:
        n //= 2
        counts.append(n)
    return sorted(counts)


def _circle_count(target, allowed):
    """Smallest count ``n_theta * 2^m`` (or allowed divisor) that is >= ``target / sqrt 2``."""
    for c in allowed:
        if c >= target / np.sqrt(2.0):
            return c
    n = allowed[-1]
    while n < target / np.sqrt(2.0):
        n *= 2
    return n


def _inner_circles(r_first, h, allowed):
    """Circles inside the first ring.

    Walking inward, each layer is as thick as the angular spacing on its outer
    circle (capped at ``h``); the walk stops at the fan radius where the
    spacing on the coarsest angular count drops below ``h``.
    """
    radii = [r_first]
    rho = r_first
    n_min = allowed[0]
    while True:
        n = _circle_count(2 * np.pi * rho / h, allowed)
        arc = 2 * np.pi * rho / n
        if n == n_min and arc <= h:
            break
        rho -= min(h, arc)
        radii.append(rho)
    return radii[::-1]


def _radial_circles(ring_radii, R_tr, h_radial, allowed):
    stops = [r for r in ring_radii if 0.0 < r < R_tr] + [R_tr]
    radii = _inner_circles(stops[0], h_radial, allowed)
    for a, b in zip(stops[:-1], stops[1:]):
        m = max(1, int(np.ceil((b - a) / h_radial - 1e-9)))
        radii.extend(a + (b - a) * np.arange(1, m + 1) / m)
    return _grade_layers(np.array(radii))


def _grade_layers(radii, growth=2.0):
    """Bisect layers until no layer is more than ``growth`` times thicker than a neighbour."""
    r = list(radii)
    while True:
        edges = [0.0] + r
        thick = np.diff(edges)
        # the central fan is exempt from the grading rule
        bad = [i for i in range(1, len(thick))
               if thick[i] > growth * (1 + 1e-9) * min(
                   thick[i - 1] if i > 1 else np.inf,
                   thick[i + 1] if i + 1 < len(thick) else np.inf)]
        if not bad:
            return np.array(r)
        for i in sorted(bad, reverse=True):
            r.insert(i, 0.5 * (edges[i] + edges[i + 1]))


def build_annular_mesh(R_tr=3.0, ring_radii=None, n_theta=32, radial_grading=1.0, q=1,
                       thin_ratio=2.5):
    """Build a fitted mesh of ``B_{R_tr}``.

    ``n_theta`` is the vertex count on the unit circle and sets the target
    cell size ``h = 2 pi / n_theta``.  Layers are at most ``radial_grading * h``
    thick; on each circle the angular spacing is kept below ``thin_ratio``
    times the thinner adjacent layer.  The order-``q`` geometry is checked for
    inverted cells.
    """
    if n_theta < 8 or n_theta % 2:
        raise ValueError("n_theta must be an even integer >= 8")
    if ring_radii is None:
        ring_radii = default_rings(R_tr=R_tr)
    ring_radii = tuple(sorted(float(r) for r in ring_radii))
    if 1.0 not in ring_radii:
        raise ValueError("ring radii must contain the unit interface")
    if ring_radii[0] <= 0 or ring_radii[-1] >= R_tr:
        raise ValueError("ring radii must lie strictly inside (0, R_tr)")
    circles = ring_radii + (float(R_tr),)
    h = 2 * np.pi / n_theta
    allowed = _allowed_counts(n_theta)
    radii = _radial_circles(ring_radii, R_tr, radial_grading * h, allowed)
    thick = np.diff(np.concatenate([[0.0], radii]))

    counts = []
    for i, rho in enumerate(radii):
        t_adj = thick[i] if i + 1 == len(radii) else min(thick[i], thick[i + 1])
        target = max(2 * np.pi * rho / h, 2 * np.pi * rho / (thin_ratio * t_adj) * np.sqrt(2.0))
        counts.append(_circle_count(target, allowed))
    # adjacent circles may differ by at most a factor of two
    changed = True
    while changed:
        changed = False
        for i in range(len(counts) - 1):
            a, b = counts[i], counts[i + 1]
            if a > 2 * b:
                counts[i + 1] = a // 2
                changed = True
            elif b > 2 * a:
                counts[i] = b // 2
                changed = True

    verts = [np.zeros((1, 2))]
    vring = [np.array([-1])]
    offsets = []
    start = 1
    for rho, n in zip(radii, counts):
        offsets.append(start)
        th = 2 * np.pi * np.arange(n) / n
        verts.append(rho * np.stack([np.cos(th), np.sin(th)], axis=1))
        idx = next((i for i, r in enumerate(circles) if abs(r - rho) < TAG_TOL), -1)
        vring.append(np.full(n, idx))
        start += n

    stops = np.concatenate([[0.0], circles])

    def region_of(r_in, r_out):
        return int(np.searchsorted(stops, 0.5 * (r_in + r_out)) - 1)

    cells, region = [], []
    n0 = counts[0]
    for j in range(n0):
        cells.append([0, offsets[0] + j, offsets[0] + (j + 1) % n0])
    region += [region_of(0.0, radii[0])] * n0

    for i in range(len(radii) - 1):
        na, nb = counts[i], counts[i + 1]
        oa, ob = offsets[i], offsets[i + 1]

        def A(j):
            return oa + j % na

        def B(j):
            return ob + j % nb

        before = len(cells)
        if na == nb:
            for j in range(na):
                cells.append([A(j), B(j), B(j + 1)])
                cells.append([A(j), B(j + 1), A(j + 1)])
        elif nb == 2 * na:
            for j in range(na):
                cells.append([A(j), B(2 * j), B(2 * j + 1)])
                cells.append([A(j), B(2 * j + 1), A(j + 1)])
                cells.append([A(j + 1), B(2 * j + 1), B(2 * j + 2)])
        elif na == 2 * nb:
            for j in range(nb):
                cells.append([A(2 * j), B(j), A(2 * j + 1)])
                cells.append([A(2 * j + 1), B(j), B(j + 1)])
                cells.append([A(2 * j + 1), B(j + 1), A(2 * j + 2)])
        else:
            raise RuntimeError("inconsistent angular counts")
        region += [region_of(radii[i], radii[i + 1])] * (len(cells) - before)

    mesh = AnnularMesh(
        vertices=np.concatenate(verts),
        cells=np.array(cells, dtype=np.int64),
        vertex_ring=np.concatenate(vring).astype(np.int64),
        cell_region=np.array(region, dtype=np.int64),
        circles=circles,
    )
    mesh = _with_tags(mesh)
    check_orientation(mesh, q)
    return mesh


def _with_tags(mesh):
    circles = list(mesh.circles)
    tags = {
        "outer": np.flatnonzero(mesh.vertex_ring == len(circles) - 1),
        "interface": np.flatnonzero(mesh.vertex_ring == circles.index(1.0)),
    }
    pml = [i for i, r in enumerate(circles[:-1]) if r > 2.0]
    if pml:
        tags["pml_start"] = np.flatnonzero(mesh.vertex_ring == pml[0])
    return AnnularMesh(mesh.vertices, mesh.cells, mesh.vertex_ring, mesh.cell_region,
                       mesh.circles, mesh.level, tags)


def check_orientation(mesh, q):
    """Raise if an order-``q`` cell has a non-positive Jacobian; return the sampled values."""
    geo = LagrangeBasis(q)
    pts = lagrange_points(q + 2)[:, 1:]
    nodes = mesh.geometry_nodes(q)
    J = np.einsum("pni,fnj->fpji", geo.gradients(pts), nodes)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0):
        raise ValueError("mesh contains inverted curved elements")
    return det


def refine(mesh):
    """Red refinement: every cell is split into four.

    Midpoints of arc edges are placed on their circle, all others are chord
    midpoints, so fitted rings stay exactly resolved.
    """
    V = mesh.n_vertices
    uniq, c2e = mesh.edges()
    pa, pb = mesh.vertices[uniq[:, 0]], mesh.vertices[uniq[:, 1]]
    ra, rb = mesh.vertex_ring[uniq[:, 0]], mesh.vertex_ring[uniq[:, 1]]
    arc = (ra >= 0) & (ra == rb)
    mids = 0.5 * (pa + pb)
    if np.any(arc):
        R = np.asarray(mesh.circles)[ra[arc]]
        ta, d = _arc_angles(pa[arc], pb[arc])
        ang = ta + 0.5 * d
        mids[arc] = R[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    new_ring = np.where(arc, ra, -1)

    v0, v1, v2 = mesh.cells.T
    m01, m12, m20 = (V + c2e).T
    cells = np.stack([np.stack([v0, m01, m20], 1), np.stack([m01, v1, m12], 1),
                      np.stack([m20, m12, v2], 1), np.stack([m01, m12, m20], 1)], axis=1)
    out = AnnularMesh(
        vertices=np.concatenate([mesh.vertices, mids]),
        cells=cells.reshape(-1, 3).astype(np.int64),
        vertex_ring=np.concatenate([mesh.vertex_ring, new_ring]),
        cell_region=np.repeat(mesh.cell_region, 4),
        circles=mesh.circles,
        level=mesh.level + 1,
    )
    return _with_tags(out)


def mesh_hierarchy(n_levels, **kwargs):
    """Coarse mesh followed by ``n_levels - 1`` uniform refinements."""
    meshes = [build_annular_mesh(**kwargs)]
    for _ in range(n_levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes
