"""
Expected far field over random shapes with Smolyak quadrature
=============================================================

Two uniform parameters y_1, y_2 in [-1, 1] drive the displacement
r = (1/k)(0.2 y_1 r_1 + 0.1 y_2 r_2).  Index sets grow with the point budget;
nested Clenshaw-Curtis nodes let every level reuse earlier solves.
"""

import numpy as np

from shapeuq import PmlProfile
from shapeuq.farfield import directions
from shapeuq.solver import MeshSettings, TransmissionSolver, make_mesh
from shapeuq.uq import (WeightSequence, build_index_set, combination_coeffs, farfield_integrand,
                        l2_circle, mean_farfield, smolyak_points, tensor_reference)

k = 5.0
weights = WeightSequence((0.2, 0.1))
profile = PmlProfile(sigma0=0.5)
mesh = make_mesh(profile, MeshSettings(16, 0, band_layers=4, thin_ratio=8.0), q=2)
solver = TransmissionSolver(mesh, profile, k, 1 / 3, 2)
theta = directions(64)

sets = [build_index_set(weights, 2, b) for b in (1, 5, 13, 29)]
for L in sets:
    print(f"{len(smolyak_points(L)):3d} points, indices {list(L.indices)}")
print("combination coefficients of the last set:", combination_coeffs(sets[-1]))

res = mean_farfield(solver, weights, 2, sets, theta)

# a dense tensor Gauss rule gives the reference mean (64 solves on this coarse mesh)
ref = tensor_reference(farfield_integrand(solver, weights, 2, theta), 2, n=8)
for n, m in zip(res.n_points, res.means):
    print(f"{n:3d} points: |E[u_inf] - reference|_L2 = {l2_circle(m - ref):.2e}")
print("successive differences:", ["%.1e" % d for d in res.differences()])
print("mean forward amplitude:", np.round(res.mean[0], 6))
