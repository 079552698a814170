"""
Scattering by a penetrable disk: finite elements against the series solution
============================================================================

The unit disk with refractive index n_i = 1/3 is hit by the plane wave
exp(i k x_1).  The series (Mie) solution is exact, so it serves as the yardstick
for the PML-truncated finite-element solve and for the volume far-field formula.
"""

import numpy as np

from shapeuq import PmlProfile
from shapeuq.farfield import directions, mie_farfield, mie_solve
from shapeuq.fem import mesh_threshold_report
from shapeuq.solver import MeshSettings, TransmissionSolver, make_mesh

k, n_i = 5.0, 1 / 3
theta = directions(256)

# exact far field from the series coefficients
series = mie_solve(k, n_i)
exact = mie_farfield(series, theta)
print(f"series truncated at |m| <= {series.M}, |u_inf|_L2 = {exact.l2():.6f}")

# a mild PML: strong damping needs a much finer mesh inside the layer
profile = PmlProfile(R1=2.25, R2=3.0, R_tr=3.0, sigma0=0.5)

for p in (1, 2):
    for level in (0, 1):
        mesh = make_mesh(profile, MeshSettings(16, level, band_layers=4, thin_ratio=8.0), q=p)
        solver = TransmissionSolver(mesh, profile, k, n_i, p)
        sol = solver.solve()
        ff = solver.farfield(sol, theta)
        err = (ff - exact).l2() / exact.l2()
        regime = mesh_threshold_report(mesh.mesh_size(), k, p).regime
        print(f"p={p} level={level}: {solver.space.n_dofs:6d} dofs, "
              f"far-field rel. error {err:.2e} ({regime})")

# forward and backward scattering amplitudes
i0, i180 = 0, len(theta) // 2
print("forward  u_inf(0)  =", np.round(exact.values[i0], 6))
print("backward u_inf(pi) =", np.round(exact.values[i180], 6))
