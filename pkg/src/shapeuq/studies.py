"""Mesh-refinement, PML-width and far-field studies against the disk series solution."""

import time
from dataclasses import dataclass, field

import numpy as np

from .farfield import (C2, directions, farfield_from_callable, mie_farfield, mie_field,
                       mie_norms, mie_solve, psi_ramp)
from .fem import mesh_threshold_report, norms
from .mesh import refine
from .pml import PmlProfile
from .solver import MeshSettings, TransmissionSolver, make_mesh


def fit_slope(x, y):
    """Least-squares slope, intercept and R^2 of ``y`` against ``x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), float(r2)


@dataclass
class ConvergenceRow:
    level: int
    h: float
    n_dofs: int
    l2: float
    h1k: float
    rel_l2: float
    rel_h1k: float
    regime: str
    seconds: float


@dataclass
class ConvergenceStudy:
    k: float
    n_i: float
    p: int
    rows: list = field(default_factory=list)

    def pairwise_rates(self, which="h1k"):
        e = np.array([getattr(r, which) for r in self.rows])
        h = np.array([r.h for r in self.rows])
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])

    def fitted_rate(self, which="h1k"):
        e = [getattr(r, which) for r in self.rows]
        h = [r.h for r in self.rows]
        return fit_slope(np.log(h), np.log(e))[0]


def _alt_exact(sol, eta):
    return lambda x: mie_field(sol, x, kind="alt", eta=eta)


def convergence_study(k, n_i, p, levels, mesh=MeshSettings(n_theta=16, band_layers=4,
                                                                thin_ratio=8.0),
                      profile=PmlProfile(sigma0=0.5), eta=0.1, lam=0.2, first_level=0,
                      log=None):
    """Errors on ``B_R1`` of the disk problem over uniformly refined meshes."""
    series = mie_solve(k, n_i)
    exact = _alt_exact(series, eta)
    ref = mie_norms(series, R=profile.R1, kind="alt", eta=eta)
    study = ConvergenceStudy(k, n_i, p)
    m = make_mesh(profile, MeshSettings(mesh.n_theta, first_level, mesh.band_layers,
                                        mesh.thin_ratio, mesh.radial_grading),
                  lam=lam, eta=eta, q=p)
    for lev in range(first_level, first_level + levels):
        t0 = time.perf_counter()
        solver = TransmissionSolver(m, profile, k, n_i, p, lam=lam, eta=eta)
        sol = solver.solve()
        cells = m.cells_between(0.0, profile.R1)
        e = norms(solver.space, k, sol, exact, cells)
        h = m.mesh_size()
        row = ConvergenceRow(lev, h, solver.space.n_dofs, e.l2, e.h1k, e.l2 / ref.l2,
                             e.h1k / ref.h1k, mesh_threshold_report(h, k, p).regime,
                             time.perf_counter() - t0)
        study.rows.append(row)
        if log:
            log(row)
        if lev + 1 < first_level + levels:
            m = refine(m)
    return study


@dataclass
class PmlStudy:
    k: float
    R_tr: np.ndarray
    errors: np.ndarray
    n_dofs: list

    def fit(self):
        """``(slope, intercept, R^2)`` of ``log(error)`` against ``R_tr``."""
        return fit_slope(self.R_tr, np.log(self.errors))


def pml_study(k, n_i, p, R_tr_values, sigma0=0.1, R1=2.25, R2=2.5, level=1,
              mesh=MeshSettings(n_theta=16, band_layers=4, thin_ratio=8.0), eta=0.1,
              lam=0.2, log=None):
    """``H1_k(B_R1)`` error against the series solution as the layer gets wider."""
    series = mie_solve(k, n_i)
    exact = _alt_exact(series, eta)
    errs, dofs = [], []
    for R_tr in R_tr_values:
        prof = PmlProfile(R1=R1, R2=R2, R_tr=R_tr, sigma0=sigma0)
        m = make_mesh(prof, MeshSettings(mesh.n_theta, level, mesh.band_layers,
                                         mesh.thin_ratio, mesh.radial_grading),
                      lam=lam, eta=eta, q=p)
        solver = TransmissionSolver(m, prof, k, n_i, p, lam=lam, eta=eta)
        sol = solver.solve()
        e = norms(solver.space, k, sol, exact, m.cells_between(0.0, R1)).h1k
        errs.append(e)
        dofs.append(solver.space.n_dofs)
        if log:
            log(R_tr, e, solver.space.n_dofs)
    return PmlStudy(k, np.asarray(R_tr_values, float), np.array(errs), dofs)


@dataclass
class FarFieldCheck:
    k: float
    exact_discrepancy: float            # volume formula on the series field vs series far field
    fem_discrepancy: list               # per level, L-infinity on S^1
    fem_h1k: list                       # per level, H1_k(B_R1) error
    h: list

    @property
    def weighted_ratios(self):
        """``|ff - ff_h|_inf / (k |C(2,k)| |u - u_h|_{H1_k})`` per level."""
        w = self.k * abs(C2(self.k))
        return [d / (w * e) for d, e in zip(self.fem_discrepancy, self.fem_h1k)]

    @property
    def tracking_factor(self):
        r = self.weighted_ratios
        return max(r) / min(r)


def farfield_consistency(k, n_i, p=2, levels=(0, 1), n_theta=256,
                         mesh=MeshSettings(n_theta=16, band_layers=4, thin_ratio=8.0),
                         profile=PmlProfile(sigma0=0.5), eta=0.1, lam=0.2):
    series = mie_solve(k, n_i)
    theta = directions(n_theta)
    ff = mie_farfield(series, theta)
    psi = psi_ramp(lam, eta)
    vol = farfield_from_callable(lambda x: mie_field(series, x, kind="scattered")[0], k, psi,
                                 theta)
    exact_disc = (vol - ff).linf()
    exact = _alt_exact(series, eta)
    out = FarFieldCheck(k, exact_disc, [], [], [])
    m = make_mesh(profile, MeshSettings(mesh.n_theta, levels[0], mesh.band_layers,
                                        mesh.thin_ratio, mesh.radial_grading),
                  lam=lam, eta=eta, q=p)
    for lev in range(levels[0], levels[-1] + 1):
        solver = TransmissionSolver(m, profile, k, n_i, p, lam=lam, eta=eta)
        sol = solver.solve()
        if lev in levels:
            out.fem_discrepancy.append((solver.farfield(sol, theta) - ff).linf())
            out.fem_h1k.append(norms(solver.space, k, sol, exact,
                                     m.cells_between(0.0, profile.R1)).h1k)
            out.h.append(m.mesh_size())
        if lev < levels[-1]:
            m = refine(m)
    return out
