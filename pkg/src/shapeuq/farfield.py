"""Far-field patterns, the disk (Mie) series oracle and k-explicit checks.

Conventions: the total field ``u`` solves ``(-k^-2 Lap - n) u = 0`` with
``n = n_i`` in the unit disk and 1 outside, ``u - u_inc`` is outgoing, and
the far-field pattern of an outgoing ``v`` is
``lim rho^{1/2} exp(-i k rho) v(rho q)``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import special
from .fem import phi_ramp
from .ramp import RadialRamp, plane_wave


def C2(k):
    """Prefactor ``exp(i pi/4) / (2 sqrt(2 pi k))`` of the 2-d volume far-field formula."""
    return np.exp(1j * np.pi / 4) / (2.0 * np.sqrt(2.0 * np.pi * k))


def directions(n=256):
    """Equispaced observation angles on the unit circle."""
    return 2 * np.pi * np.arange(n) / n


@dataclass
class FarFieldPattern:
    theta: np.ndarray
    values: np.ndarray
    k: float
    info: dict = field(default_factory=dict)

    def l2(self):
        """Trapezoidal ``L2(S^1)`` norm."""
        return float(np.sqrt(2 * np.pi * np.mean(np.abs(self.values) ** 2)))

    def linf(self):
        return float(np.max(np.abs(self.values)))

    def __sub__(self, other):
        if not np.allclose(self.theta, other.theta):
            raise ValueError("patterns sampled at different directions")
        return FarFieldPattern(self.theta, self.values - other.values, self.k)

    def to_csv(self, path):
        v = self.values
        table = np.column_stack([self.theta, v.real, v.imag, np.abs(v)])
        np.savetxt(path, table, delimiter=",", header="theta,re,im,abs", comments="",
                   fmt="%.16e")


# ---------------------------------------------------------------------------
# disk series solution

@dataclass
class MieSolution:
    k: float
    n_i: float
    M: int
    a: np.ndarray   # interior coefficients for m = -M..M
    b: np.ndarray   # scattered coefficients for m = -M..M

    @property
    def orders(self):
        return np.arange(-self.M, self.M + 1)

    def coeff(self, which, m):
        arr = self.a if which == "a" else self.b
        return arr[np.asarray(m) + self.M]


def _mie_coefficients(k, n_i, M):
    m = np.arange(M + 1)
    kin = k * np.sqrt(n_i)
    Jk, Yk = special.bessel_jy(M + 1, k)
    Jin = special.bessel_j(M + 1, kin)
    Hk = Jk + 1j * Yk
    dJk = special.derivative(Jk)
    dHk = special.derivative(Hk)
    dJin = special.derivative(Jin)
    Jk, Hk, Jin = Jk[:-1], Hk[:-1], Jin[:-1]
    im = 1j**m
    # a Jin - b Hk = im Jk ;  a sqrt(n) dJin - b dHk = im dJk
    det = -Jin * dHk + np.sqrt(n_i) * dJin * Hk
    a = (-im * Jk * dHk + im * dJk * Hk) / det
    b = (Jin * im * dJk - np.sqrt(n_i) * dJin * im * Jk) / det
    return a, b


def mie_solve(k, n_i, M=None, tail_tol=1e-12, M_cap=2000):
    """Series coefficients for plane-wave incidence ``exp(i k x_1)`` on the unit disk.

    ``M`` grows until ``|b_M| / max |b_m| < tail_tol``.
    """
    if k <= 0 or n_i <= 0:
        raise ValueError("k and n_i must be positive")
    if M is None:
        M = int(np.ceil(k * max(1.0, np.sqrt(n_i)))) + 20
    while True:
        a, b = _mie_coefficients(k, n_i, M)
        scale = max(np.max(np.abs(b)), np.max(np.abs(a)) * 1e-30, 1e-300)
        if np.abs(b[-1]) / scale < tail_tol or np.all(b == 0):
            break
        if M >= M_cap:
            raise RuntimeError("series tail does not decay; raise M_cap")
        M = min(2 * M, M_cap)
    sign = (-1.0) ** np.arange(M, 0, -1)
    a_full = np.concatenate([sign * a[:0:-1], a])
    b_full = np.concatenate([sign * b[:0:-1], b])
    return MieSolution(k, n_i, M, a_full, b_full)


def matching_residuals(sol):
    """Residuals of the two interface conditions for every ``m >= 0``."""
    k, n_i, M = sol.k, sol.n_i, sol.M
    m = np.arange(M + 1)
    Jk, Yk = special.bessel_jy(M + 1, k)
    Hk = Jk + 1j * Yk
    Jin = special.bessel_j(M + 1, k * np.sqrt(n_i))
    dJk, dHk, dJin = special.derivative(Jk), special.derivative(Hk), special.derivative(Jin)
    a, b = sol.a[M:], sol.b[M:]
    im = 1j**m
    r1 = a * Jin[:-1] - im * Jk[:-1] - b * Hk[:-1]
    r2 = a * np.sqrt(n_i) * dJin - im * dJk - b * dHk
    return r1, r2


def _radial_modes(sol, rho, part):
    """Mode table ``(2M+1, P)`` of radial functions and their rho-derivatives."""
    k, M = sol.k, sol.M
    rho = np.asarray(rho, dtype=float)
    m = sol.orders
    if part == "inside":
        kk = k * np.sqrt(sol.n_i)
        J = special.bessel_j(M + 1, kk * rho)
        C = special.signed_orders(J[:-1], m)
        dC = kk * special.signed_orders(special.derivative(J), m)
        return sol.a[:, None] * C, sol.a[:, None] * dC
    J, Y = special.bessel_jy(M + 1, k * rho)
    H = J + 1j * Y
    C = special.signed_orders(H[:-1], m)
    dC = k * special.signed_orders(special.derivative(H), m)
    return sol.b[:, None] * C, sol.b[:, None] * dC


def _incident_modes(sol, rho):
    k, M = sol.k, sol.M
    m = sol.orders
    J = special.bessel_j(M + 1, k * np.asarray(rho, dtype=float))
    im = (1j ** m)[:, None]
    return im * special.signed_orders(J[:-1], m), im * k * special.signed_orders(special.derivative(J), m)


def _synthesize(modes, dmodes, m, rho, theta):
    E = np.exp(1j * np.outer(m, theta))
    u = np.sum(modes * E, 0)
    ur = np.sum(dmodes * E, 0)
    ut = np.sum(1j * m[:, None] * modes * E, 0)
    return u, ur, ut


def mie_field(sol, x, kind="total", eta=None, chunk=20000):
    """Field and gradient at points ``(..., 2)``.

    ``kind`` is ``"total"`` (u), ``"scattered"`` (u - u_inc) or ``"alt"``
    (``u - (1 - phi) u_inc`` with the ``eta`` ramp of the plane-wave load).
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 2)
    u_out = np.empty(pts.shape[0], dtype=complex)
    g_out = np.empty((pts.shape[0], 2), dtype=complex)
    m = sol.orders
    ramp = phi_ramp(eta) if kind == "alt" else None
    if kind == "alt" and eta is None:
        raise ValueError("kind='alt' needs eta")
    for s in range(0, pts.shape[0], chunk):
        p = pts[s:s + chunk]
        rho = np.hypot(p[:, 0], p[:, 1])
        theta = np.arctan2(p[:, 1], p[:, 0])
        inside = rho < 1.0
        u = np.empty(p.shape[0], dtype=complex)
        ur = np.empty_like(u)
        ut = np.empty_like(u)
        for mask, part in ((inside, "inside"), (~inside, "outside")):
            if not np.any(mask):
                continue
            C, dC = _radial_modes(sol, rho[mask], part)
            u[mask], ur[mask], ut[mask] = _synthesize(C, dC, m, rho[mask], theta[mask])
        rs = np.where(rho > 0, rho, 1.0)
        c, sn = p[:, 0] / rs, p[:, 1] / rs
        g = np.stack([ur * c - ut * sn / rs, ur * sn + ut * c / rs], axis=1)
        ui, gi = plane_wave(sol.k, (1.0, 0.0), p)
        out = ~inside
        # outside the disk the series carries the scattered part only
        u[out] += ui[out]
        g[out] += gi[out]
        if kind == "scattered":
            u, g = u - ui, g - gi
        elif kind == "alt":
            w = 1.0 - ramp(p)
            gw = -ramp.gradient(p)
            u = u - w * ui
            g = g - w[:, None] * gi - gw * ui[:, None]
        u_out[s:s + chunk] = u
        g_out[s:s + chunk] = g
    return u_out.reshape(shape), g_out.reshape(shape + (2,))


def _gauss_pieces(breaks, k_eff):
    rho, wr = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = int(np.ceil(1.5 * k_eff * (b - a))) + 40
        t, w = np.polynomial.legendre.leggauss(n)
        rho.append(0.5 * (b - a) * t + 0.5 * (a + b))
        wr.append(0.5 * (b - a) * w)
    return np.concatenate(rho), np.concatenate(wr)


def _mode_table(sol, rho, kind, eta):
    """Radial mode functions ``(2M+1, P)`` and derivatives for the requested field."""
    inside = rho < 1.0
    P = rho.size
    n_modes = 2 * sol.M + 1
    U = np.zeros((n_modes, P), dtype=complex)
    dU = np.zeros_like(U)
    for mask, part in ((inside, "inside"), (~inside, "outside")):
        if np.any(mask):
            U[:, mask], dU[:, mask] = _radial_modes(sol, rho[mask], part)
    I, dI = _incident_modes(sol, rho)
    out = ~inside
    if kind in ("total", "alt"):
        U[:, out] += I[:, out]
        dU[:, out] += dI[:, out]
    elif kind == "scattered":
        U[:, inside] -= I[:, inside]
        dU[:, inside] -= dI[:, inside]
    if kind == "alt":
        ramp = phi_ramp(eta)
        w = 1.0 - ramp.radial(rho)
        dw = -ramp.radial(rho, 1)
        U -= w * I
        dU -= w * dI + dw * I
    return U, dU


@dataclass(frozen=True)
class MieNorms:
    k: float
    l2: float
    h1_semi: float

    @property
    def h1(self):
        return float(np.hypot(self.l2, self.h1_semi))

    @property
    def h1k(self):
        return float(np.hypot(self.l2, self.h1_semi / self.k))


def mie_norms(sol, R=2.0, kind="total", eta=0.1):
    """Norms on ``B_R`` by per-mode radial Gauss quadrature times ``2 pi``."""
    breaks = [0.0, 1.0]
    if kind == "alt":
        breaks += [b for b in (2.0 - eta, 2.0 - 0.5 * eta) if b < R]
    breaks.append(R)
    breaks = sorted(set(breaks))
    keff = sol.k * max(1.0, np.sqrt(sol.n_i))
    rho, w = _gauss_pieces(breaks, keff)
    U, dU = _mode_table(sol, rho, kind, eta)
    m2 = (sol.orders.astype(float) ** 2)[:, None]
    l2 = 2 * np.pi * np.sum(w * rho * np.sum(np.abs(U) ** 2, 0))
    g2 = 2 * np.pi * np.sum(w * rho * np.sum(np.abs(dU) ** 2 + m2 / rho**2 * np.abs(U) ** 2, 0))
    return MieNorms(sol.k, float(np.sqrt(l2)), float(np.sqrt(g2)))


def falt_l2_norm(k, eta=0.1, M=None):
    """``||f_alt||_{L2(B_2)}`` for incidence ``exp(i k x_1)``, mode by mode."""
    ramp = phi_ramp(eta)
    rho, w = _gauss_pieces([ramp.start, ramp.stop], k)
    if M is None:
        M = int(np.ceil(2 * k)) + 30
    m = np.arange(-M, M + 1)
    J = special.bessel_j(M + 1, k * rho)
    Jm = special.signed_orders(J[:-1], m)
    dJm = k * special.signed_orders(special.derivative(J), m)
    im = (1j ** m)[:, None]
    lap = ramp.radial(rho, 2) + ramp.radial(rho, 1) / rho
    f = -(2 * ramp.radial(rho, 1) * im * dJm + im * Jm * lap) / k**2
    return float(np.sqrt(2 * np.pi * np.sum(w * rho * np.sum(np.abs(f) ** 2, 0))))


def mie_farfield(sol, theta=None):
    """``sqrt(2/(pi k)) sum_m b_m exp(-i(m pi/2 + pi/4)) exp(i m theta)``."""
    theta = directions() if theta is None else np.asarray(theta, dtype=float)
    m = sol.orders
    coef = sol.b * np.exp(-1j * (m * np.pi / 2 + np.pi / 4))
    vals = np.sqrt(2.0 / (np.pi * sol.k)) * (np.exp(1j * np.outer(theta, m)) @ coef)
    return FarFieldPattern(theta, vals, sol.k, {"source": "series"})


# ---------------------------------------------------------------------------
# volume far-field formula

def psi_ramp(lam=0.2, eta=0.1, delta=0.0):
    """Rising ramp, 0 inside ``B_{2-lam+delta}`` and 1 outside ``B_{2-eta-delta}``."""
    return RadialRamp(2.0 - lam + delta, 2.0 - eta - delta)


def volume_farfield(points, weights, v, k, psi, theta=None):
    """Far-field of an outgoing field ``v`` sampled at quadrature points.

    ``points`` and ``v`` must cover the support of ``grad psi``.
    """
    theta = directions() if theta is None else np.asarray(theta, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float).ravel()
    v = np.asarray(v).ravel()
    keep = np.abs(psi.radial(np.hypot(pts[:, 0], pts[:, 1]), 1)) > 0
    pts, w, v = pts[keep], w[keep], v[keep]
    lap = psi.laplacian(pts)
    grad = psi.gradient(pts)
    q = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    vals = np.empty(theta.size, dtype=complex)
    for s in range(0, theta.size, 64):
        qq = q[s:s + 64]
        kernel = (lap[None] - 2j * k * (qq @ grad.T)) * np.exp(-1j * k * (qq @ pts.T))
        vals[s:s + 64] = kernel @ (w * v)
    return FarFieldPattern(theta, C2(k) * vals, k, {"source": "volume"})


def annulus_rule(r_lo, r_hi, k, n_rho=None, n_theta=None):
    """Polar tensor Gauss/trapezoid rule on an annulus (for exact fields)."""
    if n_rho is None:
        n_rho = 24
    if n_theta is None:
        n_theta = int(2 * k * r_hi) + 64
    t, w = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * (r_hi - r_lo) * t + 0.5 * (r_hi + r_lo)
    wr = 0.5 * (r_hi - r_lo) * w * rho
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(rho, th, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    wts = (wr[:, None] * np.full(n_theta, 2 * np.pi / n_theta)).ravel()
    return pts, wts


def farfield_from_callable(v_fn, k, psi, theta=None, n_rho=24):
    """Volume formula applied to an exact outgoing field ``v_fn(x)``."""
    pts, wts = annulus_rule(psi.start, psi.stop, k, n_rho=n_rho)
    return volume_farfield(pts, wts, v_fn(pts), k, psi, theta)


def farfield_from_solution(solution, psi, theta=None, kind="alt", min_cells=1):
    """Volume formula applied to a finite-element solution on the reference domain.

    ``kind="alt"`` means the dofs represent ``u_alt`` (so ``u_inc`` is removed
    before integration); ``kind="scattered"`` means they already hold
    ``u - u_inc``.
    """
    space = solution.space
    mesh = space.mesh
    cells = mesh.cells_between(psi.start, psi.stop)
    if not np.any(cells):
        raise ValueError("no mesh cells inside the far-field ramp support")
    layers = _cells_across(mesh, psi.start, psi.stop)
    if layers < min_cells:
        raise ValueError(f"far-field ramp resolved by {layers} cell layers (< {min_cells})")
    g = space.geometry
    u, _ = solution.values_at_quadrature(np.flatnonzero(cells))
    x = g.x[cells]
    if kind == "alt":
        ui, _ = plane_wave(solution.k, solution.info.get("direction", (1.0, 0.0)), x)
        u = u - ui
    return volume_farfield(x, g.wdet[cells], u, solution.k, psi, theta)


def _cells_across(mesh, r_lo, r_hi):
    """Number of distinct radial cell layers between two fitted radii (vertex circles)."""
    sel = mesh.cells_between(r_lo, r_hi)
    rho = np.hypot(*mesh.vertices[mesh.cells[sel]].reshape(-1, 2).T)
    circles = np.unique(np.round(rho, 9))
    return max(len(circles) - 1, 0)


# ---------------------------------------------------------------------------
# k-scan and stability constants

def k_scan(k_grid, n_i, R=2.0):
    """Rows ``(k, ||u||_L2, ||u||_H1, ||u||_H1k)`` on ``B_R`` from the series solution."""
    rows = []
    for k in np.asarray(k_grid, dtype=float):
        nm = mie_norms(mie_solve(k, n_i), R=R, kind="total")
        rows.append((k, nm.l2, nm.h1, nm.h1k))
    return np.array(rows)


def spike_statistics(values, window=50):
    """``max/median`` ratio and the worst local-maximum prominence.

    Prominence of a local maximum is its value over the median of the
    ``window`` samples on either side.
    """
    v = np.asarray(values, dtype=float)
    ratio = float(np.max(v) / np.median(v))
    worst = 1.0
    for i in range(1, v.size - 1):
        if v[i] >= v[i - 1] and v[i] >= v[i + 1]:
            lo, hi = max(0, i - window), min(v.size, i + window + 1)
            nb = np.concatenate([v[lo:i], v[i + 1:hi]])
            worst = max(worst, float(v[i] / np.median(nb)))
    return ratio, worst


def c_sol1(k, n_i, d=2):
    """Explicit stability constant for L2 data (valid for ``0 < n_i < 1``)."""
    return 4 * k / np.sqrt(n_i) * np.sqrt(1 + (1 / n_i) * (1 + (d - 1) / (4 * k)) ** 2)


def c_sol2(k, n_i, d=2):
    return (1 + 2 * c_sol1(k, n_i, d)) / n_i


@dataclass
class StabilityReport:
    k: np.ndarray
    u_h1k: np.ndarray
    f_l2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    @property
    def ratio(self):
        return self.u_h1k / self.f_l2

    @property
    def violations(self):
        return np.flatnonzero(self.ratio > self.c1)

    @property
    def ok(self):
        return self.violations.size == 0


def stability_constant_check(k_grid, n_i, eta=0.1):
    """Compare ``||u_alt||_{H1_k(B_2)} / ||f_alt||_{L2}`` with the explicit constant."""
    if not 0 < n_i < 1:
        raise ValueError("the explicit bound needs 0 < n_i < 1")
    ks = np.asarray(k_grid, dtype=float)
    u = np.array([mie_norms(mie_solve(k, n_i), R=2.0, kind="alt", eta=eta).h1k for k in ks])
    f = np.array([falt_l2_norm(k, eta) for k in ks])
    return StabilityReport(ks, u, f, c_sol1(ks, n_i), c_sol2(ks, n_i))
