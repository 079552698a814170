"""Radial shape perturbations of the unit disk and the induced domain map.

A scatterer is the star-shaped region ``{rho < 1 + r(theta)}``.  The map

    Phi(x) = s * (rho + chi(rho) * r(s)),   x = rho * s,

pushes the unit disk onto it while leaving the origin neighbourhood and the
exterior of ``B_{2-lambda}`` untouched, so the scattering problem can be
solved on a fixed mesh with transported coefficients ``A_hat`` and ``n_hat``.
Complex displacement coefficients are accepted everywhere except in the
inverse map.
"""

import json
from dataclasses import dataclass, field

import numpy as np

ADMISSIBLE_BOUND = 1.0 / 3.0
DEGENERATE_DET = 1e-12


class DegenerateMapError(ValueError):
    """Raised when ``|det DPhi|`` drops below ``DEGENERATE_DET``."""


def basis_frequency(j):
    """Angular frequency of basis function ``r_j`` (``j >= 1``)."""
    j = np.asarray(j)
    return np.where(j % 2 == 0, j // 2, (j - 1) // 2)


def basis(j, s, order=0):
    """``order``-th derivative of ``r_j(s)``.

    ``r_j = sin(j s / 2)`` for even ``j`` and ``cos((j - 1) s / 2)`` for odd
    ``j``; in particular ``r_1 = 1``.
    """
    if j < 1:
        raise ValueError("basis index starts at 1")
    w = float(basis_frequency(j))
    phase = 0.5 * np.pi * order
    s = np.asarray(s, dtype=float)
    if j % 2 == 0:
        return w**order * np.sin(w * s + phase)
    if order > 0 and w == 0.0:
        return np.zeros_like(s)
    return w**order * np.cos(w * s + phase)


def _as_coeffs(c):
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    if c.ndim != 1:
        raise ValueError("shape coefficients must be a 1-d sequence")
    if not np.all(np.isfinite(c)):
        raise ValueError("shape coefficients must be finite")
    return c


@dataclass(frozen=True)
class RadialShape:
    """Displacement ``r(s) = sum_j coeffs[j-1] * r_j(s)`` on the unit circle."""

    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __post_init__(self):
        c = _as_coeffs(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, value):
        return cls([value])

    @property
    def n_terms(self):
        return self.coeffs.size

    @property
    def is_real(self):
        return bool(np.all(self.coeffs.imag == 0.0))

    @property
    def is_zero(self):
        return bool(np.all(self.coeffs == 0.0))

    def _values(self, coeffs, s, order):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape, dtype=coeffs.dtype)
        for j, c in enumerate(coeffs, start=1):
            if c != 0:
                out = out + c * basis(j, s, order)
        return out

    def __call__(self, s, order=0):
        """Evaluate ``r`` (or its ``order``-th derivative) at angles ``s``."""
        c = self.coeffs.real if self.is_real else self.coeffs
        return self._values(c, s, order)

    def derivative(self, s, order=1):
        return self(s, order)

    def real_part(self):
        return RadialShape(self.coeffs.real)

    def sup_norm(self, order=0, part=None, n_samples=None):
        """Sampled ``max_s |r^(order)(s)|`` (``part`` may be ``"real"``)."""
        if n_samples is None:
            n_samples = 64 * (self.n_terms + 1) + 256
        s = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
        v = self(s, order)
        if part == "real":
            v = np.real(v)
        return float(np.max(np.abs(v), initial=0.0))

    @property
    def admissible_real(self):
        """True iff ``sup |Re r| <= 1/3`` (checked on a dense angular grid)."""
        return self.sup_norm(part="real") <= ADMISSIBLE_BOUND + 1e-14


@dataclass(frozen=True)
class CutoffChi:
    """Smooth bump ``chi(rho) = f(g((rho - 1) / (1 - lam)))`` with ``chi(1) = 1``.

    ``f(xi) = exp(1 - 1/(1 - xi^2))`` on ``|xi| < 1`` and ``g`` is a scaled
    arctangent that stretches the flanks; ``chi`` vanishes for
    ``rho <= lam`` and ``rho >= 2 - lam``.
    """

    lam: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.lam < 0.5:
            raise ValueError("lambda must lie in (0, 1/2)")

    def _xi(self, rho):
        zeta = (np.asarray(rho, dtype=float) - 1.0) / (1.0 - self.lam)
        return np.arctan(1.5 * zeta) / np.arctan(1.5), zeta

    def __call__(self, rho):
        xi, _ = self._xi(rho)
        inside = np.abs(xi) < 1.0
        q = np.where(inside, 1.0 - xi**2, 1.0)
        return np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)

    def derivative(self, rho):
        xi, zeta = self._xi(rho)
        inside = np.abs(xi) < 1.0
        q = np.where(inside, 1.0 - xi**2, 1.0)
        f = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
        dfdxi = f * (-2.0 * xi / q**2)
        dgdz = 1.5 / (1.0 + 2.25 * zeta**2) / np.arctan(1.5)
        return np.where(inside, dfdxi * dgdz / (1.0 - self.lam), 0.0)

    def support(self):
        return self.lam, 2.0 - self.lam


def polar_frame(x):
    """Return ``(rho, theta, e_r, e_theta)`` for points ``x`` of shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing dimension of 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    rho = np.hypot(x[..., 0], x[..., 1])
    theta = np.arctan2(x[..., 1], x[..., 0])
    c, s = np.cos(theta), np.sin(theta)
    e_r = np.stack([c, s], axis=-1)
    e_t = np.stack([-s, c], axis=-1)
    return rho, theta, e_r, e_t


def _frame_to_cartesian(m11, m12, m21, m22, e_r, e_t):
    """``H M H^T`` with ``H = [e_r, e_t]`` as columns."""
    H = np.stack([e_r, e_t], axis=-1)
    M = np.stack([np.stack([m11, m12], -1), np.stack([m21, m22], -1)], -2)
    return np.einsum("...ij,...jk,...lk->...il", H, M, H)


@dataclass(frozen=True)
class DomainMap:
    """The radial domain map attached to a shape and a cutoff."""

    shape: RadialShape
    chi: CutoffChi = field(default_factory=CutoffChi)

    def _r(self, theta, order=0):
        return self.shape(theta, order)

    def _polar_parts(self, x):
        rho, theta, e_r, e_t = polar_frame(x)
        active = rho > self.chi.lam
        rs = np.where(active, rho, 1.0)
        chi = np.where(active, self.chi(rho), 0.0)
        dchi = np.where(active, self.chi.derivative(rho), 0.0)
        r = self._r(theta)
        dr = self._r(theta, 1)
        return rho, theta, e_r, e_t, chi, dchi, chi / rs, r, dr

    def map_point(self, x):
        """``Phi(x)``; equal to ``x`` wherever ``chi`` vanishes."""
        x = np.asarray(x, dtype=float)
        rho, theta, e_r, _, chi, _, _, r, _ = self._polar_parts(x)
        return e_r * (rho + chi * r)[..., None]

    def jacobian(self, x, check=True):
        """Cartesian ``DPhi``, its determinant and inverse at points ``x``.

        In the polar frame ``(e_r, e_theta)`` the Jacobian is upper triangular,
        ``[[1 + chi' r, chi r'/rho], [0, 1 + chi r/rho]]``.
        """
        rho, theta, e_r, e_t, chi, dchi, chi_rho, r, dr = self._polar_parts(x)
        a = 1.0 + dchi * r
        b = chi_rho * dr
        d = 1.0 + chi_rho * r
        det = a * d
        if check and np.any(np.abs(det) < DEGENERATE_DET):
            raise DegenerateMapError("domain map Jacobian is (nearly) singular")
        zero = np.zeros_like(a)
        D = _frame_to_cartesian(a, b, zero, d, e_r, e_t)
        Dinv = _frame_to_cartesian(d / det, -b / det, zero, a / det, e_r, e_t)
        return D, det, Dinv

    def coefficients(self, x, n_interior, inside=None):
        """Transported ``A_hat = det * DPhi^{-1} DPhi^{-T}`` and ``n_hat = det * n0``.

        ``inside`` flags points of the reference scatterer (``|x| < 1``);
        pass it explicitly when evaluating on the interface circle.
        """
        x = np.asarray(x, dtype=float)
        _, det, Dinv = self.jacobian(x)
        A = det[..., None, None] * np.einsum("...ij,...kj->...ik", Dinv, Dinv)
        if inside is None:
            inside = np.hypot(x[..., 0], x[..., 1]) < 1.0
        n0 = np.where(inside, n_interior, 1.0)
        return A, det * n0

    def inverse(self, y, tol=1e-14, maxiter=60):
        """Solve ``Phi(x) = y`` by Newton iteration on the radial equation."""
        if not self.shape.is_real:
            raise ValueError("the inverse map is only available for real shapes")
        rho_y, theta, e_r, _ = polar_frame(y)
        r = self._r(theta)
        lam = self.chi.lam
        rho = np.array(rho_y, dtype=float)
        for _ in range(maxiter):
            g = rho + self.chi(rho) * r - rho_y
            dg = 1.0 + self.chi.derivative(rho) * r
            step = g / dg
            rho = np.clip(rho - step, 0.0, None)
            if np.all(np.abs(step) <= tol * np.maximum(1.0, rho)):
                break
        rho = np.where(rho_y <= lam, rho_y, rho)
        return e_r * rho[..., None]


def det_bounds(dim=2):
    """Determinant bracket ``[3^-d, (5/3)^d]`` valid for admissible real shapes."""
    return 3.0 ** (-dim), (5.0 / 3.0) ** dim


@dataclass(frozen=True)
class NormReport:
    l2_ratio: float
    l2_bracket: tuple
    h1_ratio: float | None
    h1_bracket: tuple

    @property
    def ok(self):
        lo, hi = self.l2_bracket
        good = lo <= self.l2_ratio <= hi
        if self.h1_ratio is not None:
            lo, hi = self.h1_bracket
            good = good and lo <= self.h1_ratio <= hi
        return bool(good)


def _disk_rule(lam, n_rho=48, n_theta=256):
    """Tensor rule on ``B_2`` split at the radii where the map changes character."""
    breaks = [0.0, lam, 1.0, 2.0 - lam, 2.0]
    t, w = np.polynomial.legendre.leggauss(n_rho)
    rho, wr = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        rho.append(0.5 * (b - a) * t + 0.5 * (a + b))
        wr.append(0.5 * (b - a) * w)
    rho = np.concatenate(rho)
    wr = np.concatenate(wr) * rho
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(rho, theta, indexing="ij")
    pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
    wts = (wr[:, None] * np.full(n_theta, 2 * np.pi / n_theta)).ravel()
    return pts, wts


def pullback_norm_check(shape, field_fn, grad_fn=None, chi=None, dim=2):
    """Compare ``||v o Phi||`` with ``||v||`` on ``B_2`` in L2 and (optionally) H1."""
    if not shape.is_real:
        raise ValueError("norm transformation check needs a real shape")
    chi = CutoffChi() if chi is None else chi
    dmap = DomainMap(shape, chi)
    pts, wts = _disk_rule(chi.lam)
    mapped = dmap.map_point(pts)

    v = field_fn(pts)
    pv = field_fn(mapped)
    l2 = np.sqrt(np.sum(wts * np.abs(v) ** 2))
    l2_pull = np.sqrt(np.sum(wts * np.abs(pv) ** 2))
    l2_bracket = ((3.0 / 5.0) ** (dim / 2), 3.0 ** (dim / 2))

    dr2 = shape.sup_norm(order=1) ** 2
    m = 5.0 / 3.0 * dim + 2.0 * dr2
    h1_bracket = ((3.0 / 5.0) ** (dim / 2) / (3.0**dim * m), 3.0 ** (dim / 2) * m)
    h1_ratio = None
    if grad_fn is not None:
        D, _, _ = dmap.jacobian(pts)
        g = grad_fn(pts)
        gp = np.einsum("...ji,...j->...i", D, grad_fn(mapped))
        h1 = np.sqrt(l2**2 + np.sum(wts * np.sum(np.abs(g) ** 2, -1)))
        h1_pull = np.sqrt(l2_pull**2 + np.sum(wts * np.sum(np.abs(gp) ** 2, -1)))
        h1_ratio = float(h1_pull / h1)
    return NormReport(float(l2_pull / l2), l2_bracket, h1_ratio, h1_bracket)


def save_shape(path, coeffs, lam=0.2, k_scaling=False):
    c = _as_coeffs(coeffs)
    data = {"k_scaling": bool(k_scaling),
            "coeffs": [[float(z.real), float(z.imag)] for z in c],
            "lambda": float(lam)}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


def load_shape(path, k=None):
    """Read a shape file; returns ``(RadialShape, CutoffChi)``.

    With ``k_scaling`` set the stored values are divided by ``k``.
    """
    with open(path) as fh:
        data = json.load(fh)
    unknown = set(data) - {"k_scaling", "coeffs", "lambda"}
    if unknown:
        raise ValueError(f"unknown shape-file keys: {sorted(unknown)}")
    c = np.array([complex(re, im) for re, im in data.get("coeffs", [])], dtype=complex)
    if data.get("k_scaling", False):
        if k is None or k <= 0:
            raise ValueError("k-scaled shape file needs a positive wavenumber")
        c = c / k
    return RadialShape(c), CutoffChi(float(data.get("lambda", 0.2)))
