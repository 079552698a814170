"""Radial perfectly matched layer.

The complex stretching ``rho -> rho (1 + i sigma_tilde(rho))`` gives the
scalings ``alpha = 1 + i sigma`` and ``beta = 1 + i sigma_tilde`` with
``sigma = (rho sigma_tilde)'``.  Outside ``R1`` the PDE coefficients become
``A = H diag(beta/alpha, alpha/beta) H^T`` and ``n = alpha beta``.
"""

from dataclasses import dataclass
from math import comb, factorial

import numpy as np


def smoothstep(t, m):
    """Polynomial of degree ``2m+1`` rising from 0 to 1 on ``[0, 1]`` with ``m`` flat derivatives."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    acc = np.zeros_like(t)
    for j in range(m + 1):
        acc = acc + comb(m + j, j) * (1.0 - t) ** j
    return t ** (m + 1) * acc


def smoothstep_derivative(t, m):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    c = factorial(2 * m + 1) / factorial(m) ** 2
    return np.where(inside, c * tc**m * (1.0 - tc) ** m, 0.0)


@dataclass(frozen=True)
class PmlProfile:
    R1: float = 2.25
    R2: float = 3.0
    R_tr: float = 3.0
    sigma0: float = 2.0
    ramp_degree: int = 3

    def __post_init__(self):
        if not 2.0 < self.R1 < self.R2:
            raise ValueError("PML radii must satisfy 2 < R1 < R2")
        if self.R_tr <= self.R1:
            raise ValueError("truncation radius must exceed R1")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be non-negative")
        if self.ramp_degree < 1:
            raise ValueError("ramp_degree must be at least 1")

    def _t(self, rho):
        return (np.asarray(rho, dtype=float) - self.R1) / (self.R2 - self.R1)

    def sigma_tilde(self, rho):
        return self.sigma0 * smoothstep(self._t(rho), self.ramp_degree)

    def sigma_tilde_derivative(self, rho):
        return (self.sigma0 / (self.R2 - self.R1)) * smoothstep_derivative(self._t(rho), self.ramp_degree)

    def evaluate(self, rho):
        """Return ``(sigma_tilde, sigma, alpha, beta)`` at radii ``rho``."""
        rho = np.asarray(rho, dtype=float)
        st = self.sigma_tilde(rho)
        sg = st + rho * self.sigma_tilde_derivative(rho)
        return st, sg, 1.0 + 1j * sg, 1.0 + 1j * st


def pml_tensor(profile, x):
    """``(A_pml, n_pml)`` of the pure layer (identity for ``|x| <= R1``)."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    _, _, alpha, beta = profile.evaluate(rho)
    rs = np.where(rho > 0, rho, 1.0)
    c = np.where(rho > 0, x[..., 0] / rs, 1.0)
    s = np.where(rho > 0, x[..., 1] / rs, 0.0)
    d1 = beta / alpha
    d2 = alpha / beta
    A = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    A[..., 0, 0] = d1 * c * c + d2 * s * s
    A[..., 1, 1] = d1 * s * s + d2 * c * c
    A[..., 0, 1] = A[..., 1, 0] = (d1 - d2) * c * s
    return A, alpha * beta


def pml_coefficients(profile, domain_map, n_interior, x, inside=None):
    """Coefficients of the truncated problem: transported inside ``R1``, layer outside."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    if rho.max(initial=0.0) > profile.R_tr * (1 + 1e-12):
        raise ValueError("points outside the truncated domain")
    A_in, n_in = domain_map.coefficients(x, n_interior, inside)
    A_out, n_out = pml_tensor(profile, x)
    outer = rho > profile.R1
    A = np.where(outer[..., None, None], A_out, A_in)
    n = np.where(outer, n_out, n_in)
    return A, n
