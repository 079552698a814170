"""Radial C^2 ramps built from the quintic smoothstep."""

from dataclasses import dataclass

import numpy as np


def _quintic(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def _quintic_d1(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t**2 * (1.0 - t) ** 2, 0.0)


def _quintic_d2(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


@dataclass(frozen=True)
class RadialRamp:
    """``g(|x|)`` going from 0 at ``rho <= start`` to 1 at ``rho >= stop``.

    With ``descending=True`` the ramp goes from 1 to 0 instead.
    """

    start: float
    stop: float
    descending: bool = False

    def __post_init__(self):
        if not self.stop > self.start > 0:
            raise ValueError("ramp needs 0 < start < stop")

    @property
    def width(self):
        return self.stop - self.start

    def _t(self, rho):
        return (np.asarray(rho, dtype=float) - self.start) / self.width

    def radial(self, rho, order=0):
        t = self._t(rho)
        if order == 0:
            v = _quintic(t)
            return 1.0 - v if self.descending else v
        d = _quintic_d1(t) / self.width if order == 1 else _quintic_d2(t) / self.width**2
        return -d if self.descending else d

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.radial(np.hypot(x[..., 0], x[..., 1]))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        rs = np.where(rho > 0, rho, 1.0)
        return (self.radial(rho, 1) / rs)[..., None] * x

    def laplacian(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        rs = np.where(rho > 0, rho, 1.0)
        return self.radial(rho, 2) + self.radial(rho, 1) / rs


def plane_wave(k, direction, x):
    """``exp(i k d.x)`` and its gradient; complex ``x`` gives the holomorphic extension."""
    d = np.asarray(direction, dtype=float)
    x = np.asarray(x)
    u = np.exp(1j * k * (x @ d))
    return u, 1j * k * u[..., None] * d
