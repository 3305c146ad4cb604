"""Compactly supported generator functions chi and their closed-form Laplacians.

chi(r, Omega) = A * (r/R)^l * (1 - (r/R)^2)^k * Y_lm(Omega) for r <= R, zero
outside.  The (r/R)^l prefactor keeps chi twice differentiable at the origin;
k >= 3 makes chi and its first two radial derivatives vanish at r = R, so the
Laplacian is C^1 across the support boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .harmonics import real_harmonic

MIN_SMOOTHNESS = 3


@dataclass(frozen=True)
class ChiSpec:
    """Separable radial-polynomial x single-harmonic generator."""

    amplitude: float
    support_radius: float
    smoothness: int
    l: int
    m: int

    def __post_init__(self):
        if self.support_radius <= 0:
            raise ValueError("support_radius must be positive")
        if self.smoothness < MIN_SMOOTHNESS:
            raise ValueError(f"smoothness k must be >= {MIN_SMOOTHNESS}")
        if self.l < 0 or abs(self.m) > self.l:
            raise ValueError(f"invalid harmonic index (l={self.l}, m={self.m})")

    def radial_poly(self) -> np.ndarray:
        """Coefficients (ascending powers of u = r/R) of A * u^l * (1-u^2)^k."""
        k = self.smoothness
        # (1-u^2)^k expanded in u
        binom = np.zeros(2 * k + 1)
        for j in range(k + 1):
            binom[2 * j] = (-1) ** j * comb(k, j)
        return np.concatenate([np.zeros(self.l), binom]) * self.amplitude

    def laplacian_radial_poly(self) -> np.ndarray:
        """Coefficients in u = r/R of R^2 * (f'' + 2 f'/r - l(l+1) f / r^2).

        Each monomial u^p maps to [p(p+1) - l(l+1)] u^(p-2); the p = l term
        cancels, so the result is again a polynomial.
        """
        f = self.radial_poly()
        lap = np.zeros(max(f.size - 2, 1))
        ll = self.l * (self.l + 1)
        for p in range(f.size):
            c = f[p] * (p * (p + 1) - ll)
            if c != 0.0:
                lap[p - 2] += c
        return lap


def _poly_eval(coeffs: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(u, coeffs)


def _split_point(point) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.atleast_2d(np.asarray(point, dtype=float))
    r = np.linalg.norm(p, axis=1)
    theta = np.arccos(np.clip(np.divide(p[:, 2], r, out=np.zeros_like(r), where=r > 0), -1, 1))
    phi = np.arctan2(p[:, 1], p[:, 0]) % (2 * np.pi)
    return r, theta, phi


def chi_value(spec: ChiSpec, point):
    """Evaluate chi at a cartesian point (or array of points); 0 for r >= R."""
    r, theta, phi = _split_point(point)
    u = r / spec.support_radius
    vals = _poly_eval(spec.radial_poly(), u) * real_harmonic(spec.l, spec.m, theta, phi)
    vals = np.where(u >= 1.0, 0.0, vals)
    return vals if np.asarray(point).ndim > 1 else float(vals[0])


def laplacian_chi(spec: ChiSpec, point):
    """Closed-form Laplacian of chi at a cartesian point; 0 for r >= R."""
    r, theta, phi = _split_point(point)
    u = r / spec.support_radius
    radial = _poly_eval(spec.laplacian_radial_poly(), u) / spec.support_radius**2
    vals = radial * real_harmonic(spec.l, spec.m, theta, phi)
    vals = np.where(u >= 1.0, 0.0, vals)
    return vals if np.asarray(point).ndim > 1 else float(vals[0])


def laplacian_chi_polar(spec: ChiSpec, r, theta, phi):
    """Laplacian of chi on polar node arrays (r broadcast against angles)."""
    u = np.asarray(r, dtype=float) / spec.support_radius
    radial = _poly_eval(spec.laplacian_radial_poly(), u) / spec.support_radius**2
    vals = radial * real_harmonic(spec.l, spec.m, theta, phi)
    return np.where(u >= 1.0, 0.0, vals)
