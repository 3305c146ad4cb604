"""Piecewise-polynomial radial density profiles and their closed-form moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RadialProfile:
    """Nonnegative piecewise-polynomial density rho0(r) on [0, r_max].

    breakpoints: increasing radii 0 = r_0 < r_1 < ... < r_K.
    pieces: per interval [r_k, r_{k+1}], polynomial coefficients in r
    (ascending powers).
    """

    breakpoints: np.ndarray
    pieces: list[np.ndarray]

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        self.pieces = [np.asarray(p, dtype=float) for p in self.pieces]
        if self.breakpoints[0] != 0.0 or np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if len(self.pieces) != self.breakpoints.size - 1:
            raise ValueError("need one polynomial per interval")
        # nonnegativity witnessed at sample resolution
        r = np.linspace(0.0, self.r_max, 257)
        if np.any(self.evaluate(r) < -1e-12):
            raise ValueError("profile must be nonnegative on its domain")

    @classmethod
    def constant(cls, density: float, r_max: float) -> "RadialProfile":
        return cls(np.array([0.0, r_max]), [np.array([density])])

    @classmethod
    def linear(cls, center_density: float, slope: float, r_max: float) -> "RadialProfile":
        return cls(np.array([0.0, r_max]), [np.array([center_density, slope])])

    @property
    def r_max(self) -> float:
        return float(self.breakpoints[-1])

    def evaluate(self, r):
        """rho0(r); zero outside [0, r_max]."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r, dtype=float)
        for k, poly in enumerate(self.pieces):
            lo, hi = self.breakpoints[k], self.breakpoints[k + 1]
            mask = (r >= lo) & (r <= hi) if k == len(self.pieces) - 1 else (r >= lo) & (r < hi)
            out[mask] = np.polynomial.polynomial.polyval(r[mask], poly)
        return out if out.ndim else float(out)

    def breakpoints_in(self, lo: float, hi: float) -> np.ndarray:
        """Interior breakpoints strictly inside (lo, hi)."""
        b = self.breakpoints
        return b[(b > lo) & (b < hi)]

    def mu(self, n: int, w: float) -> float:
        """Radial moment integral of rho0(r) * r^n from 0 to w, closed form."""
        if n < 0:
            raise ValueError("moment order must be >= 0")
        if w < 0 or w > self.r_max * (1 + 1e-12):
            raise ValueError(f"moment endpoint {w} outside profile domain [0, {self.r_max}]")
        w = min(w, self.r_max)
        total = 0.0
        for k, poly in enumerate(self.pieces):
            lo = self.breakpoints[k]
            hi = min(self.breakpoints[k + 1], w)
            if hi <= lo:
                break
            for j, c in enumerate(poly):
                p = j + n + 1
                total += c * (hi**p - lo**p) / p
        return total


    def mu_values(self, n: int, w) -> np.ndarray:
        """Vectorized moment integral over an array of endpoints."""
        w = np.asarray(w, dtype=float)
        if np.any(w < 0) or np.any(w > self.r_max * (1 + 1e-12)):
            raise ValueError("moment endpoints outside profile domain")
        out = np.zeros_like(w)
        for k, poly in enumerate(self.pieces):
            lo = self.breakpoints[k]
            hi = np.clip(w, lo, self.breakpoints[k + 1])
            for j, c in enumerate(poly):
                p = j + n + 1
                out += np.where(hi > lo, c * (hi**p - lo**p) / p, 0.0)
        return out

    def jump_at(self, r: float) -> float:
        """Discontinuity size at an interior breakpoint (0 for continuous)."""
        k = int(np.searchsorted(self.breakpoints, r))
        if not np.isclose(self.breakpoints[k], r) or k in (0, self.breakpoints.size - 1):
            return 0.0
        left = np.polynomial.polynomial.polyval(r, self.pieces[k - 1])
        right = np.polynomial.polynomial.polyval(r, self.pieces[k])
        return float(right - left)


def mu(profile: RadialProfile, n: int, w: float) -> float:
    """Moment integral of rho0(r) * r^n on [0, w] for a radial profile."""
    return profile.mu(n, w)
