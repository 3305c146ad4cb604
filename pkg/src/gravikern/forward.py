"""Exterior gravity forward maps: potential, multipoles, gradient tensor.

Sign conventions: the potential is attractive, Phi < 0 for positive total
mass, and the gradient tensor is T_ij = -d^2 Phi / dx_i dx_j.  Multipole
coefficients satisfy Phi(x) = sum_lm d_lm Y_lm(Omega) / r^(l+1) with
d_lm = -G * (4 pi / (2l+1)) * integral(rho r^l Y_lm); the 4 pi/(2l+1)
addition-theorem factor is required for the monopole to reproduce -G M / r.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .density import DensityModel, PointMassSet
from .harmonics import (
    BallQuadrature,
    CoefficientVector,
    degrees_and_orders,
    harmonic_basis,
    make_ball_quadrature,
)

NEAR_BOUNDARY_FACTOR = 1.05


class DomainError(ValueError):
    """Operation evaluated outside its mathematical domain."""


def _as_points(x) -> tuple[np.ndarray, bool]:
    p = np.asarray(x, dtype=float)
    if p.ndim == 1:
        return p[None, :], True
    return p, False


def _checked_cloud(model: DensityModel, points: np.ndarray, quad: BallQuadrature):
    """Decompose the model, enforcing exterior evaluation and the near-boundary rule."""
    R = model.support_radius
    r = np.linalg.norm(points, axis=1)
    if isinstance(model, PointMassSet):
        # exact summation; only coincidence with a mass point is singular
        src, w = model.decompose()
        if cdist(points, src).min(initial=np.inf) < 1e-13:
            raise DomainError("evaluation point coincides with a point mass")
        return src, w
    if np.any(r <= R):
        bad = points[np.argmin(r)]
        raise DomainError(
            f"evaluation point {bad} lies inside or on the support sphere (R={R})"
        )
    if np.any(r < NEAR_BOUNDARY_FACTOR * R):
        warnings.warn(
            f"evaluation closer than {NEAR_BOUNDARY_FACTOR}*R to the support; "
            "doubling quadrature order (accuracy contract not guaranteed)",
            stacklevel=3,
        )
        quad = make_ball_quadrature(
            2 * quad.sphere.exactness_degree,
            quad.support_radius,
            n_radial=2 * quad.n_radial,
        )
    return model.decompose(quad)


def potential(model: DensityModel, x, quad: BallQuadrature, G: float = 1.0):
    """Exterior Newtonian potential Phi(x); x may be one point or an (n,3) array."""
    if G <= 0:
        raise ValueError("gravity constant must be positive")
    points, single = _as_points(x)
    src, w = _checked_cloud(model, points, quad)
    phi = -G * (1.0 / cdist(points, src)) @ w
    return float(phi[0]) if single else phi


def multipoles(
    model: DensityModel, band_limit: int, quad: BallQuadrature, G: float = 1.0
) -> CoefficientVector:
    """Exterior multipole coefficients d_lm up to the band limit."""
    if G <= 0:
        raise ValueError("gravity constant must be positive")
    src, w = model.decompose(None if isinstance(model, PointMassSet) else quad)
    r = np.linalg.norm(src, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.arccos(np.clip(np.divide(src[:, 2], r, where=r > 0), -1, 1))
    theta = np.where(r > 0, theta, 0.0)
    phi = np.arctan2(src[:, 1], src[:, 0]) % (2 * np.pi)
    Y = harmonic_basis(band_limit, theta, phi)
    ls, _ = degrees_and_orders(band_limit)
    radial = np.where(r[:, None] > 0, r[:, None] ** ls[None, :], ls[None, :] == 0)
    f = (Y * radial).T @ w
    return CoefficientVector(band_limit, -G * 4.0 * np.pi / (2 * ls + 1) * f)


def synthesize_potential(d: CoefficientVector, x):
    """Evaluate Phi(x) = sum_lm d_lm Y_lm(Omega) / r^(l+1) at exterior points."""
    points, single = _as_points(x)
    r = np.linalg.norm(points, axis=1)
    theta = np.arccos(np.clip(points[:, 2] / r, -1, 1))
    phi = np.arctan2(points[:, 1], points[:, 0]) % (2 * np.pi)
    Y = harmonic_basis(d.band_limit, theta, phi)
    ls, _ = degrees_and_orders(d.band_limit)
    vals = (Y / r[:, None] ** (ls[None, :] + 1)) @ d.values
    return float(vals[0]) if single else vals


@dataclass
class GradientTensor:
    """Symmetric trace-free second-derivative tensor T_ij = -d^2 Phi."""

    xx: float
    yy: float
    zz: float
    xy: float
    xz: float
    yz: float

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.xx, self.xy, self.xz],
                [self.xy, self.yy, self.yz],
                [self.xz, self.yz, self.zz],
            ]
        )

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "GradientTensor":
        return cls(M[0, 0], M[1, 1], M[2, 2], M[0, 1], M[0, 2], M[1, 2])

    @property
    def trace(self) -> float:
        return self.xx + self.yy + self.zz

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_matrix()))


def gradient_tensor(
    model: DensityModel, x, quad: BallQuadrature, G: float = 1.0
) -> GradientTensor:
    """Gravity gradient tensor at an exterior point (source-integral form)."""
    points, _ = _as_points(x)
    src, w = _checked_cloud(model, points, quad)
    d = points[0][None, :] - src
    r2 = np.einsum("kj,kj->k", d, d)
    r5 = r2**2.5
    M = G * np.einsum("k,ki,kj->ij", w / r5, 3.0 * d, d)
    M -= np.eye(3) * (G * np.sum(w / r2**1.5))
    return GradientTensor.from_matrix(M)


@dataclass
class InlineCrossline:
    """Gradiometer pair: inline M+ = Txx - Tyy, crossline Mx = 2 Txy."""

    m_plus: float
    m_cross: float

    @property
    def V(self) -> float:
        return self.m_plus**2 + self.m_cross**2


def inline_crossline(T: GradientTensor) -> InlineCrossline:
    """Inline/crossline observables of the x-y projection of T."""
    return InlineCrossline(T.xx - T.yy, 2.0 * T.xy)


def rotate_observables(obs: InlineCrossline, theta: float) -> InlineCrossline:
    """In-plane axis rotation by theta acts on (M+, Mx) as a rotation by 2*theta."""
    c, s = np.cos(2.0 * theta), np.sin(2.0 * theta)
    return InlineCrossline(
        c * obs.m_plus - s * obs.m_cross, s * obs.m_plus + c * obs.m_cross
    )


def local_frame(x) -> np.ndarray:
    """Orthonormal frame (columns ex, ey, ez) with ez = x/|x|.

    The in-plane completion is deterministic: ex is the normalized projection
    of the global x axis (or y axis when x is nearly radial) onto the plane
    perpendicular to x.
    """
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0:
        raise DomainError("local frame undefined at the origin")
    ez = x / nx
    candidate = np.array([1.0, 0.0, 0.0])
    proj = candidate - (candidate @ ez) * ez
    if np.linalg.norm(proj) < 1e-8:
        candidate = np.array([0.0, 1.0, 0.0])
        proj = candidate - (candidate @ ez) * ez
    ex = proj / np.linalg.norm(proj)
    ey = np.cross(ez, ex)
    return np.column_stack([ex, ey, ez])


def observable_V(model: DensityModel, x, quad: BallQuadrature, G: float = 1.0) -> float:
    """Rotation-invariant V = M+^2 + Mx^2 in the local frame whose z-axis is radial."""
    R = local_frame(x)
    T = gradient_tensor(model, x, quad, G).as_matrix()
    Tl = R.T @ T @ R
    return inline_crossline(GradientTensor.from_matrix(Tl)).V


def write_measurements_csv(path, points: np.ndarray, columns: dict):
    """Measurement CSV: x,y,z plus the given named observable columns."""
    points = np.atleast_2d(points)
    names = list(columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"] + names)
        for i, p in enumerate(points):
            row = [repr(float(v)) for v in p]
            row += [repr(float(columns[n][i])) for n in names]
            writer.writerow(row)
