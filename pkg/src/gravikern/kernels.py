"""Explicit null-space members of the gravity forward maps, with verification.

rho = Laplacian(chi) produces an identically vanishing exterior potential;
rho = rho0(r) + Laplacian(chi) produces vanishing exterior inline/crossline
observables (V).  verify_kernel witnesses this numerically, normalizing by
the same observable computed for the non-cancelling density |rho|.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .chi import ChiSpec
from .density import DensityModel, LaplacianBump, SphericalLayer, Superposition
from .forward import DomainError, GradientTensor, inline_crossline, local_frame
from .harmonics import BallQuadrature, make_ball_quadrature, make_sphere_quadrature
from .profiles import RadialProfile

DEFAULT_VERIFY_DEGREE = 64


def make_potential_kernel_density(spec: ChiSpec) -> DensityModel:
    """Density rho = Laplacian(chi): exterior potential vanishes identically."""
    return LaplacianBump(spec)


def make_gradient_kernel_density(profile: RadialProfile, spec: ChiSpec) -> DensityModel:
    """Density rho = rho0 + Laplacian(chi): exterior V vanishes identically."""
    return Superposition([SphericalLayer(profile), LaplacianBump(spec)])


@dataclass
class KernelVerificationReport:
    observable: str
    surface_radius: float
    max_abs_observable: float
    scale: float
    tolerance: float
    passed: bool
    quadrature_degree: int

    def to_json_dict(self) -> dict:
        return asdict(self)

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.observable} kernel check at r={self.surface_radius:g}: "
            f"max|obs|={self.max_abs_observable:.3e}, scale={self.scale:.3e}, "
            f"tol={self.tolerance:g}"
        )


def _surface_points(surface_radius: float, n_theta: int = 9) -> np.ndarray:
    q = make_sphere_quadrature(2 * n_theta)
    st = np.sin(q.theta)
    return surface_radius * np.column_stack(
        [st * np.cos(q.phi), st * np.sin(q.phi), np.cos(q.theta)]
    )


def _potential_samples(src, w, points, G):
    return -G * (1.0 / cdist(points, src)) @ w


def _tensor_at(src, w, point, G):
    d = point[None, :] - src
    r2 = np.einsum("kj,kj->k", d, d)
    M = G * np.einsum("k,ki,kj->ij", w / r2**2.5, 3.0 * d, d)
    M -= np.eye(3) * (G * np.sum(w / r2**1.5))
    return M


def _v_samples(src, w, points, G):
    out = np.empty(len(points))
    for i, p in enumerate(points):
        R = local_frame(p)
        Tl = R.T @ _tensor_at(src, w, p, G) @ R
        out[i] = inline_crossline(GradientTensor.from_matrix(Tl)).V
    return out


def verify_kernel(
    model: DensityModel,
    kind: str,
    surface_radius: float,
    tol: float = 1e-8,
    G: float = 1.0,
    quad: BallQuadrature | None = None,
) -> KernelVerificationReport:
    """Check that the model's exterior observable vanishes on a test sphere.

    kind is "potential" or "gradient_v".  The pass criterion is relative: the
    max observable over the sphere must not exceed tol times the same
    observable computed from the absolute-value density |rho| (for the
    gradient kind the scale is the squared Frobenius norm of the |rho|
    tensor, the natural quadratic scale for V).
    """
    if kind not in ("potential", "gradient_v"):
        raise ValueError(f"unknown observable kind: {kind!r}")
    R = model.support_radius
    if surface_radius <= R:
        raise DomainError(
            f"test sphere radius {surface_radius} must exceed support radius {R}"
        )
    if quad is None:
        quad = make_ball_quadrature(DEFAULT_VERIFY_DEGREE, R)
    src, w = model.decompose(quad)
    points = _surface_points(surface_radius)
    if kind == "potential":
        observed = np.max(np.abs(_potential_samples(src, w, points, G)))
        scale = np.max(np.abs(_potential_samples(src, np.abs(w), points, G)))
    else:
        observed = np.max(np.abs(_v_samples(src, w, points, G)))
        scale = max(
            np.linalg.norm(_tensor_at(src, np.abs(w), p, G)) ** 2 for p in points
        )
    return KernelVerificationReport(
        observable=kind,
        surface_radius=float(surface_radius),
        max_abs_observable=float(observed),
        scale=float(scale),
        tolerance=float(tol),
        passed=bool(observed <= tol * scale),
        quadrature_degree=quad.sphere.exactness_degree,
    )
