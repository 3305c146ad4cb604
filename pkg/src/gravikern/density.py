"""Analytic mass-density primitives and their quadrature decompositions.

Every model reduces, given a BallQuadrature, to a weighted point cloud
(points p_k, weights w_k) such that integrals of rho(x) f(x) over the support
are approximated by sum_k w_k f(p_k) -- exactly when f times the density's
radial factor is within the rule's polynomial exactness.  The forward maps
(potential, multipoles, gradient tensor) all operate on this decomposition.

Models serialize to JSON with a "type" discriminator; see docs/formats.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .chi import ChiSpec, laplacian_chi_polar
from .harmonics import BallQuadrature, CoefficientVector
from .profiles import RadialProfile


def _unit_directions(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    return np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def _radial_segments(
    profile: RadialProfile, lower: float, upper_per_node: np.ndarray, quad: BallQuadrature
):
    """Per-node radial Gauss nodes/weights over profile pieces in [lower, psi_i].

    Yields (r, w) arrays of shape (n_nodes, n_radial) per profile piece so the
    integrand stays polynomial on each segment.
    """
    x01 = (quad.radial_nodes / quad.support_radius)[None, :]
    w01 = (quad.radial_weights / quad.support_radius)[None, :]
    for k in range(len(profile.pieces)):
        a = max(profile.breakpoints[k], lower)
        b_piece = profile.breakpoints[k + 1]
        hi = np.minimum(upper_per_node, b_piece)[:, None]
        span = np.maximum(hi - a, 0.0)
        r = a + span * x01
        w = span * w01
        yield r, w


class DensityModel:
    """Base class: tagged union of analytic density primitives."""

    @property
    def support_radius(self) -> float:
        raise NotImplementedError

    def decompose(self, quad: BallQuadrature) -> tuple[np.ndarray, np.ndarray]:
        """Weighted point cloud (points, weights) approximating rho d^3r."""
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


@dataclass
class PointMassSet(DensityModel):
    masses: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape != (self.masses.size, 3):
            raise ValueError("positions must be (n, 3) matching masses")

    @property
    def support_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.positions, axis=1), initial=0.0))

    def decompose(self, quad=None):
        return self.positions.copy(), self.masses.copy()

    def to_json_dict(self):
        return {
            "type": "point_mass_set",
            "masses": self.masses.tolist(),
            "positions": self.positions.tolist(),
        }


@dataclass
class UniformBall(DensityModel):
    density: float
    radius: float

    @property
    def support_radius(self) -> float:
        return self.radius

    @property
    def total_mass(self) -> float:
        return self.density * 4.0 / 3.0 * np.pi * self.radius**3

    def decompose(self, quad: BallQuadrature):
        sph = quad.sphere
        r, wr = quad.radial_rule(self.radius)
        dirs = _unit_directions(sph.theta, sph.phi)
        pts = dirs[:, None, :] * r[None, :, None]
        w = sph.weights[:, None] * (wr * r**2)[None, :] * self.density
        return pts.reshape(-1, 3), w.ravel()

    def to_json_dict(self):
        return {"type": "uniform_ball", "density": self.density, "radius": self.radius}


@dataclass
class CarvedRadialBody(DensityModel):
    """Body of known radial density carved by a shape function psi(Omega)."""

    profile: RadialProfile
    shape: CoefficientVector

    @property
    def support_radius(self) -> float:
        return self.profile.r_max

    def shape_values(self, quad: BallQuadrature) -> np.ndarray:
        return quad.sphere.basis(self.shape.band_limit) @ self.shape.values

    def decompose(self, quad: BallQuadrature):
        sph = quad.sphere
        psi = self.shape_values(quad)
        if np.any(psi <= 0.0):
            raise ValueError("shape function must be positive at all quadrature nodes")
        if np.any(psi > self.profile.r_max * (1 + 1e-12)):
            raise ValueError("shape function exceeds the profile's radial domain")
        dirs = _unit_directions(sph.theta, sph.phi)
        pts, wts = [], []
        for r, w in _radial_segments(self.profile, 0.0, psi, quad):
            rho = self.profile.evaluate(r)
            pts.append((dirs[:, None, :] * r[..., None]).reshape(-1, 3))
            wts.append((sph.weights[:, None] * w * r**2 * rho).ravel())
        return np.concatenate(pts), np.concatenate(wts)

    def to_json_dict(self):
        return {
            "type": "carved_radial_body",
            "profile": _profile_to_json(self.profile),
            "shape": self.shape.to_json_dict(),
        }


@dataclass
class LaplacianBump(DensityModel):
    """rho = Laplacian(chi): a guaranteed member of the potential map's kernel."""

    chi: ChiSpec

    @property
    def support_radius(self) -> float:
        return self.chi.support_radius

    def decompose(self, quad: BallQuadrature):
        sph = quad.sphere
        r, wr = quad.radial_rule(self.chi.support_radius)
        dirs = _unit_directions(sph.theta, sph.phi)
        rho = laplacian_chi_polar(
            self.chi, r[None, :], sph.theta[:, None], sph.phi[:, None]
        )
        pts = dirs[:, None, :] * r[None, :, None]
        w = sph.weights[:, None] * (wr * r**2)[None, :] * rho
        return pts.reshape(-1, 3), w.ravel()

    def to_json_dict(self):
        c = self.chi
        return {
            "type": "laplacian_bump",
            "chi": {
                "amplitude": c.amplitude,
                "support_radius": c.support_radius,
                "smoothness": c.smoothness,
                "l": c.l,
                "m": c.m,
            },
        }


@dataclass
class SphericalLayer(DensityModel):
    """Spherically symmetric density: profile restricted to r_inner <= r <= r_outer."""

    profile: RadialProfile
    r_inner: float = 0.0
    r_outer: float | None = None

    def __post_init__(self):
        if self.r_outer is None:
            self.r_outer = self.profile.r_max
        if not (0.0 <= self.r_inner < self.r_outer <= self.profile.r_max * (1 + 1e-12)):
            raise ValueError("need 0 <= r_inner < r_outer <= profile r_max")

    @property
    def support_radius(self) -> float:
        return float(self.r_outer)

    @property
    def total_mass(self) -> float:
        return 4.0 * np.pi * (self.profile.mu(2, self.r_outer) - self.profile.mu(2, self.r_inner))

    def decompose(self, quad: BallQuadrature):
        sph = quad.sphere
        dirs = _unit_directions(sph.theta, sph.phi)
        upper = np.full(sph.n_nodes, float(self.r_outer))
        pts, wts = [], []
        for r, w in _radial_segments(self.profile, self.r_inner, upper, quad):
            rho = self.profile.evaluate(r)
            pts.append((dirs[:, None, :] * r[..., None]).reshape(-1, 3))
            wts.append((sph.weights[:, None] * w * r**2 * rho).ravel())
        return np.concatenate(pts), np.concatenate(wts)

    def to_json_dict(self):
        return {
            "type": "spherical_layer",
            "profile": _profile_to_json(self.profile),
            "r_inner": self.r_inner,
            "r_outer": self.r_outer,
        }


@dataclass
class Superposition(DensityModel):
    components: list

    @property
    def support_radius(self) -> float:
        return max(c.support_radius for c in self.components)

    def decompose(self, quad: BallQuadrature):
        parts = [c.decompose(quad) for c in self.components]
        return (
            np.concatenate([p for p, _ in parts]),
            np.concatenate([w for _, w in parts]),
        )

    def to_json_dict(self):
        return {
            "type": "superposition",
            "components": [c.to_json_dict() for c in self.components],
        }


def _profile_to_json(profile: RadialProfile) -> dict:
    return {
        "breakpoints": profile.breakpoints.tolist(),
        "pieces": [p.tolist() for p in profile.pieces],
    }


def profile_from_json(doc: dict) -> RadialProfile:
    return RadialProfile(np.asarray(doc["breakpoints"]), [np.asarray(p) for p in doc["pieces"]])


def model_from_json_dict(doc: dict) -> DensityModel:
    """Rebuild a DensityModel from its JSON document (dispatch on "type")."""
    kind = doc.get("type")
    if kind == "point_mass_set":
        return PointMassSet(np.asarray(doc["masses"]), np.asarray(doc["positions"]))
    if kind == "uniform_ball":
        return UniformBall(float(doc["density"]), float(doc["radius"]))
    if kind == "carved_radial_body":
        return CarvedRadialBody(
            profile_from_json(doc["profile"]),
            CoefficientVector.from_json_dict(doc["shape"]),
        )
    if kind == "laplacian_bump":
        c = doc["chi"]
        return LaplacianBump(
            ChiSpec(
                amplitude=float(c["amplitude"]),
                support_radius=float(c["support_radius"]),
                smoothness=int(c["smoothness"]),
                l=int(c["l"]),
                m=int(c["m"]),
            )
        )
    if kind == "spherical_layer":
        return SphericalLayer(
            profile_from_json(doc["profile"]),
            float(doc.get("r_inner", 0.0)),
            float(doc["r_outer"]) if doc.get("r_outer") is not None else None,
        )
    if kind == "superposition":
        return Superposition([model_from_json_dict(c) for c in doc["components"]])
    raise ValueError(f"unknown density model type: {kind!r}")


def model_from_json(path) -> DensityModel:
    with open(path) as fh:
        return model_from_json_dict(json.load(fh))
