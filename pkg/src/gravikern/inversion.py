"""Constrained shape inversion by damped Newton iteration in coefficient space.

The forward functional maps a shape coefficient vector S (radial boundary
psi(Omega) = sum s_lm Y_lm) of a body of known radial density to the
coefficient vector F[S] with entries integral(Y_lm(Omega) *
mu_{l+2}(psi(Omega)) dOmega), where mu_n is the radial moment of the density
profile.  Its derivative is available in closed form and is diagonal at the
perfect sphere, which seeds the Newton iteration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .density import DensityModel, PointMassSet, Superposition
from .forward import DomainError
from .harmonics import (
    CoefficientVector,
    SphereQuadrature,
    degrees_and_orders,
    lm_to_index,
    make_sphere_quadrature,
    synthesize,
)
from .profiles import RadialProfile

SQRT_4PI = np.sqrt(4.0 * np.pi)
MAX_QUADRATURE_DEGREE = 160


@dataclass
class ShapeFunction:
    """Radially convex body boundary psi(Omega) in coefficient form."""

    coefficients: CoefficientVector

    def evaluate(self, theta, phi):
        return synthesize(self.coefficients, theta, phi)

    @classmethod
    def sphere(cls, radius: float, band_limit: int) -> "ShapeFunction":
        c = CoefficientVector.zeros(band_limit)
        return cls(c.with_entry(0, 0, SQRT_4PI * radius))


@dataclass
class NewtonOptions:
    band_limit: int = 8
    max_iterations: int = 50
    residual_tolerance: float = 1e-10
    damping: float = 1.0
    max_halvings: int = 8
    quadrature_margin: int = 8
    center_tolerance: float = 1e-2

    def __post_init__(self):
        if self.residual_tolerance <= 0:
            raise ValueError("residual_tolerance must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class InversionResult:
    shape: ShapeFunction
    iterations: int
    final_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    initial_radius: float = 0.0
    message: str = ""

    def to_json_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": self.residual_history,
            "initial_radius": self.initial_radius,
            "message": self.message,
            "shape": self.shape.coefficients.to_json_dict(),
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def default_quadrature(
    band_limit: int, profile: RadialProfile, margin: int = 8
) -> SphereQuadrature:
    """Sphere rule resolving Y_lm * mu_{l+2}(psi) for band-limited psi.

    For a polynomial profile piece of degree p, mu_{l+2}(w) is a polynomial
    of degree l + 3 + p in w, so the integrand is band-limited to
    l + (l + 3 + p) * band_limit; the rule is exact when psi stays within a
    single profile piece (capped at MAX_QUADRATURE_DEGREE otherwise).
    """
    p = max(poly.size - 1 for poly in profile.pieces)
    degree = band_limit + (band_limit + 3 + p) * max(band_limit, 1) + margin
    return make_sphere_quadrature(min(degree, MAX_QUADRATURE_DEGREE))


def _psi_at_nodes(S: CoefficientVector, profile: RadialProfile, quad: SphereQuadrature):
    psi = quad.basis(S.band_limit) @ S.values
    if np.any(psi <= 0.0):
        raise DomainError("shape function is nonpositive at a quadrature node")
    if np.any(psi > profile.r_max * (1 + 1e-12)):
        raise DomainError("shape function exceeds the profile's radial domain")
    crossed = profile.breakpoints_in(float(psi.min()), float(psi.max()))
    for r in crossed:
        if abs(profile.jump_at(r)) > 1e-12:
            raise DomainError(
                f"profile has a density jump at r={r} crossed by the shape; "
                "the forward derivative would be discontinuous"
            )
    return psi


def shape_forward(
    S: CoefficientVector,
    profile: RadialProfile,
    band_limit: int,
    quad: SphereQuadrature | None = None,
) -> CoefficientVector:
    """Forward functional F[S]: moment-composed projection onto Y_lm, l <= band_limit."""
    if quad is None:
        quad = default_quadrature(max(band_limit, S.band_limit), profile)
    psi = _psi_at_nodes(S, profile, quad)
    Y = quad.basis(band_limit)
    out = np.empty((band_limit + 1) ** 2)
    for l in range(band_limit + 1):
        mu_l = profile.mu_values(l + 2, psi)
        i0, i1 = lm_to_index(l, -l), lm_to_index(l, l) + 1
        out[i0:i1] = Y[:, i0:i1].T @ (quad.weights * mu_l)
    return CoefficientVector(band_limit, out)


def shape_forward_derivative(
    S0: CoefficientVector,
    profile: RadialProfile,
    band_limit: int,
    quad: SphereQuadrature | None = None,
) -> np.ndarray:
    """Dense derivative matrix of F at S0 over coefficient space.

    Row (l, m), column (p, q):
    integral(Y_lm * rho0(psi0) * psi0^(l+2) * Y_pq dOmega).
    """
    if quad is None:
        quad = default_quadrature(max(band_limit, S0.band_limit), profile)
    psi = _psi_at_nodes(S0, profile, quad)
    rho = profile.evaluate(psi)
    Yrow = quad.basis(band_limit)
    Ycol = quad.basis(band_limit)
    n = (band_limit + 1) ** 2
    G = np.empty((n, n))
    for l in range(band_limit + 1):
        d = quad.weights * rho * psi ** (l + 2)
        i0, i1 = lm_to_index(l, -l), lm_to_index(l, l) + 1
        G[i0:i1, :] = (Yrow[:, i0:i1] * d[:, None]).T @ Ycol
    return G


def data_to_targets(D: CoefficientVector, G: float = 1.0) -> CoefficientVector:
    """Convert multipole data d_lm to forward-functional targets f_lm.

    Inverts d_lm = -G * (4 pi / (2l+1)) * f_lm.
    """
    ls, _ = degrees_and_orders(D.band_limit)
    return CoefficientVector(D.band_limit, D.values * (2 * ls + 1) / (-4.0 * np.pi * G))


def initial_sphere_radius(profile: RadialProfile, f00_target: float) -> float:
    """Radius a0 with mu_2(a0) = f00_target / sqrt(4 pi), by bracketed root-find.

    mu_2 is strictly increasing wherever rho0 > 0, so the root is unique.
    """
    target = f00_target / SQRT_4PI
    if target <= 0:
        raise DomainError("monopole target implies nonpositive total mass")
    hi = profile.r_max
    if profile.mu(2, hi) < target:
        raise DomainError("monopole target exceeds the profile's total capacity")
    g = lambda a: profile.mu(2, a) - target
    assert g(0.0) < 0.0 <= g(hi), "root not bracketed"
    return brentq(g, 0.0, hi, xtol=1e-15, rtol=8.9e-16)


def invert_shape(
    D: CoefficientVector,
    profile: RadialProfile,
    opts: NewtonOptions | None = None,
    G: float = 1.0,
) -> InversionResult:
    """Recover the shape of a radially convex body from exterior multipole data.

    Damped Newton iteration on F[S] = targets, seeded at the perfect sphere
    matching the monopole.  Data must be in the center-of-mass frame
    (vanishing dipole); targets above the band limit are ignored.
    """
    opts = opts or NewtonOptions()
    L = opts.band_limit
    if D.band_limit < L:
        raise ValueError(
            f"data band limit {D.band_limit} below shape band limit {L}; "
            "provide data with band_limit >= shape band limit"
        )
    d00 = D.get(0, 0)
    dipole = max(abs(D.get(1, m)) for m in (-1, 0, 1)) if D.band_limit >= 1 else 0.0
    if dipole > opts.center_tolerance * abs(d00):
        raise DomainError(
            "data are not in the center-of-mass frame (nonvanishing dipole); "
            "recenter first"
        )
    targets_full = data_to_targets(D, G)
    target = CoefficientVector(L, targets_full.values[: (L + 1) ** 2])
    a0 = initial_sphere_radius(profile, target.get(0, 0))
    quad = default_quadrature(L, profile, opts.quadrature_margin)
    S = ShapeFunction.sphere(a0, L).coefficients

    t_norm = np.linalg.norm(target.values)
    residual_vec = shape_forward(S, profile, L, quad).values - target.values
    residual = np.linalg.norm(residual_vec) / t_norm
    history = [float(residual)]

    converged = residual <= opts.residual_tolerance
    message = "converged at initialization" if converged else ""
    iterations = 0
    while not converged and iterations < opts.max_iterations:
        J = shape_forward_derivative(S, profile, L, quad)
        U, s, Vt = np.linalg.svd(J)
        if s[-1] <= 1e-14 * s[0]:
            raise DomainError(
                f"singular forward derivative (smallest singular value {s[-1]:.3e})"
            )
        delta = Vt.T @ ((U.T @ residual_vec) / s)

        damping = opts.damping
        accepted = False
        for _ in range(opts.max_halvings + 1):
            trial = CoefficientVector(L, S.values - damping * delta)
            try:
                trial_vec = shape_forward(trial, profile, L, quad).values - target.values
            except DomainError:
                damping *= 0.5
                continue
            trial_res = np.linalg.norm(trial_vec) / t_norm
            if trial_res < residual:
                S, residual_vec, residual = trial, trial_vec, trial_res
                accepted = True
                break
            damping *= 0.5
        iterations += 1
        if not accepted:
            message = "damping exhausted without residual decrease"
            break
        history.append(float(residual))
        converged = residual <= opts.residual_tolerance

    if not converged and not message:
        message = "maximum iterations reached"
    return InversionResult(
        shape=ShapeFunction(S),
        iterations=iterations,
        final_residual=float(residual),
        converged=bool(converged),
        residual_history=history,
        initial_radius=float(a0),
        message=message,
    )


def center_of_mass(model: DensityModel, quad) -> np.ndarray:
    """Mass-weighted centroid of a density model."""
    pts, w = model.decompose(None if isinstance(model, PointMassSet) else quad)
    total = w.sum()
    if abs(total) < 1e-14 * np.abs(w).sum():
        raise DomainError("center of mass undefined for (near-)zero total mass")
    return (w @ pts) / total


def recenter_model(model: DensityModel, quad) -> tuple[DensityModel, np.ndarray]:
    """Translate a model so its center of mass sits at the origin.

    Returns (translated model, translation vector t) with t the original
    center of mass.  Analytic primitives are origin-centered by construction
    and pass through; only point-mass sets support a genuine translation.
    """
    t = center_of_mass(model, quad)
    if np.linalg.norm(t) < 1e-13 * max(model.support_radius, 1.0):
        return model, np.zeros(3)
    if isinstance(model, PointMassSet):
        return PointMassSet(model.masses, model.positions - t), t
    if isinstance(model, Superposition):
        shifted = [recenter_by(c, t) for c in model.components]
        return Superposition(shifted), t
    raise DomainError("cannot translate an origin-centered analytic primitive")


def recenter_by(model: DensityModel, t: np.ndarray) -> DensityModel:
    if isinstance(model, PointMassSet):
        return PointMassSet(model.masses, model.positions - t)
    raise DomainError("cannot translate an origin-centered analytic primitive")


def recenter_data(D: CoefficientVector, G: float = 1.0) -> tuple[CoefficientVector, np.ndarray]:
    """Translation vector implied by the dipole, and data with the dipole removed.

    t = sqrt(3) * (d_{1,1}, d_{1,-1}, d_{1,0}) / d_{0,0}.  Zeroing the dipole
    is exact to first order in |t|; for exact recentering translate the model
    itself and recompute multipoles.
    """
    if D.band_limit < 1:
        return D.copy(), np.zeros(3)
    d00 = D.get(0, 0)
    if abs(d00) < 1e-300:
        raise DomainError("zero monopole: translation undefined")
    t = np.sqrt(3.0) * np.array([D.get(1, 1), D.get(1, -1), D.get(1, 0)]) / d00
    out = D.copy()
    for m in (-1, 0, 1):
        out.values[lm_to_index(1, m)] = 0.0
    return out, t


def recenter_to_com(obj, quad=None, G: float = 1.0):
    """Recenter either a density model or a multipole data vector."""
    if isinstance(obj, DensityModel):
        return recenter_model(obj, quad)
    if isinstance(obj, CoefficientVector):
        return recenter_data(obj, G)
    raise TypeError("expected a DensityModel or CoefficientVector")


def write_psi_grid(shape: ShapeFunction, path, n_theta: int = 37, n_phi: int = 73):
    """Lat-long grid of psi values as CSV (theta, phi, psi) for plotting."""
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    psi = shape.evaluate(th.ravel(), ph.ravel())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "phi", "psi"])
        for t_, p_, v in zip(th.ravel(), ph.ravel(), psi):
            writer.writerow([repr(float(t_)), repr(float(p_)), repr(float(v))])
