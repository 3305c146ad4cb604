"""Real spherical harmonics, coefficient vectors, and quadrature on S^2 and solid balls.

Conventions
-----------
Real orthonormal harmonics Y_lm with the sign fixed so that
Y_{1,0}(theta, phi) = sqrt(3/(4 pi)) * cos(theta).  Coefficient vectors are
dense over l <= L in the canonical order: l ascending, m from -l to l.

Sphere quadrature is a product rule, Gauss-Legendre in cos(theta) times a
uniform trapezoid in phi; it integrates products Y_lm * Y_l'm' exactly for
l + l' <= exactness_degree.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre, sph_harm_y

FOUR_PI = 4.0 * np.pi


def num_coefficients(band_limit: int) -> int:
    """Number of (l, m) pairs with l <= band_limit."""
    return (band_limit + 1) ** 2


def lm_to_index(l: int, m: int) -> int:
    """Position of (l, m) in the canonical dense ordering."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid harmonic index (l={l}, m={m})")
    return l * l + l + m


def index_to_lm(index: int) -> tuple[int, int]:
    """Inverse of :func:`lm_to_index`."""
    l = int(np.floor(np.sqrt(index)))
    return l, index - l * l - l


def degrees_and_orders(band_limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of l and m values in canonical order."""
    ls = np.concatenate([np.full(2 * l + 1, l) for l in range(band_limit + 1)])
    ms = np.concatenate([np.arange(-l, l + 1) for l in range(band_limit + 1)])
    return ls, ms


def real_harmonic(l: int, m: int, theta, phi):
    """Evaluate the real orthonormal harmonic Y_lm at angles (theta, phi).

    theta and phi may be scalars or broadcastable arrays.  Poles are valid.
    """
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid harmonic index (l={l}, m={m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if m == 0:
        out = sph_harm_y(l, 0, theta, phi).real
    elif m > 0:
        out = np.sqrt(2.0) * (-1.0) ** m * sph_harm_y(l, m, theta, phi).real
    else:
        out = np.sqrt(2.0) * (-1.0) ** m * sph_harm_y(l, -m, theta, phi).imag
    return out if out.ndim else float(out)


def harmonic_basis(band_limit: int, theta, phi) -> np.ndarray:
    """Matrix of all Y_lm with l <= band_limit at the given angles.

    Returns shape (n_points, (band_limit+1)**2), columns in canonical order.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    ls, ms = degrees_and_orders(band_limit)
    Y = sph_harm_y(ls[None, :], np.abs(ms)[None, :], theta[:, None], phi[:, None])
    out = np.empty((theta.size, ls.size))
    zero = ms == 0
    pos = ms > 0
    neg = ms < 0
    sign = (-1.0) ** np.abs(ms)
    out[:, zero] = Y[:, zero].real
    out[:, pos] = np.sqrt(2.0) * sign[pos] * Y[:, pos].real
    out[:, neg] = np.sqrt(2.0) * sign[neg] * Y[:, neg].imag
    return out


@dataclass
class CoefficientVector:
    """Dense real coefficient vector over harmonics with l <= band_limit.

    values follows the canonical ordering (l ascending, m from -l to l).
    """

    band_limit: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = num_coefficients(self.band_limit)
        if self.values.shape != (n,):
            raise ValueError(
                f"band limit {self.band_limit} needs {n} entries, "
                f"got shape {self.values.shape}"
            )

    @classmethod
    def zeros(cls, band_limit: int) -> "CoefficientVector":
        return cls(band_limit, np.zeros(num_coefficients(band_limit)))

    def get(self, l: int, m: int) -> float:
        return float(self.values[lm_to_index(l, m)])

    def with_entry(self, l: int, m: int, value: float) -> "CoefficientVector":
        out = self.values.copy()
        out[lm_to_index(l, m)] = value
        return CoefficientVector(self.band_limit, out)

    def copy(self) -> "CoefficientVector":
        return CoefficientVector(self.band_limit, self.values.copy())

    # -- serialization (canonical order is part of the file contract) --

    def to_json_dict(self) -> dict:
        return {"band_limit": self.band_limit, "values": self.values.tolist()}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CoefficientVector":
        return cls(int(doc["band_limit"]), np.asarray(doc["values"], dtype=float))

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    @classmethod
    def load_json(cls, path) -> "CoefficientVector":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def save_csv(self, path):
        ls, ms = degrees_and_orders(self.band_limit)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["l", "m", "value"])
            for l, m, v in zip(ls, ms, self.values):
                writer.writerow([int(l), int(m), repr(float(v))])

    @classmethod
    def load_csv(cls, path) -> "CoefficientVector":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rows.append((int(row["l"]), int(row["m"]), float(row["value"])))
        if not rows:
            raise ValueError(f"empty coefficient file: {path}")
        band_limit = max(l for l, _, _ in rows)
        values = np.zeros(num_coefficients(band_limit))
        seen = np.zeros(values.size, dtype=bool)
        for l, m, v in rows:
            i = lm_to_index(l, m)
            values[i] = v
            seen[i] = True
        if not seen.all():
            raise ValueError(f"coefficient file is not dense up to l={band_limit}")
        return cls(band_limit, values)


@dataclass
class SphereQuadrature:
    """Product quadrature rule on the unit sphere.

    Exact for spherical polynomials of total degree <= exactness_degree;
    all weights positive, summing to 4 pi.
    """

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    _basis_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    def basis(self, band_limit: int) -> np.ndarray:
        """Cached harmonic basis matrix at the quadrature nodes."""
        if band_limit not in self._basis_cache:
            self._basis_cache[band_limit] = harmonic_basis(
                band_limit, self.theta, self.phi
            )
        return self._basis_cache[band_limit]


def make_sphere_quadrature(exactness_degree: int) -> SphereQuadrature:
    """Gauss-Legendre x trapezoid product rule of the requested exactness."""
    if exactness_degree < 0:
        raise ValueError("exactness_degree must be >= 0")
    n_theta = exactness_degree // 2 + 1
    n_phi = exactness_degree + 1
    u, wu = roots_legendre(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    theta = np.arccos(u)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    w = np.outer(wu, np.full(n_phi, wphi))
    return SphereQuadrature(
        theta=th.ravel(),
        phi=ph.ravel(),
        weights=w.ravel(),
        exactness_degree=exactness_degree,
    )


@dataclass
class BallQuadrature:
    """Sphere rule times radial Gauss rule on [0, R] (weights exclude r^2)."""

    sphere: SphereQuadrature
    radial_nodes: np.ndarray
    radial_weights: np.ndarray
    support_radius: float

    @property
    def n_radial(self) -> int:
        return self.radial_nodes.size

    def radial_rule(self, upper: float) -> tuple[np.ndarray, np.ndarray]:
        """The radial Gauss rule rescaled from [0, R] to [0, upper]."""
        s = upper / self.support_radius
        return self.radial_nodes * s, self.radial_weights * s


def make_ball_quadrature(
    exactness_degree: int, support_radius: float, n_radial: int | None = None
) -> BallQuadrature:
    """Product rule on the ball of the given radius.

    Integrates f(r, Omega) r^2 dr dOmega exactly when f is a polynomial of
    degree <= exactness_degree in r and a spherical polynomial of degree
    <= exactness_degree in Omega.
    """
    if support_radius <= 0:
        raise ValueError("support_radius must be positive")
    if n_radial is None:
        # radial integrand carries an extra r^2 from the volume element
        n_radial = (exactness_degree + 2) // 2 + 1
    x, w = roots_legendre(n_radial)
    r = 0.5 * support_radius * (x + 1.0)
    wr = 0.5 * support_radius * w
    return BallQuadrature(
        sphere=make_sphere_quadrature(exactness_degree),
        radial_nodes=r,
        radial_weights=wr,
        support_radius=float(support_radius),
    )


def analyze(f, band_limit: int, quad: SphereQuadrature) -> CoefficientVector:
    """Project a function on the sphere onto harmonics with l <= band_limit.

    f is called as f(theta, phi) with node arrays.  The quadrature must be
    exact for the products Y_lm * f; aliasing of under-resolved f is the
    caller's responsibility.
    """
    vals = np.asarray(f(quad.theta, quad.phi), dtype=float)
    Y = quad.basis(band_limit)
    return CoefficientVector(band_limit, Y.T @ (quad.weights * vals))


def synthesize(coeffs: CoefficientVector, theta, phi):
    """Pointwise sum of coeffs against the harmonic basis."""
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    Y = harmonic_basis(coeffs.band_limit, np.atleast_1d(theta), np.atleast_1d(phi))
    out = Y @ coeffs.values
    return float(out[0]) if scalar else out
