"""Discretized point-mass forward matrix and its approximate null space.

F_ij = -G / |r_i - r_j| maps point masses at sources r_j to potential samples
at receivers r_i.  The matrix is generically nonsingular yet severely
ill-conditioned as the lattice refines; mass directions whose forward signal
stays below the 1-sigma noise floor form the discrete stand-in for the
continuum kernel.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .chi import ChiSpec, laplacian_chi
from .forward import DomainError

MATRIX_MAGIC = b"GRAVMATX"


@dataclass
class PointLattice:
    """Source points inside the support ball, receivers strictly outside."""

    sources: np.ndarray
    receivers: np.ndarray

    def __post_init__(self):
        self.sources = np.atleast_2d(np.asarray(self.sources, dtype=float))
        self.receivers = np.atleast_2d(np.asarray(self.receivers, dtype=float))
        if self.sources.shape[1] != 3 or self.receivers.shape[1] != 3:
            raise ValueError("sources and receivers must be (n, 3) arrays")
        for name, pts in (("sources", self.sources), ("receivers", self.receivers)):
            if len(pts) > 1 and pdist(pts).min() == 0.0:
                raise ValueError(f"{name} contain coincident points")
        R = self.support_radius
        inside = np.linalg.norm(self.receivers, axis=1) <= R
        if inside.any():
            raise ValueError(
                f"receiver {self.receivers[inside][0]} lies inside the source ball"
            )

    @property
    def support_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.sources, axis=1)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.receivers), len(self.sources)


def slab_lattice(n: int, cube_side: float = 1.0, plane_height: float | None = None):
    """Regular slab: n^3 sources in a centered cube, n^2 receivers on a plane.

    The cube of the given side is centered at the origin (so it sits inside
    the ball of radius sqrt(3)/2 * side); the receiver plane defaults to
    height 2R above it.  Returns (lattice, spacing).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    R = np.sqrt(3.0) / 2.0 * cube_side
    if plane_height is None:
        plane_height = 2.0 * R
    g = (np.arange(n) / max(n - 1, 1) - 0.5) * cube_side if n > 1 else np.zeros(1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    sources = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    gx, gy = np.meshgrid(g, g, indexing="ij")
    receivers = np.column_stack(
        [gx.ravel(), gy.ravel(), np.full(n * n, plane_height)]
    )
    spacing = cube_side / max(n - 1, 1)
    return PointLattice(sources, receivers), spacing


def random_lattice(
    n_sources: int,
    n_receivers: int,
    radius: float,
    seed: int,
    min_separation: float | None = None,
) -> PointLattice:
    """Seeded random lattice with a minimum-separation rejection rule."""
    if min_separation is None:
        min_separation = 0.05 * radius
    rng = np.random.default_rng(seed)

    def draw(n, make):
        pts = []
        for _ in range(100000):
            cand = make(rng)
            if all(np.linalg.norm(cand - p) >= min_separation for p in pts):
                pts.append(cand)
            if len(pts) == n:
                return np.array(pts)
        raise RuntimeError("rejection sampling failed; lower min_separation")

    sources = draw(n_sources, lambda r: r.uniform(-radius, radius, 3) / np.sqrt(3.0))
    receivers = draw(
        n_receivers, lambda r: (1.5 + r.uniform(0, 1.5)) * radius * _unit(r)
    )
    return PointLattice(sources, receivers)


def _unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@dataclass
class ForwardMatrix:
    matrix: np.ndarray
    lattice: PointLattice
    G: float = 1.0
    _svd_cache: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def svd(self):
        if self._svd_cache is None:
            self._svd_cache = np.linalg.svd(self.matrix)
        return self._svd_cache

    def save_csv(self, path):
        M, N = self.matrix.shape
        with open(path, "w") as fh:
            fh.write(f"# M={M} N={N} G={self.G!r}\n")
            np.savetxt(fh, self.matrix, delimiter=",", fmt="%.17g")

    def save_binary(self, path):
        """Little-endian: 8-byte magic, uint32 M, uint32 N, float64 row-major."""
        M, N = self.matrix.shape
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<II", M, N))
            fh.write(self.matrix.astype("<f8").tobytes(order="C"))


def load_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MATRIX_MAGIC:
            raise ValueError("not a gravikern matrix file")
        M, N = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(8 * M * N), dtype="<f8")
    return data.reshape(M, N).copy()


def build_forward_matrix(lattice: PointLattice, G: float = 1.0) -> ForwardMatrix:
    """Entrywise F_ij = -G / |r_i - r_j| for receivers i, sources j."""
    dist = cdist(lattice.receivers, lattice.sources)
    if dist.min() == 0.0:
        raise DomainError("a receiver coincides with a source")
    return ForwardMatrix(-G / dist, lattice, G)


@dataclass
class SvdReport:
    singular_values: np.ndarray
    condition_number: float
    numerical_rank: int
    null_dimension: int
    threshold: float

    def to_json_dict(self) -> dict:
        return {
            "singular_values": self.singular_values.tolist(),
            "condition_number": self.condition_number,
            "numerical_rank": self.numerical_rank,
            "null_dimension": self.null_dimension,
            "threshold": self.threshold,
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def svd_conditioning(F: ForwardMatrix, tau: float = 1e-12) -> SvdReport:
    """SVD report: condition number and numerical rank at relative threshold tau."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    _, s, _ = F.svd()
    rank = int(np.sum(s >= tau * s[0]))
    return SvdReport(
        singular_values=s,
        condition_number=float(s[0] / s[-1]) if s[-1] > 0 else np.inf,
        numerical_rank=rank,
        null_dimension=int(s.size - rank),
        threshold=float(tau),
    )


@dataclass
class NoiseModel:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def approximate_null_space(F: ForwardMatrix, noise: NoiseModel) -> np.ndarray:
    """Orthonormal mass directions with exterior signal below the noise floor.

    Returns the right singular vectors v_k with sigma_k <= noise.sigma: for a
    unit mass perturbation along v_k the forward signal has l2 norm sigma_k,
    hence max_i |(F v)_i| <= sigma_k <= noise.sigma (the sup norm is bounded
    by the l2 norm; the converse direction carries a sqrt(M) gap).
    Empty (N, 0) when sigma = 0 and F has trivial null space.
    """
    _, s, Vt = F.svd()
    # rows of Vt beyond min(M, N) carry implicit singular value 0
    s_full = np.zeros(Vt.shape[0])
    s_full[: s.size] = s
    basis = Vt[s_full <= noise.sigma].T
    return basis.reshape(F.shape[1], -1)


@dataclass
class SolveReport:
    masses: np.ndarray
    residual_norm: float
    solution_norm: float
    effective_rank: int
    ridge: float


def solve_point_masses(
    F: ForwardMatrix,
    phi: np.ndarray,
    noise: NoiseModel | None = None,
    ridge: float = 0.0,
) -> SolveReport:
    """Least-squares mass recovery min ||F m - phi||^2 + ridge ||m||^2 via SVD.

    If a noise model with sigma > 0 is given, seeded Gaussian noise is added
    to phi before solving.  Ill-conditioning surfaces through the diagnostics
    (solution norm, effective rank), never as a failure.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (F.shape[0],):
        raise ValueError(f"phi must have length {F.shape[0]}")
    if noise is not None and noise.sigma > 0:
        phi = phi + np.random.default_rng(noise.seed).normal(0, noise.sigma, phi.size)
    U, s, Vt = F.svd()
    proj = U.T[: s.size] @ phi
    if ridge == 0.0:
        cutoff = max(F.shape) * np.finfo(float).eps * s[0]
        filt = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
        effective_rank = int(np.sum(s > cutoff))
    else:
        filt = s / (s**2 + ridge)
        effective_rank = int(np.sum(s**2 >= ridge))
    m = Vt.T[:, : s.size] @ (filt * proj)
    return SolveReport(
        masses=m,
        residual_norm=float(np.linalg.norm(F.matrix @ m - phi)),
        solution_norm=float(np.linalg.norm(m)),
        effective_rank=effective_rank,
        ridge=float(ridge),
    )


@dataclass
class KernelProbeReport:
    """How a sampled continuum-kernel density shows up in the discrete picture."""

    max_exterior_potential: float
    potential_scale: float
    sigma: float
    null_energy_fraction: float
    exact_null_energy_fraction: float
    mass_norm: float

    def to_json_dict(self) -> dict:
        return {
            "max_exterior_potential": self.max_exterior_potential,
            "potential_scale": self.potential_scale,
            "sigma": self.sigma,
            "null_energy_fraction": self.null_energy_fraction,
            "exact_null_energy_fraction": self.exact_null_energy_fraction,
            "mass_norm": self.mass_norm,
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)


def chi_sample_lattice(spec: ChiSpec, n: int, receiver_radius: float | None = None):
    """Cell-centered cubic grid sampling the full chi support ball.

    n cells per axis over the bounding cube [-R, R]^3; cells whose centers
    fall outside the support ball are dropped (the density vanishes there).
    Receivers sit on a sphere around the support, one per source, so the
    forward matrix is square and its exact null space generically trivial.
    Returns (lattice, cell_volume).
    """
    R = spec.support_radius
    h = 2.0 * R / n
    g = -R + h * (np.arange(n) + 0.5)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    sources = pts[np.linalg.norm(pts, axis=1) < R]
    receivers = fibonacci_sphere(len(sources)) * (receiver_radius or 2.0 * R)
    return PointLattice(sources, receivers), h**3


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z**2)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def kernel_discretization_probe(
    spec: ChiSpec,
    lattice: PointLattice,
    G: float = 1.0,
    cell_volume: float | None = None,
    sigma: float | None = None,
) -> KernelProbeReport:
    """Project a continuum-kernel density onto lattice masses and analyze it.

    Masses m_j = Laplacian(chi)(r_j) * cell_volume approximate the continuum
    kernel member.  Their exterior potential is nonzero (discretization
    error), and when sigma is matched to that error the mass vector's energy
    concentrates in the approximate-null basis -- the continuum kernel
    reappears as the approximate null space, never the exact one.
    """
    if cell_volume is None:
        sep = pdist(lattice.sources).min()
        cell_volume = sep**3
    m = laplacian_chi(spec, lattice.sources) * cell_volume
    F = build_forward_matrix(lattice, G)
    phi = F.matrix @ m
    phi_abs = np.abs(F.matrix) @ np.abs(m)
    max_phi = float(np.max(np.abs(phi)))
    scale = float(np.max(phi_abs))
    if sigma is None:
        # sup-norm 1-sigma detectability level per unit mass-perturbation norm,
        # converted to the l2 singular-value criterion via the sqrt(M) bound
        sigma = np.sqrt(F.shape[0]) * max_phi / np.linalg.norm(m)
    basis = approximate_null_space(F, NoiseModel(sigma=sigma))
    mass_norm = float(np.linalg.norm(m))
    if mass_norm > 0 and basis.shape[1] > 0:
        frac = float(np.linalg.norm(basis.T @ m) ** 2 / mass_norm**2)
    else:
        frac = 0.0
    exact_basis = approximate_null_space(F, NoiseModel(sigma=0.0))
    if mass_norm > 0 and exact_basis.shape[1] > 0:
        exact_frac = float(np.linalg.norm(exact_basis.T @ m) ** 2 / mass_norm**2)
    else:
        exact_frac = 0.0
    return KernelProbeReport(
        max_exterior_potential=max_phi,
        potential_scale=scale,
        sigma=float(sigma),
        null_energy_fraction=frac,
        exact_null_energy_fraction=exact_frac,
        mass_norm=mass_norm,
    )
