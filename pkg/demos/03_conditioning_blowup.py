"""How the continuum null space haunts the discretized problem.

A finite point-mass forward matrix F_ij = -G/|r_i - r_j| is generically
nonsingular, so on paper the inverse problem is solvable. In practice its
condition number explodes as the lattice refines, and mass directions whose
exterior signal falls below the measurement noise form an approximate null
space that mirrors the continuum one. Three exhibits:

1. slab lattices n = 2, 3, 4: condition numbers grow by orders of magnitude;
2. mass recovery with a fixed tiny noise level degrades as n grows;
3. a continuum null density sampled onto the lattice has energy almost
   entirely inside the noise-matched approximate null basis, yet none in the
   exact null space.
"""

import numpy as np

from gravikern import (
    ChiSpec,
    NoiseModel,
    PointLattice,
    build_forward_matrix,
    chi_sample_lattice,
    fibonacci_sphere,
    kernel_discretization_probe,
    slab_lattice,
    solve_point_masses,
    svd_conditioning,
)


def main():
    print("1. Condition number vs slab refinement")
    for n in (2, 3, 4):
        lat, spacing = slab_lattice(n)
        rep = svd_conditioning(build_forward_matrix(lat))
        print(
            f"  n={n}: {lat.shape[0]}x{lat.shape[1]} matrix, spacing {spacing:.3f}, "
            f"cond = {rep.condition_number:.3e}, rank {rep.numerical_rank}"
        )

    print("\n2. Mass recovery with noise sigma = 1e-9 (median of 20 trials)")
    for n in (2, 3, 4):
        lat, _ = slab_lattice(n)
        lat = PointLattice(lat.sources, fibonacci_sphere(n**3) * 2.0)
        F = build_forward_matrix(lat)
        rng = np.random.default_rng(42)
        errs = []
        for seed in range(20):
            m_true = rng.uniform(0.5, 1.5, n**3)
            rep = solve_point_masses(
                F, F.matrix @ m_true, noise=NoiseModel(sigma=1e-9, seed=seed)
            )
            errs.append(np.linalg.norm(rep.masses - m_true) / np.linalg.norm(m_true))
        print(f"  n={n}: median relative error {np.median(errs):.3e}")

    print("\n3. A sampled continuum null density in the discrete picture")
    spec = ChiSpec(1.0, 1.0, 3, 2, 0)
    for n in (6, 8, 12):
        lattice, vol = chi_sample_lattice(spec, n)
        probe = kernel_discretization_probe(spec, lattice, cell_volume=vol)
        print(
            f"  n={n}: exterior signal {probe.max_exterior_potential:.2e} "
            f"(scale {probe.potential_scale:.2e}), "
            f"approximate-null energy {probe.null_energy_fraction:.4f}, "
            f"exact-null energy {probe.exact_null_energy_fraction:.1f}"
        )
    print(
        "\nThe continuum kernel never becomes an exact discrete null vector;\n"
        "it reappears as the approximate null space under any realistic noise."
    )


if __name__ == "__main__":
    main()
