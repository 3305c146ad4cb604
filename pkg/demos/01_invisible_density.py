"""A mass distribution nobody outside can detect.

Any density of the form rho = Laplacian(chi), with chi smooth and compactly
supported, produces an exterior potential that is identically zero: the mass
rearranges itself so every multipole cancels. This script builds such a
density, shows that its potential on surrounding spheres is zero to machine
precision (relative to the field its absolute value would produce), and then
shows a second trick: adding the bump to a spherically symmetric background
leaves the gradiometer invariant V unchanged, so gradiometry cannot see it
either.
"""

import numpy as np

from gravikern import (
    ChiSpec,
    RadialProfile,
    UniformBall,
    make_gradient_kernel_density,
    make_potential_kernel_density,
    verify_kernel,
)


def main():
    spec = ChiSpec(amplitude=1.0, support_radius=1.0, smoothness=3, l=2, m=0)
    rho = make_potential_kernel_density(spec)
    print("Null density rho = Laplacian(chi), chi ~ (r/R)^2 (1-(r/R)^2)^3 Y_20")
    for radius in (1.5, 2.0, 4.0):
        rep = verify_kernel(rho, "potential", surface_radius=radius)
        print(f"  {rep.summary()}")

    print()
    print("Negative control: a uniform ball is very visible")
    print(f"  {verify_kernel(UniformBall(1.0, 1.0), 'potential', 1.5).summary()}")

    print()
    print("Gradient kind: background rho0(r) + bump has the same exterior V")
    profile = RadialProfile.constant(1.0, 1.0)
    combo = make_gradient_kernel_density(profile, ChiSpec(0.1, 1.0, 3, 2, 2))
    print(f"  {verify_kernel(combo, 'gradient_v', 2.0).summary()}")
    print()
    print(
        "Conclusion: exterior potential and gradiometer data determine the\n"
        "density only up to an infinite-dimensional null space."
    )


if __name__ == "__main__":
    main()
