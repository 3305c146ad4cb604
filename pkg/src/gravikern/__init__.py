"""Gravitational forward maps, their null spaces, and constrained shape inversion."""

from .chi import ChiSpec, chi_value, laplacian_chi
from .density import (
    CarvedRadialBody,
    DensityModel,
    LaplacianBump,
    PointMassSet,
    SphericalLayer,
    Superposition,
    UniformBall,
    model_from_json,
    model_from_json_dict,
)
from .discrete import (
    ForwardMatrix,
    NoiseModel,
    PointLattice,
    SvdReport,
    approximate_null_space,
    build_forward_matrix,
    chi_sample_lattice,
    fibonacci_sphere,
    kernel_discretization_probe,
    random_lattice,
    slab_lattice,
    solve_point_masses,
    svd_conditioning,
)
from .forward import (
    DomainError,
    GradientTensor,
    InlineCrossline,
    gradient_tensor,
    inline_crossline,
    multipoles,
    observable_V,
    potential,
    rotate_observables,
    synthesize_potential,
)
from .harmonics import (
    BallQuadrature,
    CoefficientVector,
    SphereQuadrature,
    analyze,
    harmonic_basis,
    make_ball_quadrature,
    make_sphere_quadrature,
    real_harmonic,
    synthesize,
)
from .inversion import (
    InversionResult,
    NewtonOptions,
    ShapeFunction,
    invert_shape,
    recenter_to_com,
    shape_forward,
    shape_forward_derivative,
)
from .kernels import (
    KernelVerificationReport,
    make_gradient_kernel_density,
    make_potential_kernel_density,
    verify_kernel,
)
from .profiles import RadialProfile, mu

__version__ = "0.1.0"
