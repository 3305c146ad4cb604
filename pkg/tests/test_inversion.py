import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad as sciquad

from gravikern.density import CarvedRadialBody, PointMassSet
from gravikern.forward import DomainError, multipoles
from gravikern.harmonics import CoefficientVector, make_ball_quadrature
from gravikern.inversion import (
    NewtonOptions,
    ShapeFunction,
    center_of_mass,
    data_to_targets,
    default_quadrature,
    initial_sphere_radius,
    invert_shape,
    recenter_data,
    recenter_model,
    shape_forward,
    shape_forward_derivative,
    write_psi_grid,
)
from gravikern.profiles import RadialProfile

UNIT = RadialProfile.constant(1.0, 2.0)


def perturbed_sphere(radius, band_limit, entries):
    S = ShapeFunction.sphere(radius, band_limit).coefficients
    for (l, m), v in entries.items():
        S = S.with_entry(l, m, v)
    return S


# ---- forward functional ----


def test_forward_sphere_closed_form():
    # for psi == a const, F[S]_lm = sqrt(4 pi) mu_{2}(a) delta_{l0}m0... only l=0 survives
    a = 1.2
    S = ShapeFunction.sphere(a, 4).coefficients
    F = shape_forward(S, UNIT, 4)
    expected = np.sqrt(4 * np.pi) * UNIT.mu(2, a)
    assert_allclose(F.get(0, 0), expected, rtol=1e-13)
    assert np.max(np.abs(F.values[1:])) < 1e-13 * expected


def test_forward_scalar_quadrature_oracle():
    # axisymmetric shape: reduce each row to a 1-D integral in cos(theta)
    S = perturbed_sphere(1.0, 2, {(2, 0): 0.1})
    F = shape_forward(S, UNIT, 2)
    from gravikern.harmonics import real_harmonic

    for l in (0, 2):
        def integrand(ct, l=l):
            th = np.arccos(ct)
            psi = S.get(0, 0) * real_harmonic(0, 0, th, 0.0) + S.get(
                2, 0
            ) * real_harmonic(2, 0, th, 0.0)
            return real_harmonic(l, 0, th, 0.0) * UNIT.mu(l + 2, psi)

        val, _ = sciquad(integrand, -1.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        assert_allclose(F.get(l, 0), 2 * np.pi * val, rtol=1e-10)


def test_forward_derivative_matches_finite_difference():
    S = perturbed_sphere(1.0, 3, {(2, 0): 0.05, (3, 1): 0.02})
    quad = default_quadrature(3, UNIT)
    J = shape_forward_derivative(S, UNIT, 3, quad)
    h = 1e-6
    n = (3 + 1) ** 2
    J_fd = np.empty((n, n))
    base = shape_forward(S, UNIT, 3, quad).values
    for j in range(n):
        Sp = S.copy()
        Sp.values[j] += h
        J_fd[:, j] = (shape_forward(Sp, UNIT, 3, quad).values - base) / h
    assert np.max(np.abs(J - J_fd)) < 1e-5 * np.max(np.abs(J))


def test_derivative_diagonal_at_sphere():
    a = 1.1
    S = ShapeFunction.sphere(a, 4).coefficients
    J = shape_forward_derivative(S, UNIT, 4)
    from gravikern.harmonics import degrees_and_orders

    ls, _ = degrees_and_orders(4)
    expected = UNIT.evaluate(a) * a ** (ls + 2)
    assert_allclose(np.diag(J), expected, rtol=1e-12)
    off = J - np.diag(np.diag(J))
    assert np.max(np.abs(off)) < 1e-11 * np.max(expected)


def test_psi_validation_rejects_nonpositive_shape():
    S = perturbed_sphere(0.2, 2, {(2, 0): 2.0})
    with pytest.raises(DomainError):
        shape_forward(S, UNIT, 2)


def test_psi_validation_rejects_jump_crossing():
    prof = RadialProfile([0.0, 0.5, 1.5], [np.array([2.0]), np.array([1.0])])
    S = perturbed_sphere(0.5, 2, {(2, 0): 0.1})
    with pytest.raises(DomainError):
        shape_forward(S, prof, 2)


# ---- target conversion and seeding ----


def test_data_to_targets_inverts_multipole_factor():
    D = CoefficientVector.zeros(2).with_entry(0, 0, -4 * np.pi).with_entry(2, 1, -2.0)
    f = data_to_targets(D)
    assert_allclose(f.get(0, 0), 1.0)
    assert_allclose(f.get(2, 1), 2.0 * 5 / (4 * np.pi))


def test_initial_sphere_radius_constant_profile():
    # mu_2(a) = a^3/3 for rho0 = 1
    a = 0.9
    f00 = np.sqrt(4 * np.pi) * a**3 / 3
    assert_allclose(initial_sphere_radius(UNIT, f00), a, rtol=1e-12)


def test_initial_sphere_radius_capacity_check():
    with pytest.raises(DomainError):
        initial_sphere_radius(UNIT, np.sqrt(4 * np.pi) * UNIT.mu(2, 2.0) * 1.01)
    with pytest.raises(DomainError):
        initial_sphere_radius(UNIT, -1.0)


# ---- full inversion roundtrips ----


def roundtrip_data(S_true, profile, band_limit, data_band=None):
    data_band = data_band or band_limit
    F = shape_forward(S_true, profile, data_band)
    from gravikern.harmonics import degrees_and_orders

    ls, _ = degrees_and_orders(data_band)
    vals = F.values * (-4 * np.pi) / (2 * ls + 1)
    return CoefficientVector(data_band, vals)


def test_roundtrip_sphere_converges_immediately():
    S_true = ShapeFunction.sphere(1.0, 4).coefficients
    D = roundtrip_data(S_true, UNIT, 4)
    res = invert_shape(D, UNIT, NewtonOptions(band_limit=4))
    assert res.converged
    assert res.iterations == 0
    assert_allclose(res.shape.coefficients.values, S_true.values, atol=1e-11)


def test_roundtrip_perturbed_sphere():
    S_true = perturbed_sphere(1.0, 4, {(2, 0): 0.05, (3, 1): 0.02, (4, -2): 0.01})
    D = roundtrip_data(S_true, UNIT, 4)
    res = invert_shape(D, UNIT, NewtonOptions(band_limit=4))
    assert res.converged
    err = np.max(np.abs(res.shape.coefficients.values - S_true.values))
    assert err < 1e-9
    # residual history decreases strictly
    h = res.residual_history
    assert all(b < a for a, b in zip(h, h[1:]))


def test_roundtrip_nonuniform_profile():
    prof = RadialProfile([0.0, 2.0], [np.array([2.0, 0.0, -0.4])])
    S_true = perturbed_sphere(1.0, 3, {(2, 2): 0.06, (3, 0): -0.03})
    D = roundtrip_data(S_true, prof, 3)
    res = invert_shape(D, prof, NewtonOptions(band_limit=3))
    assert res.converged
    assert np.max(np.abs(res.shape.coefficients.values - S_true.values)) < 1e-9


def test_roundtrip_through_carved_body_multipoles():
    # full pipeline: body -> exterior multipoles -> inversion
    S_true = perturbed_sphere(1.0, 3, {(2, 0): 0.05, (3, 1): 0.02})
    body = CarvedRadialBody(UNIT, S_true)
    bq = make_ball_quadrature(64, 2.0)
    D = multipoles(body, 3, bq)
    res = invert_shape(D, UNIT, NewtonOptions(band_limit=3))
    assert res.converged
    assert np.max(np.abs(res.shape.coefficients.values - S_true.values)) < 1e-7


def test_band_limit_mismatch_rejected():
    D = CoefficientVector.zeros(2).with_entry(0, 0, -4 * np.pi)
    with pytest.raises(ValueError):
        invert_shape(D, UNIT, NewtonOptions(band_limit=4))


def test_dipole_guard_triggers():
    S_true = ShapeFunction.sphere(1.0, 2).coefficients
    D = roundtrip_data(S_true, UNIT, 2)
    bad = D.with_entry(1, 0, 0.1 * abs(D.get(0, 0)))
    with pytest.raises(DomainError):
        invert_shape(bad, UNIT, NewtonOptions(band_limit=2))


def test_nonconvergence_reported_not_raised():
    S_true = perturbed_sphere(1.0, 2, {(2, 0): 0.05})
    D = roundtrip_data(S_true, UNIT, 2)
    res = invert_shape(
        D, UNIT, NewtonOptions(band_limit=2, max_iterations=1, residual_tolerance=1e-14)
    )
    assert not res.converged
    assert res.message != ""


def test_result_json(tmp_path):
    S_true = perturbed_sphere(1.0, 2, {(2, 0): 0.05})
    D = roundtrip_data(S_true, UNIT, 2)
    res = invert_shape(D, UNIT, NewtonOptions(band_limit=2))
    path = tmp_path / "result.json"
    res.save_json(path)
    doc = json.loads(path.read_text())
    assert doc["converged"] is True
    assert len(doc["residual_history"]) == doc["iterations"] + 1
    assert doc["shape"]["band_limit"] == 2


# ---- recentering ----


def test_center_of_mass_point_set():
    pm = PointMassSet([1.0, 3.0], [[1.0, 0, 0], [0, 0, 0]])
    assert_allclose(center_of_mass(pm, None), [0.25, 0, 0])


def test_recenter_model_kills_dipole():
    pm = PointMassSet([1.0, 2.0], [[0.5, 0.1, 0], [0.1, -0.2, 0.3]])
    centered, t = recenter_model(pm, None)
    bq = make_ball_quadrature(16, 1.0)
    D = multipoles(centered, 2, bq)
    assert max(abs(D.get(1, m)) for m in (-1, 0, 1)) < 1e-12 * abs(D.get(0, 0))
    assert_allclose(t, center_of_mass(pm, None))


def test_recenter_data_estimates_translation():
    t_true = np.array([0.02, -0.015, 0.01])
    pm = PointMassSet([1.0, 2.0], [t_true + [0.3, 0, 0], t_true - [0.15, 0, 0]])
    bq = make_ball_quadrature(16, 1.0)
    D = multipoles(pm, 2, bq)
    centered, t = recenter_data(D)
    # first-order estimate of a small offset
    assert np.max(np.abs(t - t_true)) < 5e-3 * np.linalg.norm(t_true) + 2e-4
    assert all(centered.get(1, m) == 0.0 for m in (-1, 0, 1))


def test_recentered_data_inverts_cleanly():
    # offset body: raw data trip the dipole guard, recentered data invert
    S_true = perturbed_sphere(1.0, 2, {(2, 0): 0.05})
    body = CarvedRadialBody(UNIT, S_true)
    offset = PointMassSet([0.4], [[0.08, 0.0, 0.0]])
    bq = make_ball_quadrature(48, 2.0)
    from gravikern.density import Superposition

    D = multipoles(Superposition([body, offset]), 2, bq)
    strict = NewtonOptions(band_limit=2, center_tolerance=1e-4)
    with pytest.raises(DomainError):
        invert_shape(D, UNIT, strict)
    D2, _ = recenter_data(D)
    res = invert_shape(D2, UNIT, strict)
    assert res.converged


def test_psi_grid_csv(tmp_path):
    shape = ShapeFunction.sphere(1.5, 2)
    path = tmp_path / "psi.csv"
    write_psi_grid(shape, path, n_theta=5, n_phi=8)
    lines = path.read_text().splitlines()
    assert lines[0] == "theta,phi,psi"
    assert len(lines) == 1 + 5 * 8
    assert_allclose(float(lines[1].split(",")[2]), 1.5, rtol=1e-12)
