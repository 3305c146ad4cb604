import numpy as np
import pytest
from numpy.testing import assert_allclose

from gravikern.density import (
    CarvedRadialBody,
    PointMassSet,
    SphericalLayer,
    Superposition,
    UniformBall,
    model_from_json_dict,
)
from gravikern.forward import (
    DomainError,
    GradientTensor,
    InlineCrossline,
    gradient_tensor,
    inline_crossline,
    local_frame,
    multipoles,
    observable_V,
    potential,
    rotate_observables,
    synthesize_potential,
    write_measurements_csv,
)
from gravikern.harmonics import CoefficientVector, make_ball_quadrature
from gravikern.profiles import RadialProfile

BQ = make_ball_quadrature(36, 1.0)


def random_exterior_points(rng, n, r_min, r_max):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * rng.uniform(r_min, r_max, n)[:, None]


# ---- potential ----


def test_point_mass_potential():
    pm = PointMassSet([1.0], [[0.0, 0.0, 0.0]])
    assert_allclose(potential(pm, [0, 0, 2.0], BQ), -0.5)


def test_shell_theorem_uniform_ball():
    ball = UniformBall(1.0, 1.0)
    phi = potential(ball, [3.0, 0.0, 0.0], BQ)
    assert_allclose(phi, -(4 * np.pi / 3) / 3, rtol=1e-10)


def test_potential_negative_for_positive_mass():
    rng = np.random.default_rng(0)
    pts = random_exterior_points(rng, 8, 1.5, 4.0)
    assert np.all(potential(UniformBall(2.0, 1.0), pts, BQ) < 0)


def test_interior_point_rejected():
    with pytest.raises(DomainError):
        potential(UniformBall(1.0, 1.0), [0.5, 0, 0], BQ)


def test_near_boundary_warns_and_still_evaluates():
    ball = UniformBall(1.0, 1.0)
    with pytest.warns(UserWarning):
        phi = potential(ball, [1.02, 0, 0], BQ)
    assert_allclose(phi, -(4 * np.pi / 3) / 1.02, rtol=1e-3)


def test_superposition_linearity():
    a = UniformBall(1.0, 0.8)
    b = PointMassSet([0.5], [[0.2, 0.1, 0.0]])
    combo = Superposition([a, b])
    x = np.array([0.0, 0.0, 2.5])
    assert_allclose(
        potential(combo, x, BQ),
        potential(a, x, BQ) + potential(b, x, BQ),
        rtol=1e-12,
    )
    da = multipoles(a, 4, BQ).values
    db = multipoles(b, 4, BQ).values
    dc = multipoles(combo, 4, BQ).values
    assert_allclose(dc, da + db, rtol=1e-12, atol=1e-15)


def test_gravity_constant_scaling():
    pm = PointMassSet([2.0], [[0, 0, 0]])
    assert_allclose(potential(pm, [0, 0, 4.0], BQ, G=6.674e-11), -6.674e-11 / 2)


# ---- multipoles ----


def test_point_mass_monopole_only():
    pm = PointMassSet([1.0], [[0, 0, 0]])
    d = multipoles(pm, 3, BQ)
    assert np.max(np.abs(d.values[1:])) < 1e-14
    assert_allclose(synthesize_potential(d, [0, 0, 2.0]), -0.5, rtol=1e-12)


def test_centered_model_has_no_dipole():
    pm = PointMassSet([1.0, 2.0], [[0.4, 0, 0], [-0.2, 0, 0]])
    d = multipoles(pm, 3, BQ)
    for m in (-1, 0, 1):
        assert abs(d.get(1, m)) < 1e-10 * abs(d.get(0, 0))


def test_carved_body_series_matches_direct_potential():
    prof = RadialProfile.constant(1.0, 1.3)
    shape = (
        CoefficientVector.zeros(2)
        .with_entry(0, 0, np.sqrt(4 * np.pi))
        .with_entry(2, 0, 0.04)
        .with_entry(2, -2, 0.02)
    )
    body = CarvedRadialBody(prof, shape)
    bq = make_ball_quadrature(40, 1.3)
    rng = np.random.default_rng(5)
    pts = random_exterior_points(rng, 20, 2.0 * 1.3, 4.0 * 1.3)
    d = multipoles(body, 12, bq)
    direct = potential(body, pts, bq)
    series = synthesize_potential(d, pts)
    assert np.max(np.abs(series - direct) / np.abs(direct)) < 1e-8


# ---- gradient tensor ----


def test_point_mass_axial_tide():
    pm = PointMassSet([1.0], [[0, 0, 0]])
    T = gradient_tensor(pm, [0, 0, 1.0], BQ)
    assert_allclose(T.as_matrix(), np.diag([-1.0, -1.0, 2.0]), atol=1e-14)


def test_trace_free_everywhere():
    rng = np.random.default_rng(1)
    model = Superposition(
        [UniformBall(1.0, 0.9), PointMassSet([0.3], [[0.2, -0.1, 0.3]])]
    )
    for p in random_exterior_points(rng, 6, 1.4, 5.0):
        T = gradient_tensor(model, p, BQ)
        assert abs(T.trace) < 1e-10 * T.norm


def finite_difference_hessian(model, x, quad, h=1e-3):
    H = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            ei, ej = np.zeros(3), np.zeros(3)
            ei[i], ej[j] = h, h
            H[i, j] = (
                potential(model, x + ei + ej, quad)
                - potential(model, x + ei - ej, quad)
                - potential(model, x - ei + ej, quad)
                + potential(model, x - ei - ej, quad)
            ) / (4 * h * h)
    return -H


def test_matches_finite_difference_hessian():
    pm = PointMassSet([1.0], [[0.3, 0.0, 0.0]])
    x = np.array([0.0, 0.0, 2.0])
    T = gradient_tensor(pm, x, BQ).as_matrix()
    H = finite_difference_hessian(pm, x, BQ)
    assert np.max(np.abs(T - H)) < 1e-6 * np.linalg.norm(T)


# ---- inline/crossline and V ----


def test_inline_crossline_arithmetic():
    T = GradientTensor(1.0, -1.0, 0.0, 0.5, 0.0, 0.0)
    obs = inline_crossline(T)
    assert obs.m_plus == 2.0 and obs.m_cross == 1.0 and obs.V == 5.0


def test_axial_tide_has_zero_observables():
    obs = inline_crossline(GradientTensor(-1.0, -1.0, 2.0, 0.0, 0.0, 0.0))
    assert obs.m_plus == 0.0 and obs.m_cross == 0.0


def test_rotation_rule_quarter_turn():
    obs = rotate_observables(InlineCrossline(1.0, 0.0), np.pi / 4)
    assert_allclose([obs.m_plus, obs.m_cross], [0.0, 1.0], atol=1e-14)


def test_rotation_identity():
    obs = InlineCrossline(0.3, -0.7)
    out = rotate_observables(obs, 0.0)
    assert out.m_plus == obs.m_plus and out.m_cross == obs.m_cross


def test_rotation_matches_frame_rotation():
    # measuring in axes rotated by -theta applies R_{2 theta} to (M+, Mx)
    rng = np.random.default_rng(2)
    A = rng.normal(size=(3, 3))
    T = (A + A.T) / 2
    obs = inline_crossline(GradientTensor.from_matrix(T))
    theta = 0.37
    c, s = np.cos(-theta), np.sin(-theta)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    obs_frame = inline_crossline(GradientTensor.from_matrix(R.T @ T @ R))
    obs_rule = rotate_observables(obs, theta)
    assert_allclose(
        [obs_frame.m_plus, obs_frame.m_cross],
        [obs_rule.m_plus, obs_rule.m_cross],
        atol=1e-13,
    )


def test_v_invariant_and_trace_det_identity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        A = rng.normal(size=(3, 3))
        T = (A + A.T) / 2
        obs = inline_crossline(GradientTensor.from_matrix(T))
        theta = rng.uniform(0, 2 * np.pi)
        rot = rotate_observables(obs, theta)
        assert_allclose(rot.V, obs.V, rtol=1e-13)
        t2 = T[:2, :2]
        ident = np.trace(t2) ** 2 - 4 * np.linalg.det(t2)
        assert_allclose(np.sqrt(obs.V), np.sqrt(ident), rtol=1e-10)


def test_observable_v_zero_for_spherical_model():
    ball = UniformBall(1.0, 1.0)
    rng = np.random.default_rng(4)
    for p in random_exterior_points(rng, 5, 1.5, 4.0):
        T = gradient_tensor(ball, p, BQ)
        assert observable_V(ball, p, BQ) < 1e-10 * T.norm**2


def test_observable_v_frame_choice_independent():
    model = PointMassSet([1.0, 0.7], [[0.3, 0, 0], [-0.2, 0.1, 0.2]])
    p = np.array([1.1, -0.8, 2.0])
    R = local_frame(p)
    v1 = observable_V(model, p, BQ)
    # rotate the in-plane axes by an arbitrary angle: V must not move
    a = 0.83
    ex = np.cos(a) * R[:, 0] + np.sin(a) * R[:, 1]
    ey = -np.sin(a) * R[:, 0] + np.cos(a) * R[:, 1]
    R2 = np.column_stack([ex, ey, R[:, 2]])
    T = gradient_tensor(model, p, BQ).as_matrix()
    obs = inline_crossline(GradientTensor.from_matrix(R2.T @ T @ R2))
    assert_allclose(obs.V, v1, rtol=1e-12)


def test_observable_v_matches_finite_difference_pipeline():
    model = PointMassSet([1.0, 0.5], [[0.3, 0, 0], [-0.3, 0.1, 0]])
    rng = np.random.default_rng(6)
    for p in random_exterior_points(rng, 12, 1.8, 4.0):
        H = finite_difference_hessian(model, p, BQ, h=3e-4)
        R = local_frame(p)
        obs = inline_crossline(GradientTensor.from_matrix(R.T @ H @ R))
        v = observable_V(model, p, BQ)
        scale = np.linalg.norm(H) ** 2
        assert abs(obs.V - v) < 1e-5 * max(v, scale)


def test_local_frame_rejects_origin():
    with pytest.raises(DomainError):
        local_frame([0.0, 0.0, 0.0])


def test_local_frame_degenerate_direction():
    R = local_frame([2.0, 0.0, 0.0])
    assert_allclose(R.T @ R, np.eye(3), atol=1e-14)
    assert_allclose(R[:, 2], [1.0, 0.0, 0.0])


# ---- serialization ----


def test_density_json_roundtrip():
    model = Superposition(
        [
            UniformBall(1.0, 0.5),
            PointMassSet([1.0], [[0.1, 0.2, 0.3]]),
            SphericalLayer(RadialProfile.constant(2.0, 1.0), 0.2, 0.9),
        ]
    )
    doc = model.to_json_dict()
    back = model_from_json_dict(doc)
    x = np.array([0.0, 0.0, 3.0])
    assert_allclose(potential(back, x, BQ), potential(model, x, BQ), rtol=1e-15)


def test_measurement_csv(tmp_path):
    pts = np.array([[0, 0, 2.0], [0, 0, 3.0]])
    phi = potential(PointMassSet([1.0], [[0, 0, 0]]), pts, BQ)
    path = tmp_path / "meas.csv"
    write_measurements_csv(path, pts, {"phi": phi})
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,z,phi"
    assert float(lines[1].split(",")[3]) == -0.5
