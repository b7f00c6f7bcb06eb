import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import melnikov3d as m3
from melnikov3d.geometry import spherical_basis

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
vec = st.tuples(finite, finite, finite).map(np.array)
mat = st.lists(finite, min_size=9, max_size=9).map(lambda v: np.array(v).reshape(3, 3))


def test_wedge_basis():
    assert np.array_equal(m3.wedge([1, 0, 0], [0, 1, 0]), [0, 0, 1])


def test_wedge_self_vanishes():
    b = np.array([0.3, -1.2, 2.0])
    assert np.array_equal(m3.wedge(b, b), np.zeros(3))


def test_wedge_hand_expanded():
    # determinant expansion of (1,2,3) x (4,5,6)
    assert np.array_equal(m3.wedge([1, 2, 3], [4, 5, 6]), [-3, 6, -3])


def test_scalar_triple_unit_box():
    assert m3.scalar_triple([1, 0, 0], [0, 1, 0], [0, 0, 1]) == 1.0


def test_scalar_triple_degenerate():
    b = np.array([1.0, 2.0, -0.5])
    assert m3.scalar_triple(b, b, [0.0, 1.0, 4.0]) == 0.0
    assert m3.scalar_triple(b, [0.0, 1.0, 4.0], b) == 0.0


def test_scalar_triple_cofactor():
    # 3x3 determinant of rows (1,2,3), (4,5,6), (7,8,10)
    assert m3.scalar_triple([1, 2, 3], [4, 5, 6], [7, 8, 10]) == pytest.approx(-3.0)


def test_triple_identity_trivial_matrices():
    b, c, d = np.array([1.0, 2, 3]), np.array([-1.0, 0, 2]), np.array([0.5, 1, -1])
    assert m3.triple_identity_residual(np.eye(3), b, c, d) == pytest.approx(0.0, abs=1e-14)
    assert m3.triple_identity_residual(np.zeros((3, 3)), b, c, d) == 0.0


@given(mat, vec, vec, vec)
@settings(max_examples=200, deadline=None)
def test_triple_identity_randomized(A, b, c, d):
    scale = abs(np.trace(A) * m3.scalar_triple(b, c, d)) + 1.0
    assert abs(m3.triple_identity_residual(A, b, c, d)) < 1e-12 * scale


@given(vec, vec)
@settings(max_examples=200, deadline=None)
def test_wedge_anticommutes(b, c):
    assert np.all(np.abs(m3.wedge(b, c) + m3.wedge(c, b)) <= 1e-15)


@given(vec, vec)
@settings(max_examples=200, deadline=None)
def test_lagrange_identity(b, c):
    lhs = float(np.dot(m3.wedge(b, c), m3.wedge(b, c))) + float(np.dot(b, c)) ** 2
    rhs = float(np.dot(b, b)) * float(np.dot(c, c))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_vec3_mat3_validation():
    with pytest.raises(ValueError):
        m3.vec3(1.0, np.nan, 0.0)
    with pytest.raises(ValueError):
        m3.vec3([1.0, 2.0])
    with pytest.raises(ValueError):
        m3.mat3(np.full((3, 3), np.inf))
    assert m3.mat3(np.arange(9.0)).shape == (3, 3)


def test_spherical_point_invariants():
    p = m3.SphericalPoint(1.0, np.pi + 1e-12, -0.5)
    assert p.theta == np.pi
    assert 0.0 <= p.phi < 2 * np.pi
    with pytest.raises(ValueError):
        m3.SphericalPoint(-0.1, 0.0, 0.0)
    with pytest.raises(ValueError):
        m3.SphericalPoint(np.inf, 0.0, 0.0)


def test_point_map_equator():
    p = m3.SphericalPoint(1.0, np.pi / 2, 0.0)
    assert np.allclose(m3.spherical_to_cartesian(p), [1, 0, 0], atol=1e-15)


def test_round_trip_off_axis():
    rng = np.random.default_rng(7)
    for _ in range(200):
        v = rng.uniform(-2, 2, 3)
        if np.hypot(v[0], v[1]) < 1e-3:
            continue
        back = m3.spherical_to_cartesian(m3.cartesian_to_spherical(v))
        assert np.linalg.norm(back - v) <= 1e-14 * max(1.0, np.linalg.norm(v))


def test_theta_hat_direction():
    # derivative of the point map w.r.t. theta at the equator points to -z
    _, theta_hat, _ = spherical_basis(np.pi / 2, 0.0)
    assert np.allclose(theta_hat, [0, 0, -1], atol=1e-15)


def test_vector_conversion_pole_error():
    with pytest.raises(m3.PoleSingularityError):
        m3.spherical_vector_to_cartesian(m3.SphericalPoint(1.0, 0.0, 0.0), [0, 1, 0])
    with pytest.raises(m3.PoleSingularityError):
        m3.spherical_vector_to_cartesian(m3.SphericalPoint(1.0, np.pi, 0.0), [1, 0, 0])


@given(st.floats(0.05, 3.0), st.floats(0.1, np.pi - 0.1), st.floats(0, 2 * np.pi),
       vec)
@settings(max_examples=200, deadline=None)
def test_vector_conversion_preserves_norm(r, theta, phi, comps):
    p = m3.SphericalPoint(r, theta, phi)
    out = m3.spherical_vector_to_cartesian(p, comps)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(comps), rel=1e-13, abs=1e-13)
