import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helical_vortex.geometry import (HelixSpec, NotPositiveDefinite, alpha_beta_from, binormal_residual,
                                     cholesky_T, circle_binormal_speed, helical_map, helical_T, helix_curve,
                                     helix_derivatives, kh_entries, kh_matrix, point_vortex_center,
                                     polygonal_centers, rot, rot3, zeta_field)

pos = st.floats(0.05, 5.0)


def test_rot_is_clockwise():
    np.testing.assert_allclose(rot(math.pi / 2) @ [1.0, 0.0], [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(rot3(0.3)[2], [0, 0, 1])


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_rot_group(a, b):
    np.testing.assert_allclose(rot(a) @ rot(b), rot(a + b), atol=1e-12)
    np.testing.assert_allclose(rot(a) @ rot(a).T, np.eye(2), atol=1e-14)


@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), pos)
def test_kh_spd_and_kernel_of_zeta(x1, x2, k):
    K = kh_matrix([x1, x2], k)
    ev = np.linalg.eigvalsh(K)
    assert ev.min() > 0 and ev.max() <= 1 + 1e-14
    # det K_H = k^2 / (k^2 + |x|^2)
    assert math.isclose(np.linalg.det(K), k * k / (k * k + x1 * x1 + x2 * x2), rel_tol=1e-12)
    a, b, c = kh_entries(np.array(x1), np.array(x2), k)
    np.testing.assert_allclose([[a, b], [b, c]], K, atol=1e-15)


@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), pos)
def test_helical_factor(x1, x2, k):
    f = helical_T(np.array([x1, x2]), k)
    np.testing.assert_allclose(f.T_inv @ f.T_inv.T, kh_matrix([x1, x2], k), atol=1e-13)
    np.testing.assert_allclose(f.T @ f.T_inv, np.eye(2), atol=1e-13)


def test_cholesky_T_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite, match="not positive definite"):
        cholesky_T([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        cholesky_T([[1.0, 0.5], [0.0, 1.0]])
    f = cholesky_T([[2.0, 0.3], [0.3, 1.0]])
    np.testing.assert_allclose(f.T_inv @ f.T_inv.T, [[2.0, 0.3], [0.3, 1.0]], atol=1e-15)


def test_spec_validation():
    with pytest.raises(ValueError):
        HelixSpec(k=0)
    with pytest.raises(ValueError):
        HelixSpec(r_star=1.0)
    with pytest.raises(ValueError):
        HelixSpec(m=0)


def test_helix_is_unit_speed_and_on_cylinder(helix):
    s = np.linspace(0, 7, 50)
    ds, dss, dt = helix_derivatives(s, 0.7, helix)
    np.testing.assert_allclose(np.linalg.norm(ds, axis=1), 1.0, atol=1e-14)
    g = helix_curve(s, 0.7, helix)
    np.testing.assert_allclose(np.hypot(g[:, 0], g[:, 1]), helix.r_star, atol=1e-15)
    # curvature and torsion of a helix
    assert math.isclose(np.linalg.norm(dss[0]), helix.curvature, rel_tol=1e-12)


@settings(max_examples=40)
@given(pos, st.floats(0.05, 0.9), st.floats(0.1, 3.0), st.floats(-5, 5), st.floats(-5, 5))
def test_binormal_flow_residual(k, r, c, s, tau):
    spec = HelixSpec(k=k, r_star=r, c=c)
    assert binormal_residual(s, tau, spec) < 1e-12
    # the finite-difference stencils agree to their truncation order
    assert binormal_residual(s, tau, spec, method="fd") < 1e-7


def test_circle_speed_is_c_over_4pi_r():
    assert math.isclose(circle_binormal_speed(0.5, 1.0), 1.0 / (4 * math.pi * 0.5), rel_tol=1e-10)


def test_point_vortex_center_rotates_clockwise(helix):
    P = point_vortex_center(1.0, helix)
    assert P[1] < 0 and math.isclose(np.linalg.norm(P), helix.r_star, rel_tol=1e-14)
    # the planar centre follows the helix trace in the x3 = 0 plane
    alpha, _ = alpha_beta_from(helix.c, helix.r_star, helix.k)
    assert math.isclose(helix.angular_rate, alpha, rel_tol=1e-14)


def test_polygonal_centers():
    z = polygonal_centers(HelixSpec(m=3))
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), 0.5)
    np.testing.assert_allclose(z.sum(axis=0), 0.0, atol=1e-15)


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(-3, 3), pos, st.floats(-4, 4))
def test_zeta_is_generator_of_screw_motion(x1, x2, x3, k, rho):
    x = np.array([x1, x2, x3])
    eps = 1e-6
    d = (helical_map(x, rho + eps, k) - helical_map(x, rho - eps, k)) / (2 * eps)
    np.testing.assert_allclose(d, zeta_field(helical_map(x, rho, k), k), atol=1e-8)


@given(st.floats(0.01, 10), st.floats(0.01, 0.99), st.floats(0.01, 10))
def test_alpha_beta_identity(c, r, k):
    a, b = alpha_beta_from(c, r, k)
    assert math.isclose(k * math.pi * (a * r * r + 2 * b) / math.sqrt(k * k + r * r), c, rel_tol=1e-12)
    assert a > 0 and b > 0


def test_alpha_beta_rejects_nonpositive():
    with pytest.raises(ValueError):
        alpha_beta_from(-1, 0.5, 1)
