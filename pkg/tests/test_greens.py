import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helical_vortex.geometry import factor_from_inverse, helical_T
from helical_vortex.greens import (DomainImage, IllConditionedBoundary, PointOutsideDomain, TooCloseToBoundary,
                                   choose_R, disc_regular_part, gbar, green_bounds, oracle_suite,
                                   regular_part_h, robin_g)

sys.path.insert(0, str(Path(__file__).parent / "oracles"))
from ellipse_mfs import mfs_regular_part  # noqa: E402

IDENT = factor_from_inverse(np.eye(2))


@pytest.fixture(scope="module")
def disc():
    return DomainImage(IDENT, 1.0, 2.0)


@pytest.fixture(scope="module")
def ellipse():
    c, s = math.cos(0.4), math.sin(0.4)
    T = np.diag([1 / 0.7, 1.0]) @ np.array([[c, s], [-s, c]])
    return DomainImage(factor_from_inverse(np.linalg.inv(T)), 1.0, 3.0), T


def test_disc_closed_form_special_values():
    x = np.array([[0.3, 0.2], [-0.5, 0.1]])
    np.testing.assert_allclose(disc_regular_part(x, np.zeros(2)), 0.0, atol=1e-16)
    np.testing.assert_allclose(disc_regular_part(x, np.zeros(2), a=2.0), -math.log(2) / (2 * math.pi))
    with pytest.raises(PointOutsideDomain, match="point outside domain"):
        disc_regular_part([1.0, 0.0], [0.1, 0.0])


def test_disc_closed_form_boundary_consistency():
    y = np.array([0.3, -0.4])
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    xb = (1 - 1e-13) * np.stack([np.cos(t), np.sin(t)], axis=1)
    h = disc_regular_part(xb, y)
    np.testing.assert_allclose(h, np.log(1 / np.linalg.norm(xb - y, axis=1)) / (2 * np.pi), atol=1e-10)


def test_bie_matches_disc_oracle(disc, rng):
    r = 0.95 * np.sqrt(rng.uniform(size=(100, 2)))
    th = rng.uniform(0, 2 * np.pi, size=(100, 2))
    X = np.stack([r[:, 0] * np.cos(th[:, 0]), r[:, 0] * np.sin(th[:, 0])], axis=1)
    Y = np.stack([r[:, 1] * np.cos(th[:, 1]), r[:, 1] * np.sin(th[:, 1])], axis=1)
    err = max(abs(regular_part_h(disc, x, y) - disc_regular_part(x, y)) for x, y in zip(X, Y))
    assert err < 1e-6


def test_bie_matches_mfs_on_ellipse(ellipse):
    dom, T = ellipse
    y = np.array([0.2, -0.1])
    x = np.array([[0.0, 0.0], [0.5, 0.3], [-0.6, 0.2]])
    ref, fit = mfs_regular_part(T, x, y)
    assert fit < 1e-12
    np.testing.assert_allclose(dom.regular_part(x, y), ref, atol=1e-10)
    np.testing.assert_allclose(dom.field(y)(x), ref, atol=1e-10)


def test_mesh_convergence_disc():
    # the trapezoidal Nystrom rule converges spectrally on the smooth boundary,
    # which more than meets the factor-4-per-doubling requirement
    x, y = np.array([[0.8, 0.1]]), np.array([0.85, -0.2])
    errs = []
    for n in (128, 256):
        d = DomainImage(IDENT, 1.0, 2.0, n_nodes=n)
        errs.append(abs(d.regular_part(x, y)[0] - disc_regular_part(x[0], y)))
    assert errs[1] <= errs[0] / 4 or errs[1] < 1e-14


def test_robin_and_gbar_on_unit_disc(disc):
    x = np.array([[0.1, 0.2], [-0.3, 0.4]])
    np.testing.assert_allclose(robin_g(disc, x, np.zeros(2)), math.log(2.0), atol=1e-12)
    # Gbar = 2 pi G = ln(1/|x - y|) - 2 pi h on the unit disc
    y = np.array([0.2, -0.3])
    expect = np.log(1 / np.linalg.norm(x - y, axis=1)) - 2 * np.pi * disc_regular_part(x, y)
    np.testing.assert_allclose(gbar(disc, x, y), expect, atol=1e-12)


def test_gradient_matches_finite_differences(ellipse):
    dom, _ = ellipse
    y = np.array([0.1, 0.3])
    x = np.array([[0.4, -0.2]])
    e = 1e-5
    fd = [(dom.regular_part(x + d, y) - dom.regular_part(x - d, y))[0] / (2 * e)
          for d in (np.array([e, 0]), np.array([0, e]))]
    np.testing.assert_allclose(dom.regular_part_grad(x, y)[0], fd, atol=1e-8)
    np.testing.assert_allclose(dom.field(y).gradient(x)[0], fd, atol=1e-8)


def test_errors(disc):
    with pytest.raises(PointOutsideDomain):
        disc.regular_part(np.zeros((1, 2)), np.array([1.2, 0.0]))
    with pytest.raises(TooCloseToBoundary, match="too close to boundary"):
        disc.regular_part(np.zeros((1, 2)), np.array([1 - 1e-4, 0.0]))
    with pytest.raises(TooCloseToBoundary):
        disc.evaluate(*disc.solve_density(np.zeros(disc.t.size)), np.array([[1 - 1e-5, 0.0]]))
    with pytest.raises(IllConditionedBoundary, match="ill-conditioned boundary"):
        DomainImage(factor_from_inverse(np.diag([1.0, 1e-8])), 1.0, 2.0)


def test_choose_R():
    fs = [helical_T(np.array([0.5, 0.0]), 1.0), IDENT]
    assert choose_R(fs, 1.0) == math.ceil(2 * math.sqrt(1.25))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 0.9), st.floats(0, 2 * np.pi), st.floats(0, 0.9), st.floats(0, 2 * np.pi))
def test_bounds_symmetry_positivity_on_helical_image(r1, t1, r2, t2):
    f = helical_T(np.array([0.5, 0.0]), 1.0)
    dom = _helical_domain()
    x = f.T @ (r1 * np.array([np.cos(t1), np.sin(t1)]))
    y = f.T @ (r2 * np.array([np.cos(t2), np.sin(t2)]))
    if np.linalg.norm(x - y) < 1e-6:
        return
    up, lo = green_bounds(dom, x, y)
    assert up <= 1e-8 and lo <= 1e-8
    gxy, gyx = gbar(dom, x, y), gbar(dom, y, x)
    assert abs(gxy - gyx) < 1e-6
    assert gxy >= 0


_CACHE = {}


def _helical_domain():
    if "d" not in _CACHE:
        f = helical_T(np.array([0.5, 0.0]), 1.0)
        _CACHE["d"] = DomainImage(f, 1.0, choose_R([f], 1.0))
    return _CACHE["d"]


def test_oracle_suite_summary():
    res = oracle_suite(anchors=[helical_T(np.array([0.5, 0.0]), 1.0)])
    assert res["disc_max_error"] < 1e-6
    assert res["bound_upper"] <= 1e-8 and res["bound_lower"] <= 1e-8
    assert res["symmetry"] < 1e-6 and res["gbar_min"] >= 0
