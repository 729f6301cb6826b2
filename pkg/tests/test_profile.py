import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helical_vortex.profile import (global_w, load_profile, pohozaev_check, radial_integral, save_profile,
                                    solve_profile)

# phi(0) and phi'(1) from the independent 30-digit oracle tests/oracles/profile_mpmath.py
ORACLE = {1.5: (49.1502202096656775, -52.1540255381360931),
          2.0: (8.53411477119671663, -7.89707101310907006),
          3.0: (3.57390098192754715, -2.64512317334830184)}


@pytest.mark.parametrize("p", sorted(ORACLE))
def test_profile_matches_oracle(p):
    prof = solve_profile(p)
    a, s1 = ORACLE[p]
    assert math.isclose(prof.phi0, a, rel_tol=1e-10)
    assert math.isclose(prof.slope1, s1, rel_tol=1e-10)
    assert abs(prof(1.0)) < 1e-12


@pytest.mark.parametrize("p", sorted(ORACLE))
def test_pohozaev_identities(p):
    r1, r2 = pohozaev_check(solve_profile(p))
    assert r1 < 1e-6 and r2 < 1e-6


def test_profile_is_positive_decreasing(profile2):
    r = np.linspace(0, 0.999, 500)
    v = profile2(r)
    assert np.all(v > 0) and np.all(np.diff(v) < 0)
    assert profile2(1.5) == 0.0
    np.testing.assert_allclose(profile2.derivative(np.array([0.0])), 0.0, atol=1e-10)


def test_coarse_mesh_degrades_pohozaev(profile2):
    # the residuals measure quadrature, so a coarse sample must be visibly worse
    r = np.linspace(0, 1, 9)
    coarse = pohozaev_check(profile2, r=r, samples=profile2(r))
    assert max(coarse) > 1e-6 > max(pohozaev_check(profile2))


def test_radial_integral_of_one():
    r = np.linspace(0, 1, 101)
    assert math.isclose(radial_integral(np.ones_like(r), r), math.pi, rel_tol=1e-12)


def test_invalid_exponent():
    with pytest.raises(ValueError):
        solve_profile(1.0)
    with pytest.raises(ValueError):
        solve_profile(6.0)


def test_global_w_is_c1(profile2):
    x = np.array([[1 - 1e-7, 0.0], [1 + 1e-7, 0.0]])
    v = global_w(x, profile2)
    assert abs(v[0] - v[1]) < 1e-5
    assert math.isclose(global_w(np.array([math.e, 0.0]), profile2), profile2.slope1, rel_tol=1e-12)


def test_save_load_roundtrip(tmp_path, profile2):
    path = tmp_path / "phi.txt"
    save_profile(profile2, path)
    back = load_profile(path)
    assert back.phi0 == profile2.phi0 and back.slope1 == profile2.slope1
    r = np.linspace(0, 1, 37)
    np.testing.assert_array_equal(back(r), profile2(r))


@settings(max_examples=6, deadline=None)
@given(st.floats(1.2, 5.0))
def test_pohozaev_random_p(p):
    assert max(pohozaev_check(solve_profile(p))) < 1e-6
