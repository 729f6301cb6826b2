import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helical_vortex import ansatz as A
from helical_vortex import helix_lift as H
from helical_vortex import solver as S
from helical_vortex.geometry import helical_map, kh_entries, rot3


def psi_exact(P):
    return (1 - np.sum(P**2, axis=-1)) ** 2 * np.exp(P[..., 0] + 0.5 * P[..., 1])


def grad_psi_exact(P):
    r2 = np.sum(P**2, axis=-1)
    e = np.exp(P[..., 0] + 0.5 * P[..., 1])
    g1 = e * ((1 - r2) ** 2 - 4 * P[..., 0] * (1 - r2))
    g2 = e * (0.5 * (1 - r2) ** 2 - 4 * P[..., 1] * (1 - r2))
    return g1, g2


def planar_velocity(P, k=1.0):
    P = np.atleast_2d(P)
    d1, d2 = grad_psi_exact(P)
    v1, v2 = H.velocity_matrix_apply(P[:, 0], P[:, 1], d1, d2, k)
    v3 = (P[:, 0] * v2 - P[:, 1] * v1) / k
    return np.column_stack([v1, v2, v3])


def test_zero_stream_zero_velocity():
    g = S.DiscGrid(1.0, 65)
    v = H.velocity_from_stream(np.zeros(g.size), g, 1.0)
    assert all(np.all(c == 0) for c in v)


def test_orthogonality_and_v3_identity():
    g = S.DiscGrid(1.0, 129)
    P = g.points
    v1, v2, v3 = H.velocity_from_stream(psi_exact(P), g, 1.0)
    fl = H.HelicalFlowSlice(g, psi_exact(P), v1, v2, v3, w=np.zeros(g.size), alpha_rot=0.0, eps=0.1, k=1.0)
    assert fl.orthogonality() < 1e-14
    np.testing.assert_allclose(v3, (P[:, 0] * v2 - P[:, 1] * v1), atol=1e-14)


def test_discrete_divergence():
    # centred differences commute, so the discrete divergence vanishes up to roundoff
    for n in (65, 129, 257):
        g = S.DiscGrid(1.0, n)
        v = H.velocity_from_stream(psi_exact(g.points), g, 1.0)
        div, _ = H.divergence_3d(*v, g, 1.0)
        assert np.abs(div).max() < 1e-10


def test_divergence_3d_finite_difference_oracle(rng):
    pts = np.column_stack([rng.uniform(-0.5, 0.5, (6, 2)), rng.uniform(-1, 1, 6)])
    ext = lambda X: H.helical_extension(planar_velocity, X, 1.0)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        div = np.zeros(len(pts))
        for a in range(3):
            e = np.zeros(3)
            e[a] = h
            div += (ext(pts + e)[:, a] - ext(pts - e)[:, a]) / (2 * h)
        errs.append(np.abs(div).max())
    assert errs[2] < 1e-4
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5  # second order


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-3.0, 3.0))
def test_helical_invariance(x1, x2, rho):
    x = np.array([x1, x2, 0.0])
    lhs = H.helical_extension(planar_velocity, helical_map(x, rho, 1.0)[None], 1.0)[0]
    rhs = rot3(rho) @ planar_velocity(x[:2])[0]
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_stream_solve_trivial_and_poisson_oracle():
    g = S.DiscGrid(1.0, 65)
    ent = lambda a, b: kh_entries(a, b, 1.0)
    assert np.all(H.stream_from_w(np.zeros(g.size), g, ent) == 0)
    # for huge pitch K_H -> I, and -Lap psi = 4 has psi = 1 - |x|^2
    errs = []
    for n in (65, 129, 257):
        g = S.DiscGrid(1.0, n)
        psi = H.stream_from_w(4 * np.ones(g.size), g, lambda a, b: kh_entries(a, b, 1e8))
        errs.append(np.abs(psi - (1 - np.sum(g.points**2, 1))).max())
    assert errs[0] > errs[1] > errs[2] and errs[2] < 0.02


def test_vorticity_3d():
    x = np.array([[0.3, -0.4, 2.0]])
    np.testing.assert_allclose(H.vorticity_3d(np.array([2.0]), x, 2.0), [[-0.4, -0.3, 2.0]])
    assert np.all(H.vorticity_3d(np.zeros(1), x, 1.0) == 0)


@pytest.fixture(scope="module")
def origin_slice(hproblem, profile2):
    eps = 1e-2
    cfg = A.assemble(hproblem, np.array([[0.0, 0.0]]), eps, profile2)
    sol = S.solve(hproblem, cfg, 257)
    fl = H.HelicalFlowSlice.from_solution(sol.w, sol.grid, sol.q, eps, 2.0, 1.0, hproblem.alpha)
    return sol, fl


def test_slice_invariants(origin_slice, hproblem):
    sol, fl = origin_slice
    assert fl.orthogonality() < 1e-14
    kappa = sol.report.components[0].kappa
    assert math.isclose(fl.circulation(), kappa, rel_tol=1e-12)
    assert math.isclose(fl.flux_3d(), kappa, rel_tol=1e-12)
    assert math.isclose(fl.alpha_rot, hproblem.alpha * abs(math.log(1e-2)), rel_tol=1e-15)
    psi = H.stream_from_w(fl.w, sol.grid, hproblem.entries)
    assert np.abs(psi - fl.stream).max() < 1e-7 * np.abs(fl.stream).max()


def test_rotating_vorticity(origin_slice, hproblem, profile2):
    sol, fl = origin_slice
    g, eps, pr = sol.grid, 1e-2, hproblem
    ug = g.to_array(fl.stream)
    W0 = H.rotating_vorticity(g.points, 0.0, ug, g, eps, pr.alpha, pr.beta, 2.0)
    np.testing.assert_allclose(W0, fl.w, rtol=1e-9, atol=1e-9 * fl.w.max())
    # an off-centre field: the support rotates clockwise with the frame
    le = abs(math.log(eps))
    cfg = A.assemble(pr, pr.seeds, eps, profile2)
    ug2 = g.to_array(le * cfg(g.points))
    t = (math.pi / 2) / (pr.alpha * le)
    W = H.rotating_vorticity(g.points, t, ug2, g, eps, pr.alpha, pr.beta, 2.0)
    c = (W @ g.points) / W.sum()
    np.testing.assert_allclose(c, [0.0, -0.5], atol=3 * g.h)
    ints = [g.h**2 * H.rotating_vorticity(g.points, tt, ug2, g, eps, pr.alpha, pr.beta, 2.0).sum()
            for tt in (0.0, 0.3, 1.0)]
    assert (max(ints) - min(ints)) / ints[0] < 1e-3
    with pytest.raises(H.InterpolationRangeError, match="rotated point outside grid"):
        H.rotating_vorticity(np.array([[1.2, 0.0]]), 0.0, ug, g, eps, pr.alpha, pr.beta, 2.0)
    om = H.recover_angular_velocity(ug2, g, eps, pr.alpha, pr.beta, 2.0)
    assert abs(om / (pr.alpha * le) - 1) < 1e-2


def test_concentration_metric_rows(origin_slice, hproblem, helix):
    sol, fl = origin_slice
    rows = H.concentration_metric(sol.grid.to_array(fl.stream), sol.grid, helix, 1e-2, hproblem.alpha,
                                  hproblem.beta, 2.0)
    assert [r["tau"] for r in rows] == [0.0, 1.0, 2.0]
    for r in rows:
        assert r["weak_one"] < 1e-12 * r["kappa"]
        # the origin-centred core sits r_* away from the point vortex
        assert abs(r["distance"] - helix.r_star) < 1e-6
