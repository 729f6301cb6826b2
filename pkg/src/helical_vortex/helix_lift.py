"""Lift a planar solution to the traveling-rotating helical Euler flow.

With u = |ln eps| w (w the solution of the delta-scaled problem) the stream
function is Phi = u, the planar vorticity is L_H Phi = eps^{-2}(u - q ln(1/eps))_+^p,
and the x3 = 0 slice of the flow rotates clockwise with angular velocity
alpha |ln eps|.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse.linalg as spla
from scipy import ndimage

from .geometry import HelixSpec, point_vortex_center, rot, zeta_field
from .solver import DiscGrid, _preconditioner, assemble_operator, plus_power


class InterpolationRangeError(ValueError):
    pass


def _gradient(field2d: np.ndarray, h: float):
    g1 = np.zeros_like(field2d)
    g2 = np.zeros_like(field2d)
    g1[1:-1, :] = (field2d[2:, :] - field2d[:-2, :]) / (2 * h)
    g2[:, 1:-1] = (field2d[:, 2:] - field2d[:, :-2]) / (2 * h)
    return g1, g2


def velocity_matrix_apply(x1, x2, d1, d2, k: float):
    """(v1, v2) = -(1/(k^2+|x|^2)) [[x1 x2, -k^2-x1^2], [k^2+x2^2, -x1 x2]] (d1, d2)."""
    den = k * k + x1 * x1 + x2 * x2
    v1 = -(x1 * x2 * d1 - (k * k + x1 * x1) * d2) / den
    v2 = -((k * k + x2 * x2) * d1 - x1 * x2 * d2) / den
    return v1, v2


def velocity_from_stream(stream, grid: DiscGrid, k: float):
    """Velocity on the interior nodes from a stream function given on them (zero outside)."""
    psi = grid.to_array(stream)
    d1, d2 = _gradient(psi, grid.h)
    pts = grid.points
    x1, x2 = pts[:, 0], pts[:, 1]
    v1, v2 = velocity_matrix_apply(x1, x2, d1[grid.mask], d2[grid.mask], k)
    v3 = (x1 * v2 - x2 * v1) / k
    return v1, v2, v3


def divergence_3d(v1, v2, v3, grid: DiscGrid, k: float, margin: int = 2):
    """div of the helical extension at x3 = 0, using d3 v3 = -(x2 d1 v3 - x1 d2 v3)/k.

    Returns values on interior nodes at least ``margin`` nodes from the mask edge."""
    h = grid.h
    a1, a2, a3 = (grid.to_array(v) for v in (v1, v2, v3))
    d11, _ = _gradient(a1, h)
    _, d22 = _gradient(a2, h)
    d31, d32 = _gradient(a3, h)
    X1, X2 = np.meshgrid(grid.x, grid.x, indexing="ij")
    div = d11 + d22 - (X2 * d31 - X1 * d32) / k
    keep = ndimage.binary_erosion(grid.mask, iterations=margin)
    return div[keep], keep


def helical_extension(v_plane, x, k: float):
    """v(x) = Qbar_{x3/k} v(H_{-x3/k} x) for a planar velocity callable v_plane(points) -> (N, 3)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty((len(x), 3))
    for i, pt in enumerate(x):
        rho = pt[2] / k
        base = rot(-rho) @ pt[:2]
        v = np.asarray(v_plane(base[None]))[0]
        out[i, :2] = rot(rho) @ v[:2]
        out[i, 2] = v[2]
    return out


def stream_from_w(W, grid: DiscGrid, entries, tol: float = 1e-12):
    """Solve L_H psi = W with psi = 0 on the boundary (CG with an AMG preconditioner)."""
    W = np.asarray(W, dtype=float)
    if not np.any(W):
        return np.zeros_like(W)
    A = assemble_operator(grid, entries, 1.0)
    psi, info = spla.cg(A, W, rtol=tol, atol=0.0, M=_preconditioner(A), maxiter=2000)
    if info != 0:
        raise RuntimeError(f"stream solve failed (info={info})")
    return psi


def vorticity_3d(w, x, k: float):
    """Vorticity vector (w/k) zeta(x)."""
    w = np.asarray(w, dtype=float)
    return (w / k)[..., None] * zeta_field(x, k)


def planar_vorticity(u, q_log, eps: float, p: float):
    """eps^{-2} (u - q ln(1/eps))_+^p."""
    return plus_power(np.asarray(u) - np.asarray(q_log), p) / eps**2


@dataclass
class HelicalFlowSlice:
    grid: DiscGrid
    stream: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    w: np.ndarray
    alpha_rot: float
    eps: float
    k: float
    _coeffs: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_solution(cls, w_delta, grid: DiscGrid, q, eps: float, p: float, k: float, alpha: float):
        le = abs(math.log(eps))
        u = le * np.asarray(w_delta)
        v1, v2, v3 = velocity_from_stream(u, grid, k)
        W = planar_vorticity(u, np.asarray(q) * le, eps, p)
        return cls(grid=grid, stream=u, v1=v1, v2=v2, v3=v3, w=W, alpha_rot=alpha * le, eps=eps, k=k)

    def orthogonality(self) -> float:
        """max |v . zeta| over nodes."""
        pts = self.grid.points
        return float(np.max(np.abs(pts[:, 1] * self.v1 - pts[:, 0] * self.v2 + self.k * self.v3)))

    def circulation(self) -> float:
        return float(self.grid.h**2 * np.sum(self.w))

    def flux_3d(self) -> float:
        """Flux of the vorticity vector through the x3 = 0 slice (normal e3)."""
        pts = np.column_stack([self.grid.points, np.zeros(self.grid.size)])
        return float(self.grid.h**2 * np.sum(vorticity_3d(self.w, pts, self.k)[:, 2]))


def rotating_vorticity(x, t: float, u_grid: np.ndarray, grid: DiscGrid, eps: float, alpha: float, beta: float,
                       p: float, coeffs: np.ndarray | None = None):
    """w_eps(x', 0, t) = eps^{-2}(u(Rbar_{-alpha|ln eps| t} x') - (alpha|x'|^2/2 + beta) ln(1/eps))_+^p.

    ``u_grid`` is the stream function on the full n x n array (zero outside the
    disc); values at rotated points come from cubic B-spline interpolation."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    le = abs(math.log(eps))
    y = x @ rot(-alpha * le * t).T
    if np.any(np.sum(y * y, axis=1) > grid.R_star**2 * (1 + 1e-12)):
        raise InterpolationRangeError("rotated point outside grid")
    if coeffs is None:
        coeffs = ndimage.spline_filter(u_grid, order=3, mode="mirror")
    idx = (y + grid.R_star) / grid.h
    u = ndimage.map_coordinates(coeffs, idx.T, order=3, prefilter=False, mode="mirror")
    q = alpha * np.sum(x * x, axis=1) / 2 + beta
    return plus_power(u - q * le, p) / eps**2


def _test_functions():
    return [
        ("one", lambda x: np.ones(len(x))),
        ("x1", lambda x: x[:, 0]),
        ("gauss", lambda x: np.exp(-np.sum((x - np.array([0.3, -0.2])) ** 2, axis=1))),
    ]


def concentration_metric(u_grid: np.ndarray, grid: DiscGrid, spec: HelixSpec, eps: float, alpha: float,
                         beta: float, p: float, taus=(0.0, 1.0, 2.0)):
    """Rows (tau, centroid, P(tau), distance, weak residuals) for the rotating slice.

    The centroid is weighted by the vorticity density; time is t = tau/|ln eps|."""
    le = abs(math.log(eps))
    coeffs = ndimage.spline_filter(u_grid, order=3, mode="mirror")
    pts = grid.points
    rows = []
    for tau in taus:
        W = rotating_vorticity(pts, tau / le, u_grid, grid, eps, alpha, beta, p, coeffs=coeffs)
        tot = W.sum()
        kappa = grid.h**2 * tot
        c = (W @ pts) / tot if tot > 0 else np.array([np.nan, np.nan])
        P = point_vortex_center(tau, spec)
        weak = [abs(grid.h**2 * float(W @ f(pts)) - kappa * float(f(P[None])[0])) for _, f in _test_functions()]
        rows.append(dict(tau=float(tau), centroid_x=float(c[0]), centroid_y=float(c[1]), P_x=float(P[0]),
                         P_y=float(P[1]), distance=float(np.linalg.norm(c - P)), weak_one=weak[0],
                         weak_x1=weak[1], weak_gauss=weak[2], kappa=float(kappa)))
    return rows


def recover_angular_velocity(u_grid, grid: DiscGrid, eps: float, alpha: float, beta: float, p: float,
                             t1: float = 0.0, t2: float | None = None) -> float:
    """Angular velocity from the centroid angles of the rotating slice at two times."""
    le = abs(math.log(eps))
    if t2 is None:
        t2 = 0.5 / (alpha * le)  # half a radian of rotation
    coeffs = ndimage.spline_filter(u_grid, order=3, mode="mirror")
    pts = grid.points
    ang = []
    for t in (t1, t2):
        W = rotating_vorticity(pts, t, u_grid, grid, eps, alpha, beta, p, coeffs=coeffs)
        c = (W @ pts) / W.sum()
        ang.append(math.atan2(c[1], c[0]))
    dtheta = (ang[0] - ang[1] + math.pi) % (2 * math.pi) - math.pi  # clockwise positive
    return dtheta / (t2 - t1)
