"""Helical kinematics and the anisotropic coefficient geometry.

Rotation convention: ``rot(theta)`` is the clockwise rotation

    [[cos t,  sin t],
     [-sin t, cos t]]

and ``rot3(theta)`` extends it by the identity on the x3 axis.  All helix
formulas below are written for left-handed helices (pitch k > 0).
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class HelixSpec:
    """Physical parameters of a traveling-rotating helical filament.

    k is the pitch parameter, r_star the distance from the x3 axis, c the
    circulation, R_star the pipe radius and m the number of helices arranged
    with polygonal symmetry.
    """

    k: float = 1.0
    r_star: float = 0.5
    c: float = 1.0
    R_star: float = 1.0
    m: int = 1

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("pitch k must be positive")
        if not 0 < self.r_star < self.R_star:
            raise ValueError("need 0 < r_star < R_star")
        if not self.c > 0:
            raise ValueError("circulation c must be positive")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("helix count m must be an integer >= 1")

    @property
    def L(self) -> float:
        """sqrt(k^2 + r_star^2), the arclength per radian of the helix."""
        return math.hypot(self.k, self.r_star)

    @property
    def a1(self) -> float:
        return self.c * self.k / (4 * math.pi * (self.k**2 + self.r_star**2))

    @property
    def b1(self) -> float:
        return self.c * self.r_star**2 / (4 * math.pi * (self.k**2 + self.r_star**2))

    @property
    def curvature(self) -> float:
        return self.r_star / (self.k**2 + self.r_star**2)

    @property
    def torsion(self) -> float:
        return self.k / (self.k**2 + self.r_star**2)

    @property
    def angular_rate(self) -> float:
        """Angular rate of the planar point vortex, (a1 + b1/k)/L."""
        return (self.a1 + self.b1 / self.k) / self.L


def rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def rot3(theta: float) -> np.ndarray:
    out = np.eye(3)
    out[:2, :2] = rot(theta)
    return out


def kh_matrix(x, k: float) -> np.ndarray:
    """Helical coefficient matrix K_H at planar point(s) ``x``.

    Accepts a single point of shape (2,) or a stack (..., 2); returns
    (..., 2, 2).
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    d = k * k + x1 * x1 + x2 * x2
    out = np.empty(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = (k * k + x2 * x2) / d
    out[..., 0, 1] = -x1 * x2 / d
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = (k * k + x1 * x1) / d
    return out


def kh_entries(x1, x2, k: float):
    """Entries (K11, K12, K22) of K_H on arrays; used by the grid assembly."""
    d = k * k + x1 * x1 + x2 * x2
    return (k * k + x2 * x2) / d, -x1 * x2 / d, (k * k + x1 * x1) / d


@dataclass(frozen=True)
class CholeskyFactor:
    """T with T^{-1} T^{-T} = K at a point; both T and its inverse are kept."""

    T: np.ndarray
    T_inv: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.T, 2))

    @property
    def det_inv(self) -> float:
        """|det T^{-1}| = sqrt(det K)."""
        return float(abs(np.linalg.det(self.T_inv)))


def factor_from_inverse(T_inv) -> CholeskyFactor:
    T_inv = np.asarray(T_inv, dtype=float)
    return CholeskyFactor(T=np.linalg.inv(T_inv), T_inv=T_inv)


def cholesky_T(K) -> CholeskyFactor:
    """Factor an SPD matrix as K = T^{-1} T^{-T} (lower Cholesky for T^{-1})."""
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 2) or not np.allclose(K, K.T, rtol=0, atol=1e-14 * max(1.0, np.abs(K).max())):
        raise NotPositiveDefinite("matrix not positive definite")
    try:
        L = np.linalg.cholesky(0.5 * (K + K.T))
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix not positive definite") from None
    return factor_from_inverse(L)


def helical_T(x, k: float) -> CholeskyFactor:
    """Closed-form factor for K_H: T^{-1} = Rot(theta_x) diag(k/sqrt(k^2+|x|^2), 1).

    Rot(theta) here is the counter-clockwise rotation by the polar angle of x,
    so the stretched axis of T^{-1} is the radial direction.
    """
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    th = math.atan2(x[1], x[0])
    c, s = math.cos(th), math.sin(th)
    ccw = np.array([[c, -s], [s, c]])
    T_inv = ccw @ np.diag([k / math.sqrt(k * k + r2), 1.0])
    T = np.diag([math.sqrt(k * k + r2) / k, 1.0]) @ ccw.T
    return CholeskyFactor(T=T, T_inv=T_inv)


# ---------------------------------------------------------------- helix curve


def _phase(s, tau, spec: HelixSpec):
    return (-np.asarray(s) - spec.a1 * np.asarray(tau)) / spec.L


def helix_curve(s, tau, spec: HelixSpec) -> np.ndarray:
    """Arclength-parameterized traveling-rotating helix at rescaled time tau."""
    th = _phase(s, tau, spec)
    x3 = (spec.k * np.asarray(s) - spec.b1 * np.asarray(tau)) / spec.L
    return np.stack(np.broadcast_arrays(spec.r_star * np.cos(th), spec.r_star * np.sin(th), x3), axis=-1)


def helix_derivatives(s, tau, spec: HelixSpec):
    """Analytic (d_s gamma, d_ss gamma, d_tau gamma)."""
    L, r = spec.L, spec.r_star
    th = _phase(s, tau, spec)
    c, sn = np.cos(th), np.sin(th)
    zero = np.zeros_like(c)
    ds = np.stack([r * sn / L, -r * c / L, spec.k / L + zero], axis=-1)
    dss = np.stack([-r * c / L**2, -r * sn / L**2, zero], axis=-1)
    dtau = np.stack([r * spec.a1 * sn / L, -r * spec.a1 * c / L, -spec.b1 / L + zero], axis=-1)
    return ds, dss, dtau


def _fd4(f, x, h):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def _fd4_second(f, x, h):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def helix_derivatives_fd(s, tau, spec: HelixSpec, h: float | None = None, order: int = 4):
    """Finite-difference derivatives; 4th-order stencils by default, 2nd with order=2."""
    if h is None:
        h = 1e-4 * max(1.0, spec.r_star)
    fs = lambda v: helix_curve(v, tau, spec)
    ft = lambda v: helix_curve(s, v, spec)
    if order == 4:
        return _fd4(fs, s, h), _fd4_second(fs, s, h), _fd4(ft, tau, h)
    if order == 2:
        ds = (fs(s + h) - fs(s - h)) / (2 * h)
        dss = (fs(s + h) - 2 * fs(s) + fs(s - h)) / (h * h)
        dt = (ft(tau + h) - ft(tau - h)) / (2 * h)
        return ds, dss, dt
    raise ValueError("order must be 2 or 4")


def binormal_residual(s, tau, spec: HelixSpec, method: str = "analytic", h: float | None = None):
    """|d_tau gamma - (c/4pi) d_s gamma x d_ss gamma| at (s, tau)."""
    if method == "analytic":
        ds, dss, dt = helix_derivatives(s, tau, spec)
    elif method in ("fd", "fd4"):
        ds, dss, dt = helix_derivatives_fd(s, tau, spec, h, order=4)
    elif method == "fd2":
        ds, dss, dt = helix_derivatives_fd(s, tau, spec, h, order=2)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = dt - spec.c / (4 * math.pi) * np.cross(ds, dss)
    return np.linalg.norm(res, axis=-1)


def circle_curve(s, tau, r: float, c: float) -> np.ndarray:
    """Translating circular filament of radius r (vortex-ring limit)."""
    s = np.asarray(s, dtype=float)
    x3 = c / (4 * math.pi * r) * np.asarray(tau) + 0 * s
    return np.stack(np.broadcast_arrays(r * np.cos(s / r), r * np.sin(s / r), x3), axis=-1)


def circle_binormal_speed(r: float, c: float, h: float = 1e-4) -> float:
    """Binormal speed |d_tau gamma| of the circle, by 4th-order differences."""
    return float(np.linalg.norm(_fd4(lambda t: circle_curve(0.0, t, r, c), 0.0, h)))


def polygonal_centers(spec: HelixSpec) -> np.ndarray:
    base = np.array([spec.r_star, 0.0])
    return np.array([rot(2 * math.pi * i / spec.m) @ base for i in range(spec.m)])


def point_vortex_center(tau, spec: HelixSpec) -> np.ndarray:
    """Intersection of the helix with the x3 = 0 plane, rotating clockwise."""
    return rot(spec.angular_rate * tau) @ np.array([spec.r_star, 0.0])


def zeta_field(x, k: float) -> np.ndarray:
    """Tangent field (x2, -x1, k) of the helical symmetry lines."""
    x = np.asarray(x, dtype=float)
    return np.stack(np.broadcast_arrays(x[..., 1], -x[..., 0], k + 0 * x[..., 0]), axis=-1)


def helical_map(x, rho: float, k: float) -> np.ndarray:
    """Screw motion H_rho: clockwise rotation by rho plus translation k*rho along x3."""
    x = np.asarray(x, dtype=float)
    return x @ rot3(rho).T + np.array([0.0, 0.0, k * rho])


def alpha_beta_from(c: float, r_star: float, k: float):
    """Weight parameters (alpha, beta) making (r_star, 0) a strict minimum of
    q^2 sqrt(det K_H) with q = alpha |x|^2 / 2 + beta and circulation c."""
    if not (c > 0 and r_star > 0 and k > 0):
        raise ValueError("c, r_star, k must be positive")
    alpha = c / (4 * math.pi * k * math.sqrt(k * k + r_star * r_star))
    beta = alpha / 2 * (3 * r_star**2 + 4 * k * k)
    return alpha, beta
