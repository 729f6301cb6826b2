"""Positive radial solution of -Lap(phi) = phi^p on the unit disc.

The profile is found by shooting on the center value: integrate

    phi'' + phi'/r = -phi_+^p,   phi(0) = a, phi'(0) = 0

outward and adjust ``a`` until phi(1) = 0.  By scaling, phi(1; a) changes sign
exactly once, so a bracketing root finder is enough.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

N_NODES = 4096
P_MIN, P_MAX = 1.0, 5.0


class BracketFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialProfile:
    p: float
    phi0: float
    slope1: float
    r: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    dsamples: np.ndarray = field(repr=False)
    interp: int = 3

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.r, self.samples, self.dsamples))

    def __call__(self, rho):
        """phi(rho) on [0, 1]; zero beyond the unit radius."""
        rho = np.asarray(rho, dtype=float)
        inside = rho <= 1.0
        out = np.zeros_like(rho)
        out[inside] = self._spline(rho[inside])
        return np.maximum(out, 0.0) if out.ndim else float(max(out, 0.0))

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        inside = rho <= 1.0
        out[inside] = self._spline(rho[inside], 1)
        return out


def _integrate(a: float, p: float, r_end: float = 1.0, dense: bool = False, rtol: float = 1e-12):
    # the series phi ~ a - a^p r^2/4 sidesteps the 1/r singularity at the origin
    r0 = min(1e-6, 1e-3 / (1.0 + a ** ((p - 1) / 2)))
    y0 = [a - a**p * r0 * r0 / 4, -(a**p) * r0 / 2]

    def rhs(r, y):
        return [y[1], -max(y[0], 0.0) ** p - y[1] / r]

    sol = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3 * max(1.0, a),
                    dense_output=dense)
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        raise FloatingPointError("integration failed")
    return sol


def _phi_at_one(a: float, p: float, rtol: float) -> float:
    return float(_integrate(a, p, rtol=rtol).y[0, -1])


def solve_profile(p: float = 2.0, tol: float = 1e-12, n_nodes: int = N_NODES,
                  bracket: tuple[float, float] | None = None) -> RadialProfile:
    """Shoot on phi(0) until phi(1) = 0 to within ``tol``."""
    if not P_MIN < p <= P_MAX:
        raise ValueError(f"exponent p must lie in ({P_MIN}, {P_MAX}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rtol = max(3e-14, min(1e-12, tol * 1e-2))
    lo, hi = bracket if bracket is not None else (1e-3, 10.0)
    f = lambda a: _phi_at_one(a, p, rtol)

    f_lo = f(lo)
    f_hi = None
    for _ in range(60):
        try:
            f_hi = f(hi)
        except FloatingPointError:
            hi = 0.5 * (lo + hi)  # stiff blow-up: shrink the trial center value
            continue
        if f_lo * f_hi <= 0 or bracket is not None:
            break
        lo, f_lo, hi = hi, f_hi, hi * 10.0
    if f_hi is None or f_lo * f_hi > 0:
        raise BracketFailure("bracket failure")
    a = brentq(f, lo, hi, xtol=tol * 1e-3, rtol=1e-15, maxiter=500)

    sol = _integrate(a, p, dense=True, rtol=rtol)
    r = np.linspace(0.0, 1.0, n_nodes)
    y = sol.sol(np.maximum(r, sol.t[0]))
    phi = y[0].copy()
    dphi = y[1].copy()
    phi[0], dphi[0] = a, 0.0
    phi[-1] = 0.0 if abs(phi[-1]) < tol else phi[-1]
    return RadialProfile(p=p, phi0=a, slope1=float(y[1, -1]), r=r, samples=phi, dsamples=dphi)


def radial_integral(values, r) -> float:
    """2 pi int_0^R f(r) r dr by composite Simpson on the tabulated mesh."""
    return 2 * math.pi * float(simpson(np.asarray(values) * r, x=r))


def pohozaev_check(profile: RadialProfile, r=None, samples=None):
    """Relative residuals of the two Pohozaev identities.

    Returns (res_pp1, res_p) for int phi^{p+1} = pi (p+1)/2 phi'(1)^2 and
    int phi^p = 2 pi |phi'(1)|.  Alternative ``r``/``samples`` override the
    profile's own table, which is how coarser or truncated meshes are probed.
    """
    r = profile.r if r is None else np.asarray(r)
    phi = profile.samples if samples is None else np.asarray(samples)
    p, s1 = profile.p, profile.slope1
    phi = np.maximum(phi, 0.0)
    rhs1 = math.pi * (p + 1) / 2 * s1 * s1
    rhs2 = 2 * math.pi * abs(s1)
    return (abs(radial_integral(phi ** (p + 1), r) - rhs1) / rhs1,
            abs(radial_integral(phi**p, r) - rhs2) / rhs2)


def global_w(x, profile: RadialProfile):
    """Entire C^1 solution of -Lap w = w_+^p: phi inside the unit disc, phi'(1) ln|x| outside."""
    x = np.asarray(x, dtype=float)
    rho = np.sqrt(np.sum(x * x, axis=-1))
    out = np.where(rho <= 1.0, profile(np.minimum(rho, 1.0)), profile.slope1 * np.log(np.maximum(rho, 1.0)))
    return out if out.ndim else float(out)


def save_profile(profile: RadialProfile, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# p={profile.p:.17g} phi0={profile.phi0:.17g} slope1={profile.slope1:.17g}\n")
        for r, v, d in zip(profile.r, profile.samples, profile.dsamples):
            fh.write(f"{r:.17g} {v:.17g} {d:.17g}\n")


def load_profile(path) -> RadialProfile:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().lstrip("#").split()
    meta = {k: float(v) for k, v in (item.split("=") for item in header)}
    table = np.loadtxt(path, comments="#")
    return RadialProfile(p=meta["p"], phi0=meta["phi0"], slope1=meta["slope1"],
                         r=table[:, 0], samples=table[:, 1], dsamples=table[:, 2])
