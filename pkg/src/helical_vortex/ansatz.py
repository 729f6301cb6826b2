"""Explicit multi-peak approximate solution V_{delta,Z}.

Each core j is the radial profile solution on B_R(0), pulled back through the
anchor factor T_j = T_{z_j} and translated to z_j.  The projection onto zero
boundary values subtracts (qhat_j / ln(R/s_j)) g_j(T_j x, T_j z_j) with
g = 2 pi h + ln R and h the regular part of the Green's function on T_j(Omega).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np

from .geometry import CholeskyFactor
from .greens import DomainImage, HarmonicField, choose_R
from .problem import Problem
from .profile import RadialProfile

MAX_FIXED_POINT = 200


class AnsatzError(RuntimeError):
    pass


def delta_from_eps(eps: float, p: float) -> float:
    if not eps < 1:
        raise ValueError("eps must be < 1")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return eps * abs(math.log(eps)) ** (-(p - 1) / 2)


def core_residual(s: float, delta: float, a: float, R: float, slope1: float, p: float) -> float:
    """Relative residual of delta^{2/(p-1)} s^{-2/(p-1)} phi'(1) = a / ln(s/R)."""
    lhs = (delta / s) ** (2 / (p - 1)) * slope1
    rhs = a / math.log(s / R)
    return abs(lhs - rhs) / abs(rhs)


def solve_s_delta(delta: float, a: float, R: float, slope1: float, p: float) -> float:
    """Core radius s from the matching condition, by fixed-point iteration."""
    if not (a > 0 and slope1 < 0 and delta > 0):
        raise ValueError("need a > 0, slope1 < 0, delta > 0")
    e = (p - 1) / 2
    s = delta * abs(math.log(delta)) ** e
    for _ in range(MAX_FIXED_POINT):
        if not 0 < s < R:
            break
        s_new = delta * (abs(slope1) * math.log(R / s) / a) ** e
        if abs(s_new - s) <= 4 * np.finfo(float).eps * s:
            s = s_new
            break
        s = s_new
    else:
        raise AnsatzError("delta too large for unique core radius")
    if not 0 < s < R or core_residual(s, delta, a, R, slope1, p) > 1e-12:
        raise AnsatzError("delta too large for unique core radius")
    return s


@dataclass(frozen=True)
class Cell:
    """One projected core PV_j."""

    z: np.ndarray
    factor: CholeskyFactor
    qhat: float
    s: float
    amp: float  # (delta/s)^{2/(p-1)}
    R: float
    h_field: HarmonicField = field(repr=False)

    def local_radius(self, x) -> np.ndarray:
        y = (np.asarray(x, dtype=float) - self.z) @ self.factor.T.T
        return np.sqrt(np.sum(y * y, axis=-1))

    def raw(self, x, profile: RadialProfile) -> np.ndarray:
        """Unprojected cell V_{delta, z, qhat, z}(x)."""
        rho = self.local_radius(x)
        inside = rho <= self.s
        out = np.empty_like(rho)
        out[inside] = self.qhat + self.amp * profile(rho[inside] / self.s)
        ro = np.maximum(rho[~inside], 1e-300)
        out[~inside] = self.qhat * np.log(ro / self.R) / math.log(self.s / self.R)
        return out

    def g(self, x) -> np.ndarray:
        """g(T x, T z) = 2 pi h + ln R."""
        tx = np.asarray(x, dtype=float) @ self.factor.T.T
        return 2 * math.pi * self.h_field(tx) + math.log(self.R)

    def projected(self, x, profile: RadialProfile) -> np.ndarray:
        return self.raw(x, profile) - self.qhat / math.log(self.R / self.s) * self.g(x)

    def raw_gradient(self, x, profile: RadialProfile) -> np.ndarray:
        y = (np.asarray(x, dtype=float) - self.z) @ self.factor.T.T
        rho = np.sqrt(np.sum(y * y, axis=-1))
        safe = np.maximum(rho, 1e-300)
        inside = rho <= self.s
        dr = np.where(inside, self.amp * profile.derivative(np.minimum(rho / self.s, 1.0)) / self.s,
                      self.qhat / (safe * math.log(self.s / self.R)))
        return (dr / safe)[..., None] * (y @ self.factor.T)

    def gradient(self, x, profile: RadialProfile) -> np.ndarray:
        """Gradient of the projected cell."""
        x = np.asarray(x, dtype=float)
        tx = x @ self.factor.T.T
        gg = 2 * math.pi * self.h_field.gradient(tx) @ self.factor.T
        return self.raw_gradient(x, profile) - self.qhat / math.log(self.R / self.s) * gg

    def gbar(self, x) -> np.ndarray:
        """Gbar(T x, T z) = ln(R / |T(x - z)|) - g."""
        return np.log(self.R / self.local_radius(x)) - self.g(x)


@dataclass(frozen=True)
class AnsatzConfig:
    eps: float
    delta: float
    p: float
    R: float
    Z: np.ndarray
    qhat: np.ndarray
    s: np.ndarray
    profile: RadialProfile = field(repr=False)
    cells: tuple = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.cells)

    def __call__(self, x) -> np.ndarray:
        return v_sum(x, self)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for c in self.cells:
            out += c.gradient(x, self.profile)
        return out

    def residuals(self) -> np.ndarray:
        return np.array([core_residual(c.s, self.delta, c.qhat, self.R, self.profile.slope1, self.p)
                         for c in self.cells])


def v_cell(x, delta: float, factor: CholeskyFactor, qhat: float, z, profile: RadialProfile, s: float,
           R: float) -> np.ndarray:
    """Unprojected core profile centred at z with anchor factor ``factor``."""
    p = profile.p
    x = np.asarray(x, dtype=float)
    y = (x - np.asarray(z, dtype=float)) @ factor.T.T
    rho = np.sqrt(np.sum(y * y, axis=-1))
    amp = (delta / s) ** (2 / (p - 1))
    with np.errstate(divide="ignore"):
        out = np.where(rho <= s, qhat + amp * profile(np.minimum(rho / s, 1.0)),
                       qhat * np.log(np.maximum(rho, 1e-300) / R) / math.log(s / R))
    return out if out.ndim else float(out)


def project_PV(x, cell: Cell, profile: RadialProfile) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = cell.projected(np.atleast_2d(x).reshape(-1, 2), profile).reshape(x.shape[:-1])
    return out if out.ndim else float(out)


def v_sum(x, config: AnsatzConfig) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    flat = np.atleast_2d(x).reshape(-1, 2)
    out = np.zeros(len(flat))
    for c in config.cells:
        out += c.projected(flat, config.profile)
    out = out.reshape(x.shape[:-1])
    return out if out.ndim else float(out)


def build_domains(problem: Problem, Z, R: float, n_nodes: int = 512):
    factors = [problem.factor(z) for z in Z]
    return factors, [DomainImage(f, problem.R_star, R, n_nodes) for f in factors]


def solve_qhat(Z, eps: float, R: float, factors, fields, q) -> np.ndarray:
    """Heights from the linear system coupling the cores through g and Gbar."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    m = len(Z)
    lnRe = math.log(R / eps)
    A = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            Tj = factors[j].T
            if i == j:
                gii = 2 * math.pi * float(fields[i](Tj @ Z[i])) + math.log(R)
                A[i, i] = 1 - gii / lnRe
            else:
                tzi, tzj = Tj @ Z[i], Tj @ Z[j]
                gij = 2 * math.pi * float(fields[j](tzi)) + math.log(R)
                A[i, j] = (math.log(R / np.linalg.norm(tzi - tzj)) - gij) / lnRe
    b = np.array([float(q(z)) for z in Z])
    if np.linalg.cond(A) > 1e12 or np.any(np.diag(A) <= 0):
        raise AnsatzError("q̂ system singular")
    return np.linalg.solve(A, b)


def assemble(problem: Problem, Z, eps: float, profile: RadialProfile, R: float | None = None,
             n_nodes: int = 512) -> AnsatzConfig:
    """Build V_{delta,Z}: anchors at z_j, heights from the linear system, then core radii."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    p = profile.p
    delta = delta_from_eps(eps, p)
    factors = [problem.factor(z) for z in Z]
    if R is None:
        R = choose_R(factors, problem.R_star)
    domains = [DomainImage(f, problem.R_star, R, n_nodes) for f in factors]
    fields = [d.field(f.T @ z) for d, f, z in zip(domains, factors, Z)]
    qhat = solve_qhat(Z, eps, R, factors, fields, problem.q)
    if np.any(qhat <= 0):
        raise AnsatzError("q̂ system singular")
    s = np.array([solve_s_delta(delta, a, R, profile.slope1, p) for a in qhat])
    cells = tuple(Cell(z=Z[j], factor=factors[j], qhat=float(qhat[j]), s=float(s[j]),
                       amp=(delta / s[j]) ** (2 / (p - 1)), R=R, h_field=fields[j]) for j in range(len(Z)))
    return AnsatzConfig(eps=eps, delta=delta, p=p, R=R, Z=Z, qhat=qhat, s=s, profile=profile, cells=cells)


# --------------------------------------------------------------- diagnostics


def admissible(problem: Problem, Z, rho_bar: float | None = None) -> bool:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    rb = problem.rho_bar if rho_bar is None else rho_bar
    return bool(np.all(np.linalg.norm(Z - np.atleast_2d(problem.seeds), axis=1) < rb))


def boundary_trace(config: AnsatzConfig, R_star: float, n: int = 720) -> float:
    """max |V_{delta,Z}| over boundary samples of the disc."""
    t = 2 * np.pi * np.arange(n) / n
    pts = R_star * np.stack([np.cos(t), np.sin(t)], axis=1)
    return float(np.max(np.abs(v_sum(pts, config))))


def _polar_samples(z, factor: CholeskyFactor, radii, n_theta: int):
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    y = radii[:, None, None] * np.stack([np.cos(th), np.sin(th)], axis=-1)[None]
    return z + y @ factor.T_inv.T  # (n_r, n_theta, 2)


def local_expansion_error(config: AnsatzConfig, problem: Problem, L: float = 5.0,
                          n_r: int = 80, n_theta: int = 64) -> float:
    """sup over B_{L s_i}(z_i) of |V - q - (V_i - qhat_i)|, maximised over cores."""
    worst = 0.0
    for c in config.cells:
        radii = np.linspace(0, L * c.s, n_r)
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        x = c.z + radii[:, None, None] * np.stack([np.cos(th), np.sin(th)], axis=-1)[None]
        x = x.reshape(-1, 2)
        x = x[np.sum(x * x, axis=1) < problem.R_star**2]
        err = v_sum(x, config) - problem.q(x) - (c.raw(x, config.profile) - c.qhat)
        worst = max(worst, float(np.max(np.abs(err))))
    return worst


def minimal_sign_L(config: AnsatzConfig, problem: Problem, n_r: int = 400, n_theta: int = 128,
                   r_max: float = 20.0, n_bulk: int = 401) -> float:
    """Smallest L for which V - q > 0 on the shrunk cores (1 - L lnln/ln) s_j
    and V - q < 0 off the inflated cores L s_j (radii in anchor coordinates)."""
    le = abs(math.log(config.eps))
    shrink = math.log(le) / le
    L = 1.0
    for c in config.cells:
        radii = np.linspace(0, r_max * c.s, n_r)
        x = _polar_samples(c.z, c.factor, radii, n_theta)
        inside = np.sum(x * x, axis=-1) < problem.R_star**2
        f = np.where(inside, v_sum(np.where(inside[..., None], x, 0.0).reshape(-1, 2), config).reshape(inside.shape)
                     - problem.q(x), -1.0)
        neg = np.any(f <= 0, axis=1)
        r_in = radii[np.argmax(neg)] if neg.any() else radii[-1]
        L = max(L, (1 - r_in / c.s) / shrink)
        pos = np.any(f > 0, axis=1)
        if pos.any():
            L = max(L, radii[np.nonzero(pos)[0][-1]] / c.s + (radii[1] - radii[0]) / c.s)
    # bulk check: no positive region away from every core
    g = np.linspace(-problem.R_star, problem.R_star, n_bulk)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    X = X[np.sum(X * X, axis=1) < problem.R_star**2]
    f = v_sum(X, config) - problem.q(X)
    pos = X[f > 0]
    if len(pos):
        rr = np.min(np.stack([c.local_radius(pos) / c.s for c in config.cells]), axis=0)
        L = max(L, float(rr.max()))
    return float(L)


def dump(config: AnsatzConfig, path) -> None:
    """Plain-text record of the ansatz parameters with 17 significant digits."""
    lines = [f"eps = {config.eps:.17g}", f"delta = {config.delta:.17g}", f"p = {config.p:.17g}",
             f"R = {config.R:.17g}", f"m = {config.m}"]
    for j, c in enumerate(config.cells):
        lines += [f"z{j + 1} = {c.z[0]:.17g}, {c.z[1]:.17g}", f"qhat{j + 1} = {c.qhat:.17g}",
                  f"s{j + 1} = {c.s:.17g}"]
    Path(path).write_text("\n".join(lines) + "\n")
