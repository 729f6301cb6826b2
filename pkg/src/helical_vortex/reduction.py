"""Reduced energy P_delta(Z) ~ I_delta(V_{delta,Z}) and its extremization.

The direct energy is integrated with a smooth partition of unity: around each
core a polar rule in the anchor coordinates y = T_j (x - z_j) (Gauss panels
on [0, s_j], geometrically graded panels outside), and a polar rule about the
disc centre for the smooth remainder.  Quadrature nodes move with Z, so the
computed landscape is smooth in Z; a Cartesian grid sum is not (sub-cell
shifts of the core show up as noise larger than the landscape variation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

from .ansatz import AnsatzConfig, assemble, delta_from_eps
from .geometry import HelixSpec, alpha_beta_from, rot
from .greens import choose_R
from .problem import Problem
from .profile import RadialProfile

__all__ = ["alpha_beta_from", "radial_landscape", "radial_extremum", "reduced_energy_direct",
           "reduced_energy_asymptotic", "optimize_Z", "Landscape", "energy_of_config"]


class NoInteriorExtremum(ValueError):
    pass


class ExtremumEscaped(RuntimeError):
    def __init__(self, msg, Z=None):
        super().__init__(msg)
        self.Z = Z


# ------------------------------------------------------------------ landscape


def radial_landscape(r, spec: HelixSpec, alpha: float, beta: float):
    """q^2 sqrt(det K_H) at radius r: (alpha r^2/2 + beta)^2 k / sqrt(k^2 + r^2)."""
    r = np.asarray(r, dtype=float)
    k = spec.k
    return (alpha * r * r / 2 + beta) ** 2 * k / np.sqrt(k * k + r * r)


def radial_landscape_derivative(r, spec: HelixSpec, alpha: float, beta: float):
    r = np.asarray(r, dtype=float)
    k = spec.k
    q = alpha * r * r / 2 + beta
    d2 = k * k + r * r
    return q * k * r / np.sqrt(d2) * (2 * alpha - q / d2)


def radial_extremum(spec: HelixSpec, alpha: float, beta: float, kind: str = "min", n_scan: int = 2001) -> float:
    """Interior extremum of the radial landscape on (0, R*).

    Golden-section search on a bracketing sign change of h', then a root
    polish of h' (the minimum is too flat for a comparison search alone to
    locate it beyond ~sqrt(machine eps))."""
    if not np.min(alpha * np.linspace(0, spec.R_star, 64) ** 2 / 2 + beta) > 0:
        raise ValueError("weight q must be positive on the disc")
    r = np.linspace(0, spec.R_star, n_scan)[1:-1]
    d = radial_landscape_derivative(r, spec, alpha, beta)
    want = (d[:-1] < 0) & (d[1:] >= 0) if kind == "min" else (d[:-1] > 0) & (d[1:] <= 0)
    idx = np.nonzero(want)[0]
    if len(idx) == 0:
        raise NoInteriorExtremum("no interior extremum")
    a, b = r[idx[0]], r[idx[0] + 1]
    a0, b0 = a, b
    sign = 1.0 if kind == "min" else -1.0
    f = lambda x: sign * float(radial_landscape(x, spec, alpha, beta))
    g = (math.sqrt(5) - 1) / 2
    c, e = b - g * (b - a), a + g * (b - a)
    for _ in range(200):
        if b - a < 1e-9 * max(1.0, abs(a)):
            break
        if f(c) < f(e):
            b, e = e, c
            c = b - g * (b - a)
        else:
            a, c = c, e
            e = a + g * (b - a)
    lo, hi = a - (b - a), b + (b - a)
    dl, dh = radial_landscape_derivative(lo, spec, alpha, beta), radial_landscape_derivative(hi, spec, alpha, beta)
    if not dl * dh < 0:
        # comparisons lost the minimum in roundoff; the scan bracket still holds
        lo, hi = a0, b0
    return brentq(lambda x: float(radial_landscape_derivative(x, spec, alpha, beta)), lo, hi,
                  xtol=1e-16, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class Landscape:
    seeds: np.ndarray
    kind: str
    rho_bar: float
    values: np.ndarray

    @classmethod
    def from_problem(cls, problem: Problem) -> "Landscape":
        seeds = np.atleast_2d(problem.seeds)
        rb = problem.rho_bar
        for i in range(len(seeds)):
            for j in range(i + 1, len(seeds)):
                if np.linalg.norm(seeds[i] - seeds[j]) <= 2 * rb:
                    raise ValueError("seeds not separated by 2 rho_bar")
        return cls(seeds=seeds, kind=problem.kind, rho_bar=rb, values=problem.landscape(seeds))


# ------------------------------------------------------------------- energies


def reduced_energy_asymptotic(problem: Problem, Z, eps: float, p: float, R: float | None = None) -> float:
    """sum_j pi delta^2 / ln(R/eps) q^2 sqrt(det K) at z_j."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if R is None:
        R = choose_R([problem.factor(z) for z in Z], problem.R_star)
    delta = delta_from_eps(eps, p)
    return float(sum(math.pi * delta**2 / math.log(R / eps) * problem.landscape(z) for z in Z))


@dataclass(frozen=True)
class Quadrature:
    n_theta_core: int = 96
    n_core: int = 24
    n_panel: int = 12
    grading: float = 2.0
    n_r_global: int = 160
    n_theta_global: int = 256


def _gauss(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _bump(t):
    """Smooth step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
        b = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


def _energy_density(x, config: AnsatzConfig, problem: Problem):
    V = config(x)
    G = config.gradient(x)
    K11, K12, K22 = problem.entries(x[:, 0], x[:, 1])
    quad = K11 * G[:, 0] ** 2 + 2 * K12 * G[:, 0] * G[:, 1] + K22 * G[:, 1] ** 2
    return 0.5 * config.delta**2 * quad - np.maximum(V - problem.q(x), 0.0) ** (config.p + 1) / (config.p + 1)


def energy_of_config(config: AnsatzConfig, problem: Problem, quad: Quadrature = Quadrature()) -> float:
    """I_delta(V_{delta,Z}) by partition-of-unity polar quadrature."""
    cells = config.cells
    # cutoff radii in anchor coordinates
    radii = []
    for j, c in enumerate(cells):
        lim = 0.9 * (problem.R_star - np.linalg.norm(c.z))
        for i, o in enumerate(cells):
            if i != j:
                lim = min(lim, 0.45 * np.linalg.norm(o.z - c.z))
        rho2 = lim / np.linalg.norm(c.factor.T_inv, 2)
        if rho2 < 4 * c.s:
            raise ValueError("core too large for the admissible geometry")
        radii.append((0.5 * rho2, rho2))

    def chi(x):
        out = np.zeros(len(x))
        for c, (r1, r2) in zip(cells, radii):
            out += _bump((c.local_radius(x) - r1) / (r2 - r1))
        return out

    total = 0.0
    th = 2 * np.pi * np.arange(quad.n_theta_core) / quad.n_theta_core
    dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    for c, (r1, r2) in zip(cells, radii):
        rs, ws = [], []
        for a, b in ((0.0, 0.5 * c.s), (0.5 * c.s, c.s)):
            x_, w_ = _gauss(a, b, quad.n_core)
            rs.append(x_); ws.append(w_)
        a = c.s
        while a < r2:
            b = min(a * quad.grading, r2)
            x_, w_ = _gauss(a, b, quad.n_panel)
            rs.append(x_); ws.append(w_)
            a = b
        r = np.concatenate(rs)
        w = np.concatenate(ws) * r * (2 * np.pi / quad.n_theta_core)
        y = r[:, None, None] * dirs[None]
        x = (c.z + y @ c.factor.T_inv.T).reshape(-1, 2)
        wt = np.repeat(w, quad.n_theta_core) * c.factor.det_inv
        cut = _bump((r - r1) / (r2 - r1))
        e = _energy_density(x, config, problem)
        total += float(np.sum(wt * np.repeat(cut, quad.n_theta_core) * e))
    # smooth remainder on the whole disc
    panels = 8
    rs, ws = [], []
    for k in range(panels):
        x_, w_ = _gauss(problem.R_star * k / panels, problem.R_star * (k + 1) / panels, quad.n_r_global // panels)
        rs.append(x_); ws.append(w_)
    r = np.concatenate(rs)
    w = np.concatenate(ws) * r * (2 * np.pi / quad.n_theta_global)
    thg = 2 * np.pi * (np.arange(quad.n_theta_global) + 0.5) / quad.n_theta_global
    x = (r[:, None, None] * np.stack([np.cos(thg), np.sin(thg)], axis=1)[None]).reshape(-1, 2)
    wt = np.repeat(w, quad.n_theta_global)
    rem = 1.0 - chi(x)
    keep = rem > 0
    total += float(np.sum(wt[keep] * rem[keep] * _energy_density(x[keep], config, problem)))
    return total


def reduced_energy_direct(problem: Problem, Z, eps: float, profile: RadialProfile, R: float | None = None,
                          quad: Quadrature = Quadrature()) -> float:
    """I_delta(V_{delta,Z}) for the ansatz centred at Z."""
    config = assemble(problem, Z, eps, profile, R=R)
    return energy_of_config(config, problem, quad)


# ------------------------------------------------------------------ optimizer


@dataclass
class OptimizeResult:
    Z: np.ndarray
    value: float
    evaluations: int
    final_step: float
    path: list = field(default_factory=list)


def _orbit(z1, m):
    return np.array([rot(2 * math.pi * i / m) @ z1 for i in range(m)])


def optimize_Z(problem: Problem, eps: float, profile: RadialProfile, landscape: Landscape | None = None,
               confine: bool = True, symmetric: bool | None = None, R: float | None = None,
               start=None, quad: Quadrature = Quadrature(), energy=None) -> OptimizeResult:
    """Coordinate pattern search on the direct reduced energy.

    Helical problems are searched along the seed ray when ``symmetric`` (the
    default), i.e. over the radius of z_1 with the remaining cores on its
    polygonal orbit; otherwise all 2m coordinates move.  Steps start at
    rho_bar/4, halve on failure and stop below rho_bar*1e-4.  Trial points
    outside the admissible balls (or outside 0.95 R* when not confined) are
    rejected; ending against the admissible boundary raises."""
    land = landscape or Landscape.from_problem(problem)
    seeds = land.seeds
    m = len(seeds)
    rb = land.rho_bar
    if symmetric is None:
        symmetric = problem.spec is not None
    if R is None:
        R = choose_R([problem.factor(z) for z in seeds], problem.R_star)
    sign = 1.0 if land.kind == "min" else -1.0
    if energy is None:
        energy = lambda Z: reduced_energy_direct(problem, Z, eps, profile, R=R, quad=quad)

    if symmetric:
        base = seeds[0]
        u = base / np.linalg.norm(base) if np.linalg.norm(base) > 0 else np.array([1.0, 0.0])
        to_Z = lambda v: _orbit(v[0] * u, m) if m > 1 else np.atleast_2d(v[0] * u)
        v = np.array([np.linalg.norm(base)]) if start is None else np.array([float(np.linalg.norm(np.atleast_2d(start)[0]))])
    else:
        to_Z = lambda v: v.reshape(m, 2)
        v = (seeds if start is None else np.atleast_2d(start)).astype(float).ravel().copy()

    def feasible(Z):
        if confine:
            return bool(np.all(np.linalg.norm(Z - seeds, axis=1) < rb))
        return bool(np.all(np.linalg.norm(Z, axis=1) < 0.95 * problem.R_star))

    evals = 0

    def f(vv):
        nonlocal evals
        evals += 1
        return sign * energy(to_Z(vv))

    step, min_step = rb / 4, rb * 1e-4
    best = f(v)
    path = [to_Z(v).copy()]
    blocked = False
    while step >= min_step:
        moved = False
        blocked = False
        for i in range(len(v)):
            for d in (1.0, -1.0):
                trial = v.copy()
                trial[i] += d * step
                Zt = to_Z(trial)
                if not feasible(Zt):
                    blocked = True
                    continue
                val = f(trial)
                if val < best:
                    v, best, moved = trial, val, True
                    path.append(Zt.copy())
                    break
            if moved:
                break
        if not moved:
            step /= 2
    Z = to_Z(v)
    if confine and blocked and np.any(np.linalg.norm(Z - seeds, axis=1) > rb - 4 * min_step):
        raise ExtremumEscaped("extremum escaped admissible set", Z=Z)
    return OptimizeResult(Z=Z, value=sign * best, evaluations=evals, final_step=step, path=path)
