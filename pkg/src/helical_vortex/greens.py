"""Regular part of the Dirichlet Green's function on linear images of a disc.

For an anchor factor T the image T(B_{R*}) is an ellipse.  The regular part
h(., y) is the harmonic function with boundary values (1/2pi) ln(1/|x - y|).
It is computed with a single-layer potential

    u(x) = int_Gamma ln|x - b| sigma(b) ds_b + c0,   int_Gamma sigma ds = 0,

discretized by Nystrom with Kress' logarithmic product quadrature on the
trapezoidal boundary mesh.  The zero-mean constraint plus the free constant
keep the system uniquely solvable for every ellipse size.

``HarmonicField`` is a second evaluator of the same harmonic function, a
least-squares expansion in ellipse Faber polynomials.  It is meant for dense
sampling (millions of grid points, including points hugging the boundary);
by the maximum principle its interior error is bounded by its boundary fit
error, which is measured when the expansion is built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla

from .geometry import CholeskyFactor

TWO_PI = 2 * math.pi


class PointOutsideDomain(ValueError):
    pass


class TooCloseToBoundary(ValueError):
    pass


class IllConditionedBoundary(RuntimeError):
    pass


def disc_regular_part(x, y, a: float = 1.0):
    """Closed-form regular part on the disc of radius ``a`` (method of images)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.sum(x * x, axis=-1) >= a * a) or np.any(np.sum(y * y, axis=-1) >= a * a):
        raise PointOutsideDomain("point outside domain")
    ny2 = np.sum(y * y, axis=-1)
    small = ny2 < 1e-300
    safe = np.where(small, 1.0, ny2)
    ystar = a * a * y / safe[..., None]
    dist = np.sqrt(np.sum((x - ystar) ** 2, axis=-1))
    val = np.log(a / (np.sqrt(safe) * np.where(small, 1.0, dist))) / TWO_PI
    out = np.where(small, -math.log(a) / TWO_PI, val)
    return out if out.ndim else float(out)


def choose_R(factors, R_star: float) -> float:
    """Enclosing radius: twice the largest ||T|| R*, rounded up to an integer."""
    return float(math.ceil(2 * max(f.norm for f in factors) * R_star))


def _kress_weights(t, nodes: np.ndarray) -> np.ndarray:
    """Weights R_j(t) with int_0^{2pi} ln(4 sin^2((t-s)/2)) f(s) ds ~ sum R_j f(s_j)."""
    N = nodes.size
    n = N // 2
    d = np.subtract.outer(np.atleast_1d(t), nodes)
    m = np.arange(1, n)
    acc = np.zeros_like(d)
    for mm in m:
        acc += np.cos(mm * d) / mm
    return -(TWO_PI / n) * acc - (math.pi / n**2) * np.cos(n * d)


@dataclass
class DomainImage:
    """Ellipse T(B_{R*}) with a factored single-layer boundary system."""

    factor: CholeskyFactor
    R_star: float
    R: float
    n_nodes: int = 512
    t: np.ndarray = field(init=False, repr=False)
    boundary: np.ndarray = field(init=False, repr=False)
    speed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N = int(self.n_nodes)
        if N < 128 or N % 2:
            raise ValueError("n_nodes must be even and >= 128")
        T = self.factor.T
        self.t = TWO_PI * np.arange(N) / N
        circle = self.R_star * np.stack([np.cos(self.t), np.sin(self.t)], axis=1)
        self.boundary = circle @ T.T
        tangent = self.R_star * np.stack([-np.sin(self.t), np.cos(self.t)], axis=1) @ T.T
        self.speed = np.linalg.norm(tangent, axis=1)
        self.panel = float(self.speed.max() * TWO_PI / N)
        # ellipse frame: T disc = U diag(sv) disc
        U, sv, _ = np.linalg.svd(T)
        self.frame = U
        self.semi_axes = self.R_star * sv
        if sv[-1] / sv[0] < 1e-6:
            raise IllConditionedBoundary("ill-conditioned boundary")
        self._factor_system()

    def _factor_system(self):
        N = self.t.size
        diff = self.boundary[:, None, :] - self.boundary[None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        dt = np.subtract.outer(self.t, self.t)
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = np.log(dist) - 0.5 * np.log(4 * np.sin(dt / 2) ** 2)
        smooth[np.diag_indices(N)] = np.log(self.speed)
        kress = sla.circulant(_kress_weights(self.t[:1], self.t)[0]).T
        M = np.zeros((N + 1, N + 1))
        M[:N, :N] = 0.5 * kress + (TWO_PI / N) * smooth
        M[:N, N] = 1.0
        M[N, :N] = TWO_PI / N
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise IllConditionedBoundary("ill-conditioned boundary")
        self.condition = float(cond)
        self._lu = sla.lu_factor(M)

    # -- distances ---------------------------------------------------------
    def inside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x @ self.frame / self.semi_axes
        return np.sum(y * y, axis=-1) < 1.0

    def boundary_distance(self, x) -> np.ndarray:
        """Approximate distance to the ellipse (exact to O(panel^2))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = np.empty(len(x))
        for i0 in range(0, len(x), 4096):
            chunk = x[i0:i0 + 4096]
            dd = np.sqrt(np.sum((chunk[:, None, :] - self.boundary[None]) ** 2, axis=-1))
            j = np.argmin(dd, axis=1)
            # refine with the local chord through the nearest node's neighbours
            N = self.t.size
            a = self.boundary[(j - 1) % N]
            b = self.boundary[(j + 1) % N]
            ab = b - a
            s = np.clip(np.sum((chunk - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0, 1)
            proj = a + s[:, None] * ab
            d[i0:i0 + 4096] = np.minimum(dd[np.arange(len(j)), j], np.linalg.norm(chunk - proj, axis=1))
        return d

    # -- single layer ------------------------------------------------------
    def solve_density(self, data: np.ndarray):
        """Density (per unit parameter, times speed) and constant for boundary data."""
        N = self.t.size
        rhs = np.zeros(N + 1)
        rhs[:N] = data
        sol = sla.lu_solve(self._lu, rhs)
        return sol[:N], sol[N]

    def _upsampled(self, mu: np.ndarray, factor: int):
        if factor == 1:
            return self.boundary, mu
        N = mu.size
        M = N * factor
        spec = np.fft.rfft(mu)
        fine = np.fft.irfft(spec, n=M) * factor
        tt = TWO_PI * np.arange(M) / M
        pts = self.R_star * np.stack([np.cos(tt), np.sin(tt)], axis=1) @ self.factor.T.T
        return pts, fine

    def evaluate(self, mu, c0, x, grad: bool = False):
        """Single-layer potential at interior points; raises if a point is within one panel of the boundary."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(~self.inside(x)):
            raise PointOutsideDomain("point outside domain")
        dist = self.boundary_distance(x)
        if np.any(dist < self.panel):
            raise TooCloseToBoundary("too close to boundary")
        # refine the boundary quadrature for targets within a few panels
        need = np.ceil(np.log2(np.maximum(6 * self.panel / dist, 1.0))).astype(int)
        out = np.empty(len(x)) if not grad else np.empty((len(x), 2))
        for lev in np.unique(need):
            sel = need == lev
            pts, dens = self._upsampled(mu, 2 ** int(lev))
            w = TWO_PI / len(dens)
            xs = x[sel]
            diff = xs[:, None, :] - pts[None]
            r2 = np.sum(diff**2, axis=-1)
            if grad:
                out[sel] = w * np.einsum("ijk,j->ik", diff / r2[..., None], dens)
            else:
                out[sel] = 0.5 * w * (np.log(r2) @ dens) + c0
        return out

    def evaluate_on_boundary(self, mu, c0, t) -> np.ndarray:
        """Continuous single-layer trace at boundary parameters ``t`` (Kress product rule)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        N = self.t.size
        pts = self.R_star * np.stack([np.cos(t), np.sin(t)], axis=1) @ self.factor.T.T
        tang = self.R_star * np.stack([-np.sin(t), np.cos(t)], axis=1) @ self.factor.T.T
        dist = np.sqrt(np.sum((pts[:, None, :] - self.boundary[None]) ** 2, axis=-1))
        dt = np.subtract.outer(t, self.t)
        s4 = 4 * np.sin(dt / 2) ** 2
        coincide = s4 < 1e-28
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = np.where(coincide, np.log(np.linalg.norm(tang, axis=1))[:, None],
                              np.log(np.where(coincide, 1.0, dist)) - 0.5 * np.log(np.where(coincide, 1.0, s4)))
        K = 0.5 * _kress_weights(t, self.t) + (TWO_PI / N) * smooth
        return K @ mu + c0

    # -- Green's function pieces ------------------------------------------
    def regular_part(self, x, y):
        """h(x, y) for image-domain points x (array) and a single source y."""
        y = np.asarray(y, dtype=float)
        self._check_source(y)
        data = np.log(1.0 / np.linalg.norm(self.boundary - y, axis=1)) / TWO_PI
        mu, c0 = self.solve_density(data)
        return self.evaluate(mu, c0, x)

    def regular_part_grad(self, x, y):
        """Gradient of h(., y) with respect to its first argument."""
        y = np.asarray(y, dtype=float)
        self._check_source(y)
        data = np.log(1.0 / np.linalg.norm(self.boundary - y, axis=1)) / TWO_PI
        mu, c0 = self.solve_density(data)
        return self.evaluate(mu, c0, x, grad=True)

    def _check_source(self, y):
        if not self.inside(y[None])[0]:
            raise PointOutsideDomain("point outside domain")
        if self.boundary_distance(y[None])[0] < self.panel:
            raise TooCloseToBoundary("too close to boundary")

    def field(self, y, tol: float = 1e-12) -> "HarmonicField":
        """Dense evaluator of h(., y) valid up to the boundary."""
        y = np.asarray(y, dtype=float)
        self._check_source(y)
        return HarmonicField.fit(self, lambda b: np.log(1.0 / np.linalg.norm(b - y, axis=-1)) / TWO_PI, tol)


def regular_part_h(domain: DomainImage, x, y):
    """Regular part h(x, y) on the image domain (single-layer Nystrom)."""
    x = np.asarray(x, dtype=float)
    out = domain.regular_part(np.atleast_2d(x), y)
    return out if x.ndim > 1 else float(out[0])


def robin_g(domain: DomainImage, x, y):
    """g = 2 pi h + ln R."""
    return TWO_PI * regular_part_h(domain, x, y) + math.log(domain.R)


def gbar(domain: DomainImage, x, y):
    """Gbar = ln(R/|x - y|) - g = 2 pi G, the scaled Dirichlet Green's function."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x - np.asarray(y, dtype=float), axis=-1)
    return np.log(domain.R / r) - robin_g(domain, x, y)


@dataclass
class HarmonicField:
    """Harmonic function on the ellipse as a real combination of Faber polynomials."""

    frame: np.ndarray
    semi_axes: np.ndarray
    coef: np.ndarray
    fit_error: float

    @staticmethod
    def _basis(z: np.ndarray, A: float, B: float, degree: int) -> np.ndarray:
        rho2 = (A - B) / (A + B)
        w = 2 * z / (A + B)
        Q = np.empty((degree + 1,) + z.shape, dtype=complex)
        Q[0] = 1.0
        if degree >= 1:
            Q[1] = 0.5 * w
        for k in range(1, degree):
            Q[k + 1] = w * Q[k] - rho2 * Q[k - 1]
        return Q

    @classmethod
    def _design(cls, z, A, B, degree):
        Q = cls._basis(z, A, B, degree)
        cols = [Q[0].real]
        for k in range(1, degree + 1):
            cols.append(Q[k].real)
            cols.append(Q[k].imag)
        return np.stack(cols, axis=-1)

    @classmethod
    def fit(cls, domain: DomainImage, data_fn, tol: float = 1e-12, max_degree: int = 1024):
        A, B = domain.semi_axes
        frame = domain.frame
        degree = 16
        while True:
            n_fit = 4 * degree + 64
            tt = TWO_PI * (np.arange(n_fit) + 0.5) / n_fit
            pts = domain.R_star * np.stack([np.cos(tt), np.sin(tt)], axis=1) @ domain.factor.T.T
            loc = pts @ frame
            z = loc[:, 0] + 1j * loc[:, 1]
            Dm = cls._design(z, A, B, degree)
            data = data_fn(pts)
            coef, *_ = np.linalg.lstsq(Dm, data, rcond=None)
            # verify between the fit nodes
            tc = TWO_PI * np.arange(2 * n_fit) / (2 * n_fit)
            pc = domain.R_star * np.stack([np.cos(tc), np.sin(tc)], axis=1) @ domain.factor.T.T
            lc = pc @ frame
            err = np.max(np.abs(cls._design(lc[:, 0] + 1j * lc[:, 1], A, B, degree) @ coef - data_fn(pc)))
            scale = max(1.0, np.max(np.abs(data)))
            if err <= tol * scale or degree >= max_degree:
                return cls(frame=frame, semi_axes=np.array([A, B]), coef=coef, fit_error=float(err))
            degree *= 2

    def _accumulate(self, z, grad: bool):
        A, B = self.semi_axes
        degree = (len(self.coef) - 1) // 2
        rho2 = (A - B) / (A + B)
        w = 2 * z / (A + B)
        dw = 2 / (A + B)
        qm, q = np.ones_like(z), 0.5 * w
        dqm, dq = np.zeros_like(z), np.full_like(z, 0.5 * dw)
        acc = self.coef[0] * np.ones(z.shape)
        gacc = np.zeros_like(z)  # conj of complex gradient: d/dx - i d/dy
        for k in range(1, degree + 1):
            a, b = self.coef[2 * k - 1], self.coef[2 * k]
            if grad:
                # Re f -> f', Im f -> -i f' (as d/dx - i d/dy)
                gacc = gacc + a * dq - 1j * b * dq
            else:
                acc = acc + a * q.real + b * q.imag
            if grad:
                dqm, dq = dq, dw * q + w * dq - rho2 * dqm
            qm, q = q, w * q - rho2 * qm
        return gacc if grad else acc

    def gradient(self, x):
        """Gradient with respect to x, shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        shape = x.shape
        loc = x.reshape(-1, 2) @ self.frame
        z = loc[:, 0] + 1j * loc[:, 1]
        out = np.empty((len(z), 2))
        for i0 in range(0, len(z), 1 << 16):
            g = self._accumulate(z[i0:i0 + (1 << 16)], True)
            out[i0:i0 + (1 << 16), 0] = g.real
            out[i0:i0 + (1 << 16), 1] = -g.imag
        return (out @ self.frame.T).reshape(shape)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        loc = x.reshape(-1, 2) @ self.frame
        z = loc[:, 0] + 1j * loc[:, 1]
        A, B = self.semi_axes
        degree = (len(self.coef) - 1) // 2
        out = np.empty(len(z))
        rho2 = (A - B) / (A + B)
        for i0 in range(0, len(z), 1 << 16):
            zz = z[i0:i0 + (1 << 16)]
            w = 2 * zz / (A + B)
            qm, q = np.ones_like(zz), 0.5 * w
            acc = self.coef[0] * qm.real
            for k in range(1, degree + 1):
                acc = acc + self.coef[2 * k - 1] * q.real + self.coef[2 * k] * q.imag
                qm, q = q, w * q - rho2 * qm
            out[i0:i0 + (1 << 16)] = acc
        return out.reshape(shape)


# ---------------------------------------------------------------- validation


def green_bounds(domain: DomainImage, x, y):
    """Slack of the two-sided regular-part bounds at (x, y).

    Returns (upper, lower) with upper = h - (1/2pi) ln(1/max(|x-y|, d_x, d_y))
    and lower = (1/2pi) ln(1/(|x-y| + 2 max(d_x, d_y))) - h; both should be <= 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h = float(domain.regular_part(x[None], y)[0])
    r = float(np.linalg.norm(x - y))
    dx, dy = domain.boundary_distance(np.stack([x, y]))
    upper = h - math.log(1.0 / max(r, dx, dy)) / TWO_PI
    lower = math.log(1.0 / (r + 2 * max(dx, dy))) / TWO_PI - h
    return upper, lower


def _random_interior(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, TWO_PI, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


def oracle_suite(n_pairs: int = 100, seed: int = 0, R_star: float = 1.0, margin: float = 0.05,
                 n_nodes: int = 512, anchors=None) -> dict:
    """Disc closed-form comparison, two-sided bounds, symmetry and positivity.

    ``anchors`` are CholeskyFactors whose image ellipses receive the bound,
    symmetry and positivity checks in addition to the identity image."""
    from .geometry import factor_from_inverse

    rng = np.random.default_rng(seed)
    ident = factor_from_inverse(np.eye(2))
    disc = DomainImage(ident, R_star, choose_R([ident], R_star), n_nodes)
    X = _random_interior(rng, n_pairs, (1 - margin) * R_star)
    Y = _random_interior(rng, n_pairs, (1 - margin) * R_star)
    err = max(abs(float(disc.regular_part(x[None], y)[0]) - float(disc_regular_part(x, y, R_star)))
              for x, y in zip(X, Y))
    out = {"disc_max_error": err, "bound_upper": -math.inf, "bound_lower": -math.inf,
           "symmetry": 0.0, "gbar_min": math.inf}
    for f in [ident] + list(anchors or []):
        dom = disc if f is ident else DomainImage(f, R_star, choose_R([f], R_star), n_nodes)
        P = _random_interior(rng, n_pairs, (1 - margin) * R_star) @ f.T.T
        Q = _random_interior(rng, n_pairs, (1 - margin) * R_star) @ f.T.T
        for x, y in zip(P, Q):
            up, lo = green_bounds(dom, x, y)
            out["bound_upper"] = max(out["bound_upper"], up)
            out["bound_lower"] = max(out["bound_lower"], lo)
            gxy, gyx = gbar(dom, x, y), gbar(dom, y, x)
            out["symmetry"] = max(out["symmetry"], float(abs(gxy - gyx)))
            out["gbar_min"] = float(min(out["gbar_min"], gxy, gyx))
    return out
