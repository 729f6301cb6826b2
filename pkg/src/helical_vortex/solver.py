"""Masked-grid discretization of -delta^2 div(K grad w) = (w - q)_+^p on a disc.

The operator comes from the discrete energy

    E(w) = 1/2 sum_{x-edges} K11 (dw)^2 + 1/2 sum_{y-edges} K22 (dw)^2
           + sum_{cells} K12 (h Dx w)(h Dy w),

with K11/K22 at edge midpoints, K12 at cell centres and Dx, Dy the
cell-averaged one-sided differences.  A = Hessian(E) / h^2 is symmetric by
construction and reduces to the 5-point Laplacian for K = I.  Nodes outside
the open disc carry the Dirichlet value 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage
from scipy.spatial import ConvexHull

from .geometry import rot
from .problem import Problem


class ResolutionError(ValueError):
    def __init__(self, msg, suggested_n=None):
        super().__init__(msg)
        self.suggested_n = suggested_n


class NewtonStalled(RuntimeError):
    def __init__(self, msg, best=None, report=None):
        super().__init__(msg)
        self.best = best
        self.report = report


class NoVortexCore(RuntimeError):
    pass


@dataclass
class DiscGrid:
    R_star: float
    n: int
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)  # (n,) axis coordinates
    mask: np.ndarray = field(init=False, repr=False)  # (n, n) interior nodes
    index: np.ndarray = field(init=False, repr=False)  # (n, n) unknown index or -1

    def __post_init__(self):
        if self.n < 65 or self.n % 2 == 0:
            raise ValueError("grid n must be odd and >= 65")
        self.h = 2 * self.R_star / (self.n - 1)
        self.x = np.linspace(-self.R_star, self.R_star, self.n)
        X1, X2 = np.meshgrid(self.x, self.x, indexing="ij")
        self.mask = X1**2 + X2**2 < self.R_star**2 * (1 - 1e-12)
        self.index = np.full((self.n, self.n), -1, dtype=np.int64)
        self.index[self.mask] = np.arange(int(self.mask.sum()))

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def points(self) -> np.ndarray:
        X1, X2 = np.meshgrid(self.x, self.x, indexing="ij")
        return np.stack([X1[self.mask], X2[self.mask]], axis=1)

    def to_array(self, values, fill=0.0) -> np.ndarray:
        out = np.full((self.n, self.n), fill, dtype=float)
        out[self.mask] = values
        return out


def assemble_operator(grid: DiscGrid, entries, delta: float = 1.0) -> sp.csr_matrix:
    """delta^2 times the discrete -div(K grad .) on the interior unknowns."""
    n, h, x, idx = grid.n, grid.h, grid.x, grid.index
    rows, cols, vals = [], [], []

    def add(a, b, c):
        # Hessian of 1/2 c (w_a - w_b)^2
        for u, v, s in ((a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)):
            ok = (u >= 0) & (v >= 0)
            rows.append(u[ok]); cols.append(v[ok]); vals.append(s * c[ok])

    xm = x[:-1] + h / 2
    # x-edges (i,j)-(i+1,j)
    A1, A2 = np.meshgrid(xm, x, indexing="ij")
    K11, _, _ = entries(A1, A2)
    add(idx[:-1, :].ravel(), idx[1:, :].ravel(), K11.ravel())
    # y-edges (i,j)-(i,j+1)
    B1, B2 = np.meshgrid(x, xm, indexing="ij")
    _, _, K22 = entries(B1, B2)
    add(idx[:, :-1].ravel(), idx[:, 1:].ravel(), K22.ravel())
    # cells: K12 (a.w)(b.w) with a = 1/2(-1, 1, -1, 1), b = 1/2(-1, -1, 1, 1) on (00, 10, 01, 11)
    C1, C2 = np.meshgrid(xm, xm, indexing="ij")
    _, K12, _ = entries(C1, C2)
    K12 = K12.ravel()
    corners = [idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()]
    a = np.array([-0.5, 0.5, -0.5, 0.5])
    b = np.array([-0.5, -0.5, 0.5, 0.5])
    H = np.outer(a, b) + np.outer(b, a)
    if np.any(K12 != 0):
        for r in range(4):
            for c in range(4):
                if H[r, c] == 0:
                    continue
                u, v = corners[r], corners[c]
                ok = (u >= 0) & (v >= 0) & (K12 != 0)
                rows.append(u[ok]); cols.append(v[ok]); vals.append(H[r, c] * K12[ok])
    N = grid.size
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)).tocsr()
    A.sum_duplicates()
    return (delta**2 / h**2) * A


def plus_power(v, p):
    return np.maximum(v, 0.0) ** p


@dataclass
class Component:
    center: np.ndarray  # area centroid of {w > q}
    weighted_center: np.ndarray  # (w - q)_+^p weighted centroid
    diameter: float
    kappa: float
    n_nodes: int


@dataclass
class SolveReport:
    iterations: int = 0
    residual: float = math.inf
    converged: bool = False
    history: list = field(default_factory=list)
    linear_iterations: list = field(default_factory=list)
    omega_inf: float = math.nan
    components: list = field(default_factory=list)
    energy: float = math.nan
    min_w: float = math.nan
    seconds: float = 0.0
    relocated: bool = False
    Z: np.ndarray = None
    path: list = field(default_factory=list)

    def as_text(self) -> str:
        lines = [f"iterations = {self.iterations}", f"residual = {self.residual:.17g}",
                 f"converged = {self.converged}", f"omega_inf = {self.omega_inf:.17g}",
                 f"energy = {self.energy:.17g}", f"min_w = {self.min_w:.17g}",
                 f"seconds = {self.seconds:.3f}", f"relocated = {self.relocated}",
                 f"components = {len(self.components)}"]
        if self.Z is not None:
            lines.append("Z = " + "; ".join(f"{z[0]:.17g} {z[1]:.17g}" for z in np.atleast_2d(self.Z)))
        for i, c in enumerate(self.components):
            lines.append(f"component{i + 1} = center {c.center[0]:.17g} {c.center[1]:.17g}; "
                         f"weighted {c.weighted_center[0]:.17g} {c.weighted_center[1]:.17g}; "
                         f"diameter {c.diameter:.17g}; kappa {c.kappa:.17g}; nodes {c.n_nodes}")
        lines.append("history = " + " ".join(f"{r:.3e}" for r in self.history))
        return "\n".join(lines) + "\n"


def residual(A, w, q, p):
    return A @ w - plus_power(w - q, p)


def _linear_solve(J, rhs, M, rtol, maxiter=400):
    its = [0]

    def cb(_):
        its[0] += 1

    x, info = spla.gmres(J, rhs, M=M, rtol=rtol, atol=0.0, restart=60, maxiter=maxiter,
                         callback=cb, callback_type="pr_norm")
    return x, its[0]


def _preconditioner(A):
    try:
        import pyamg
    except ImportError:  # pragma: no cover - pyamg is a declared dependency
        lu = spla.splu(A.tocsc())
        return spla.LinearOperator(A.shape, lu.solve)
    # pyamg draws random vectors from the global numpy state (spectral radius
    # estimates); pin it so the setup, and hence every solve, is reproducible
    state = np.random.get_state()
    np.random.seed(0)
    try:
        ml = pyamg.smoothed_aggregation_solver(A.tocsr(), symmetry="symmetric", max_coarse=500)
    finally:
        np.random.set_state(state)
    return ml.aspreconditioner(cycle="V")


def newton_solve(A, q, p: float, w0, tol: float = 1e-10, max_iter: int = 30, M=None,
                 verbose: bool = False):
    """Semismooth Newton on F(w) = A w - (w - q)_+^p from the initial guess w0."""
    t0 = time.time()
    w = np.array(w0, dtype=float)
    F = residual(A, w, q, p)
    r = float(np.max(np.abs(F)))
    rep = SolveReport(history=[r])
    if M is None:
        M = _preconditioner(A)
    best = (r, w.copy())
    r_start = r
    for it in range(1, max_iter + 1):
        if r < tol:
            break
        d = np.maximum(w - q, 0.0)
        J = A - sp.diags(p * d ** (p - 1))
        lin_tol = min(1e-2, max(1e-12, 1e-2 * r)) if r > 1e3 * tol else 1e-6
        step, nits = _linear_solve(J, -F, M, rtol=lin_tol)
        rep.linear_iterations.append(nits)
        lam = 1.0
        accepted = False
        while lam >= 1.0 / 1024:
            wt = w + lam * step
            Ft = residual(A, wt, q, p)
            rt = float(np.max(np.abs(Ft)))
            if rt < (1 - 1e-4 * lam) * r or rt < tol:
                accepted = True
                break
            lam /= 2
        if not accepted:
            rep.iterations = it
            rep.residual = best[0]
            rep.seconds = time.time() - t0
            raise NewtonStalled("Newton stalled", best=best[1], report=rep)
        w, F, r = wt, Ft, rt
        rep.history.append(r)
        if verbose:
            print(f"newton {it}: residual {r:.3e} step {lam:g} gmres {nits}", flush=True)
        if r < best[0]:
            best = (r, w.copy())
        if r > 10 * r_start:
            raise NewtonStalled("diverged; ε likely too large", best=best[1], report=rep)
        rep.iterations = it
    rep.residual = r
    rep.converged = r < tol
    rep.seconds = time.time() - t0
    if not rep.converged:
        raise NewtonStalled("Newton stalled", best=best[1], report=rep)
    return w, rep


# ---------------------------------------------------------------- diagnostics


def energy_I(w, A_unscaled_or_scaled, q, p: float, h: float) -> float:
    """1/2 int K grad w . grad w - 1/(p+1) int (w - q)_+^{p+1}, with A already carrying delta^2."""
    w = np.asarray(w, dtype=float)
    grad = 0.5 * h * h * float(w @ (A_unscaled_or_scaled @ w))
    return grad - h * h / (p + 1) * float(np.sum(plus_power(w - q, p + 1)))


def _diameter(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            pass
    d = pts[:, None, :] - pts[None]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def vortex_set(w, q, grid: DiscGrid, eps: float | None = None, p: float = 2.0):
    """Connected components of {w > q} with centroids, diameters and circulations."""
    pos = grid.to_array(np.asarray(w) - np.asarray(q), fill=-1.0) > 0
    labels, nlab = ndimage.label(pos, structure=np.ones((3, 3)))
    if nlab == 0:
        raise NoVortexCore("no vortex core (ε too large or solve failed)")
    X1, X2 = np.meshgrid(grid.x, grid.x, indexing="ij")
    dens = grid.to_array(plus_power(np.asarray(w) - np.asarray(q), p))
    scale = 1.0 if eps is None else abs(math.log(eps)) ** p / eps**2
    comps = []
    for lab in range(1, nlab + 1):
        sel = labels == lab
        pts = np.stack([X1[sel], X2[sel]], axis=1)
        wt = dens[sel]
        tot = wt.sum()
        wc = (wt @ pts) / tot if tot > 0 else pts.mean(axis=0)
        comps.append(Component(center=pts.mean(axis=0), weighted_center=wc, diameter=_diameter(pts),
                               kappa=float(scale * grid.h**2 * tot), n_nodes=int(sel.sum())))
    comps.sort(key=lambda c: -c.kappa)
    return comps


def circulation(w, q, grid: DiscGrid, eps: float, p: float):
    """kappa_i = |ln eps|^p / eps^2 * int_{component i} (w - q)_+^p."""
    return [c.kappa for c in vortex_set(w, q, grid, eps, p)]


def check_resolution(grid: DiscGrid, s: float, T_norm: float, cells: int = 8) -> None:
    """Require >= ``cells`` grid cells across the predicted core diameter 2 s / ||T||."""
    width = 2 * s / T_norm
    if width / grid.h < cells:
        need = int(math.ceil(2 * grid.R_star * cells / width)) + 1
        need += (need + 1) % 2
        raise ResolutionError(f"core unresolved: {width / grid.h:.1f} cells across core; use n >= {need}",
                              suggested_n=need)


def translation_modes(config, pts) -> np.ndarray:
    """Columns d V_j / d z_{j,h} of the unprojected cores (supported on the cores)."""
    cols = []
    for cell in config.cells:
        y = (pts - cell.z) @ cell.factor.T.T
        rho = np.sqrt(np.sum(y * y, axis=1))
        inside = rho <= cell.s
        fp = np.where(inside, cell.amp * config.profile.derivative(np.minimum(rho / cell.s, 1.0)) / cell.s, 0.0)
        g = (y / np.maximum(rho, 1e-300)[:, None]) @ cell.factor.T
        cols += [-fp * g[:, 0], -fp * g[:, 1]]
    return np.array(cols).T


def _bordered_factory(A, N, k, M):
    """Solver for [[J, -Yh], [Y^T, 0]]: sparse LU for moderate sizes, GMRES otherwise."""
    def solve_bordered(d, Yh, Y, rhs, p):
        J = A - sp.diags(p * d ** (p - 1))
        if N <= 400_000:
            B = sp.bmat([[J, -sp.csr_matrix(Yh)], [sp.csr_matrix(Y.T), None]]).tocsc()
            return spla.splu(B).solve(rhs), 1
        op = spla.LinearOperator((N + k, N + k), matvec=lambda v: np.concatenate(
            [J @ v[:N] - Yh @ v[N:], Y.T @ v[:N]]))
        prec = spla.LinearOperator((N + k, N + k), matvec=lambda v: np.concatenate([M @ v[:N], v[N:]]))
        return _linear_solve(op, rhs, prec, rtol=1e-10, maxiter=2000)
    return solve_bordered


def _projected_newton(A, q, p, V, Y, om, solve_bordered, tol, max_iter=40):
    """Solve F(V + om) = Yh c, Y^T om = 0 for (om, c); returns (om, c, iterations)."""
    N, k = Y.shape
    c = np.zeros(k)

    def res(om, c):
        w = V + om
        d = np.maximum(w - q, 0.0)
        Yh = (p * d[:, None] ** (p - 1)) * Y
        return residual(A, w, q, p) - Yh @ c, Y.T @ om, d, Yh

    F, G, d, Yh = res(om, c)
    its = 0
    for its in range(1, max_iter + 1):
        r = float(np.max(np.abs(F)))
        if r < tol and np.max(np.abs(G)) < 1e-12:
            break
        st, _ = solve_bordered(d, Yh, Y, -np.concatenate([F, G]), p)
        lam = 1.0
        while True:
            om2, c2 = om + lam * st[:N], c + lam * st[N:]
            F2, G2, d2, Yh2 = res(om2, c2)
            if float(np.max(np.abs(F2))) < (1 - 1e-4 * lam) * r or lam < 1.0 / 1024:
                break
            lam /= 2
        om, c, F, G, d, Yh = om2, c2, F2, G2, d2, Yh2
    return om, c, its


def relocate(problem, profile, eps: float, Z0, grid: DiscGrid, A, q, tol: float = 1e-10, R: float | None = None,
             max_outer: int = 25, verbose: bool = False):
    """Move the cores to a zero of the translation multipliers c(Z).

    At fixed Z the projected problem F(V_Z + om) = sum c_h Yh_h, om _|_ Y is
    solved by bordered Newton; the outer loop is a Broyden-updated Newton
    iteration on c(Z) seeded with a finite-difference Jacobian.  The
    translation direction is thereby handled through the ansatz family
    instead of the nearly singular Jacobian."""
    from .ansatz import assemble

    pts = grid.points
    Z = np.atleast_2d(np.asarray(Z0, dtype=float)).copy()
    m = len(Z)
    M = _preconditioner(A) if grid.size > 400_000 else None
    solver = _bordered_factory(A, grid.size, 2 * m, M)
    total = 0
    # helical polygonal runs move z_1 only, with the other cores on its orbit
    orbit = problem.spec is not None and m > 1
    if orbit:
        to_Z = lambda v: np.array([rot(2 * math.pi * j / m) @ v for j in range(m)])
        v = Z[0].copy()
    else:
        to_Z = lambda v: v.reshape(m, 2)
        v = Z.ravel().copy()
    Z = to_Z(v)
    reduced = (lambda c: c[:2]) if orbit else (lambda c: c)

    def cvec(vv, om=None):
        nonlocal total
        cfg = assemble(problem, to_Z(vv), eps, profile, R=R)
        V = cfg(pts)
        Y = translation_modes(cfg, pts)
        om = np.zeros(len(V)) if om is None else om
        om, c, its = _projected_newton(A, q, profile.p, V, Y, om, solver, tol * 1e-2)
        total += its
        return c, om, V, Y

    c, om, V, Y = cvec(v)
    scale = max(1e-3 * min(cell.s for cell in assemble(problem, Z, eps, profile, R=R).cells), 1e-6)
    k = len(v)
    Jc = np.zeros((k, k))
    for j in range(k):
        dv = np.zeros(k)
        dv[j] = scale
        cj, _, _, _ = cvec(v + dv, om)
        Jc[:, j] = (reduced(cj) - reduced(c)) / scale
    path = [Z.copy()]
    for outer in range(max_outer):
        Yh = (profile.p * np.maximum(V + om - q, 0.0)[:, None] ** (profile.p - 1)) * Y
        if verbose:
            print(f"relocate {outer}: Z={Z.ravel()} |c|={np.abs(c).max():.3e}", flush=True)
        if np.max(np.abs(Yh @ c)) < tol:
            break
        step = -np.linalg.lstsq(Jc, reduced(c), rcond=1e-10)[0]
        lim = 0.1 * problem.R_star
        if np.linalg.norm(step) > lim:
            step *= lim / np.linalg.norm(step)
        vn = v + step
        over = np.linalg.norm(to_Z(vn), axis=1).max() / (0.9 * problem.R_star)
        if over > 1:
            vn = v + step / over
            step = vn - v
        cn, om, V, Y = cvec(vn, om)
        yv = reduced(cn) - reduced(c)
        if np.dot(step, step) > 0:
            Jc += np.outer(yv - Jc @ step, step) / np.dot(step, step)
        v, c = vn, cn
        Z = to_Z(v)
        path.append(Z.copy())
    return Z, V + om, total, path


@dataclass
class Solution:
    grid: DiscGrid
    w: np.ndarray
    q: np.ndarray
    V: np.ndarray
    report: SolveReport
    eps: float
    p: float


def solve(problem: Problem, config, n: int, tol: float = 1e-10, max_iter: int = 30, verbose: bool = False,
          w0=None, relocate_on_stall: bool = False, max_outer: int = 25) -> Solution:
    """Newton solve seeded by the ansatz ``config`` (an AnsatzConfig) on an n x n grid.

    With ``relocate_on_stall`` a stalled Newton run is restarted through
    :func:`relocate`, which moves the core centres to where the projected
    multipliers vanish, and then polished by plain Newton.  The reported
    correction norm is measured against the ansatz at the final centres."""
    grid = DiscGrid(problem.R_star, n)
    for c in config.cells:
        check_resolution(grid, c.s, c.factor.norm)
    pts = grid.points
    A = assemble_operator(grid, problem.entries, config.delta)
    q = problem.q(pts)
    V = config(pts)
    start = V if w0 is None else w0
    M = _preconditioner(A)
    try:
        w, rep = newton_solve(A, q, config.p, start, tol=tol, max_iter=max_iter, verbose=verbose, M=M)
        rep.Z = np.array(config.Z)
    except NewtonStalled as err:
        if not relocate_on_stall:
            raise
        from .ansatz import assemble

        t0 = time.time()
        Z, w1, its, path = relocate(problem, config.profile, config.eps, config.Z, grid, A, q, tol=tol,
                                    R=config.R, max_outer=max_outer, verbose=verbose)
        w, rep = newton_solve(A, q, config.p, w1, tol=tol, max_iter=max_iter, verbose=verbose, M=M)
        rep.iterations += its + err.report.iterations
        rep.relocated = True
        rep.Z = Z
        rep.path = path
        rep.seconds = time.time() - t0 + err.report.seconds
        V = assemble(problem, Z, config.eps, config.profile, R=config.R)(pts)
    rep.omega_inf = float(np.max(np.abs(w - V)))
    rep.components = vortex_set(w, q, grid, config.eps, config.p)
    rep.energy = energy_I(w, A, q, config.p, grid.h)
    rep.min_w = float(w.min())
    return Solution(grid=grid, w=w, q=q, V=V, report=rep, eps=config.eps, p=config.p)


def dump_field(grid: DiscGrid, values, path, fmt: str = "csv", header: str = "") -> None:
    """Write (x1, x2, value) rows (csv) or a raw little-endian float64 array with a sidecar."""
    from pathlib import Path

    path = Path(path)
    pts = grid.points
    if fmt == "csv":
        with path.open("w") as fh:
            if header:
                fh.write(header)
            fh.write("x1,x2,value\n")
            np.savetxt(fh, np.column_stack([pts, values]), delimiter=",", fmt="%.17g")
    elif fmt == "raw":
        grid.to_array(values).astype("<f8").tofile(path)
        path.with_suffix(path.suffix + ".json").write_text(
            '{"dtype": "<f8", "shape": [%d, %d], "order": "C", "axis0": "x1", "axis1": "x2", '
            '"R_star": %.17g, "h": %.17g, "fill": 0.0}\n' % (grid.n, grid.n, grid.R_star, grid.h))
    else:
        raise ValueError(f"unknown field format {fmt!r}")
