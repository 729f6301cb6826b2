"""Batch driver: ``helical-vortex <subcommand> [--config run.ini] [--out dir] ...``.

Configuration is a flat INI file::

    [run]
    kind = helical            ; generic | helical | helical-polygonal
    p = 2
    eps = 1e-2, 3e-3, 1e-3    ; strictly inside (0, 1), descending
    n = 1025, 1025, 2049      ; one odd value, or one per eps
    tol = 1e-10
    max_iter = 30
    relocate = yes
    L = 5
    taus = 0, 1, 2
    field_format = none       ; none | csv | raw

    [helix]
    k = 1
    r_star = 0.5
    c = 1
    R_star = 1
    m = 1

    [generic]
    R_star = 1
    K = 1, 0, 1               ; K11, K12, K22
    q = 1, 0, 0, 0, 0, 0      ; q0 + q1 x1 + q2 x2 + q11 x1^2 + q12 x1 x2 + q22 x2^2
    seeds = 0 0               ; points separated by ';'
    extremum = min

Every CSV starts with a ``# config_hash=...`` line followed by the header row.
Exit codes: 0 success, 1 a check failed, 2 invalid configuration, 3 unresolved
core (the message carries the suggested n), 4 solver failure.
"""
from __future__ import annotations

import argparse
import configparser
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import hashlib
import json
import math
from pathlib import Path
import sys

import numpy as np

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RESOLUTION, EXIT_SOLVER = 0, 1, 2, 3, 4
SUBCOMMANDS = ("profile", "greens-validate", "ansatz", "solve", "reduce", "lift", "sweep")
KINDS = ("generic", "helical", "helical-polygonal")


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"invalid config key '{key}': {msg}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    kind: str = "helical"
    p: float = 2.0
    eps: tuple = (1e-2, 3e-3, 1e-3)
    n: tuple = (1025, 1025, 2049)
    tol: float = 1e-10
    max_iter: int = 30
    relocate: bool = True
    L: float = 5.0
    taus: tuple = (0.0, 1.0, 2.0)
    field_format: str = "none"
    # helix
    k: float = 1.0
    r_star: float = 0.5
    c: float = 1.0
    R_star: float = 1.0
    m: int = 1
    # generic
    K: tuple = (1.0, 0.0, 1.0)
    q: tuple = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    seeds: tuple = ((0.0, 0.0),)
    extremum: str = "min"
    out: str = field(default="out", compare=False)

    def grid_for(self, eps: float) -> int:
        return self.n[0] if len(self.n) == 1 else self.n[self.eps.index(eps)]

    def config_hash(self) -> str:
        d = asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        if not 1.0 < self.p <= 5.0:
            raise ConfigError("p", "exponent must lie in (1, 5]")
        if not self.eps:
            raise ConfigError("eps", "empty eps list")
        if any(not 0.0 < e < 1.0 for e in self.eps):
            raise ConfigError("eps", "values must lie strictly in (0, 1)")
        if any(a <= b for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps", "values must be sorted strictly descending")
        if len(self.n) not in (1, len(self.eps)):
            raise ConfigError("n", "give one grid size or one per eps value")
        if any(v % 2 == 0 or v < 65 for v in self.n):
            raise ConfigError("n", "grid sizes must be odd and >= 65")
        if not self.tol > 0:
            raise ConfigError("tol", "must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter", "must be >= 1")
        if self.field_format not in ("none", "csv", "raw"):
            raise ConfigError("field_format", "must be none, csv or raw")
        if self.kind != "generic":
            if not (self.k > 0 and self.c > 0 and 0 < self.r_star < self.R_star):
                raise ConfigError("helix", "need k, c > 0 and 0 < r_star < R_star")
            if self.kind == "helical" and self.m != 1:
                raise ConfigError("m", "kind 'helical' needs m = 1; use 'helical-polygonal'")
            if self.kind == "helical-polygonal" and self.m < 2:
                raise ConfigError("m", "kind 'helical-polygonal' needs m >= 2")
        else:
            if len(self.K) != 3:
                raise ConfigError("K", "expected K11, K12, K22")
            if len(self.q) != 6:
                raise ConfigError("q", "expected six polynomial coefficients")
            if not self.seeds:
                raise ConfigError("seeds", "at least one seed is required")
            if self.extremum not in ("min", "max"):
                raise ConfigError("extremum", "must be min or max")
        return self


# ------------------------------------------------------------------ parsing


def _floats(key, text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(key, f"cannot parse numbers from {text!r}") from None


def _get(sec, key, conv, default):
    if key not in sec:
        return default
    raw = sec[key]
    try:
        return conv(raw)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r}") from None


def load_config(path=None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        if not cp.read(path):
            raise ConfigError("config", f"cannot read {path}")
    except configparser.Error as err:
        raise ConfigError("config", str(err).splitlines()[0]) from None
    kw = {}
    if cp.has_section("run"):
        s = cp["run"]
        kw["kind"] = s.get("kind", cfg.kind).strip()
        kw["p"] = _get(s, "p", float, cfg.p)
        kw["eps"] = _get(s, "eps", lambda t: _floats("eps", t), cfg.eps)
        kw["n"] = _get(s, "n", lambda t: tuple(int(v) for v in _floats("n", t)), cfg.n)
        kw["tol"] = _get(s, "tol", float, cfg.tol)
        kw["max_iter"] = _get(s, "max_iter", int, cfg.max_iter)
        if "relocate" in s:
            try:
                kw["relocate"] = s.getboolean("relocate")
            except ValueError:
                raise ConfigError("relocate", "expected yes/no") from None
        kw["L"] = _get(s, "L", float, cfg.L)
        kw["taus"] = _get(s, "taus", lambda t: _floats("taus", t), cfg.taus)
        kw["field_format"] = s.get("field_format", cfg.field_format).strip()
    if cp.has_section("helix"):
        s = cp["helix"]
        for key in ("k", "r_star", "c", "R_star"):
            kw[key] = _get(s, key, float, getattr(cfg, key))
        kw["m"] = _get(s, "m", int, cfg.m)
    if cp.has_section("generic"):
        s = cp["generic"]
        kw["R_star"] = _get(s, "R_star", float, kw.get("R_star", cfg.R_star))
        kw["K"] = _get(s, "K", lambda t: _floats("K", t), cfg.K)
        kw["q"] = _get(s, "q", lambda t: _floats("q", t), cfg.q)
        kw["seeds"] = _get(s, "seeds", lambda t: tuple(_floats("seeds", part) for part in t.split(";")
                                                        if part.strip()), cfg.seeds)
        if any(len(z) != 2 for z in kw["seeds"]):
            raise ConfigError("seeds", "each seed needs two coordinates")
        kw["extremum"] = s.get("extremum", cfg.extremum).strip()
    return replace(cfg, **kw)


# ------------------------------------------------------------------ problems


def build_problem(cfg: RunConfig):
    from .geometry import HelixSpec
    from .problem import constant_problem, helical_problem

    if cfg.kind == "generic":
        c = cfg.q

        def q(x):
            x = np.asarray(x, dtype=float)
            x1, x2 = x[..., 0], x[..., 1]
            return c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x1 + c[4] * x1 * x2 + c[5] * x2 * x2

        K = np.array([[cfg.K[0], cfg.K[1]], [cfg.K[1], cfg.K[2]]])
        return constant_problem(K, q, np.array(cfg.seeds), R_star=cfg.R_star, kind=cfg.extremum)
    return helical_problem(HelixSpec(k=cfg.k, r_star=cfg.r_star, c=cfg.c, R_star=cfg.R_star, m=cfg.m))


def kappa_target(cfg: RunConfig, problem) -> float:
    """Limiting circulation: c for helical runs, 2 pi q sqrt(det K) at the first seed otherwise."""
    return cfg.c if cfg.kind != "generic" else problem.kappa_limit(problem.seeds[0])


# ------------------------------------------------------------------ output


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns, rows, config_hash: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config_hash={config_hash}", ",".join(columns)]
    lines += [",".join(fmt(r.get(c, "")) for c in columns) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_table(path):
    """Rows of a table written by :func:`write_table` (values kept as strings)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    cols = lines[1].split(",")
    return [dict(zip(cols, ln.split(","))) for ln in lines[2:]]


def _tag(eps: float) -> str:
    return f"{eps:.3e}".replace("+", "").replace("-", "m").replace(".", "p")


# ------------------------------------------------------------------ tasks


def _profile(cfg):
    from .profile import solve_profile

    return solve_profile(cfg.p)


def run_profile(cfg: RunConfig, out: Path) -> int:
    from .profile import pohozaev_check, save_profile

    prof = _profile(cfg)
    res = pohozaev_check(prof)
    path = out / f"profile_p{cfg.p:g}.txt"
    out.mkdir(parents=True, exist_ok=True)
    save_profile(prof, path)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(f"# pohozaev_pp1={res[0]:.17g} pohozaev_p={res[1]:.17g}\n")
    print(f"phi(0) = {prof.phi0:.15g}, phi'(1) = {prof.slope1:.15g}")
    print(f"pohozaev residuals {res[0]:.3e} {res[1]:.3e} -> {path}")
    return EXIT_OK if max(res) < 1e-6 else EXIT_CHECK


def run_greens(cfg: RunConfig, out: Path) -> int:
    from .greens import oracle_suite

    problem = build_problem(cfg)
    anchors = [problem.factor(z) for z in np.atleast_2d(problem.seeds)]
    res = oracle_suite(R_star=cfg.R_star, anchors=anchors)
    checks = [("disc_max_error", res["disc_max_error"], 1e-6, res["disc_max_error"] < 1e-6),
              ("bound_upper", res["bound_upper"], 1e-8, res["bound_upper"] <= 1e-8),
              ("bound_lower", res["bound_lower"], 1e-8, res["bound_lower"] <= 1e-8),
              ("symmetry", res["symmetry"], 1e-6, res["symmetry"] < 1e-6),
              ("gbar_min", res["gbar_min"], 0.0, res["gbar_min"] >= 0.0)]
    rows = [dict(check=c, value=v, threshold=t, passed=ok) for c, v, t, ok in checks]
    write_table(out / "greens.csv", ["check", "value", "threshold", "passed"], rows, cfg.config_hash())
    for r in rows:
        print(f"{r['check']:16s} {r['value']:.3e} {'ok' if r['passed'] else 'FAIL'}")
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_CHECK


ANSATZ_COLUMNS = ["eps", "delta", "R", "m", "qhat1", "s1", "core_residual", "boundary_trace_rel",
                  "expansion_error", "expansion_ratio", "min_L"]


def ansatz_row(cfg: RunConfig, problem, prof, eps: float, Z=None, dump_dir: Path | None = None) -> dict:
    from . import ansatz as A

    config = A.assemble(problem, problem.seeds if Z is None else Z, eps, prof)
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        A.dump(config, dump_dir / f"ansatz_{_tag(eps)}.txt")
    le = abs(math.log(eps))
    err = A.local_expansion_error(config, problem, L=cfg.L)
    return dict(eps=eps, delta=config.delta, R=config.R, m=config.m, qhat1=config.qhat[0], s1=config.s[0],
                core_residual=float(np.max(np.abs(config.residuals()))),
                boundary_trace_rel=A.boundary_trace(config, problem.R_star) / max(config.qhat),
                expansion_error=err, expansion_ratio=err / (math.log(le) / le**2),
                min_L=A.minimal_sign_L(config, problem))


def run_ansatz(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    prof = _profile(cfg)
    rows = [ansatz_row(cfg, problem, prof, e, dump_dir=out) for e in cfg.eps]
    write_table(out / "ansatz.csv", ANSATZ_COLUMNS, rows, cfg.config_hash())
    for r in rows:
        print(f"eps={r['eps']:.1e} qhat={r['qhat1']:.6f} s={r['s1']:.4e} trace={r['boundary_trace_rel']:.1e} "
              f"ratio203={r['expansion_ratio']:.3f} L={r['min_L']:.2f}")
    return EXIT_OK


REDUCE_COLUMNS = ["eps", "delta", "z1_x", "z1_y", "z1_norm", "P_direct", "P_asymptotic", "gap", "gap_ratio",
                  "escaped", "evaluations"]


def reduce_row(cfg: RunConfig, problem, prof, eps: float) -> dict:
    """Confined pattern search; on escape the search is rerun on the whole disc."""
    from .ansatz import delta_from_eps
    from .reduction import ExtremumEscaped, optimize_Z, reduced_energy_asymptotic, reduced_energy_direct

    escaped = False
    try:
        res = optimize_Z(problem, eps, prof, confine=True)
    except ExtremumEscaped:
        escaped = True
        res = optimize_Z(problem, eps, prof, confine=False)
    Z = np.atleast_2d(res.Z)
    delta = delta_from_eps(eps, cfg.p)
    le = abs(math.log(eps))
    # the two functionals are compared at the seeds
    direct = reduced_energy_direct(problem, problem.seeds, eps, prof)
    asym = reduced_energy_asymptotic(problem, problem.seeds, eps, cfg.p)
    gap = abs(direct - asym)
    return dict(eps=eps, delta=delta, z1_x=Z[0, 0], z1_y=Z[0, 1], z1_norm=float(np.linalg.norm(Z[0])),
                P_direct=direct, P_asymptotic=asym, gap=gap,
                gap_ratio=gap / (delta**2 * math.log(le) / le**2), escaped=escaped,
                evaluations=res.evaluations, Z=Z)


def run_reduce(cfg: RunConfig, out: Path) -> int:
    problem = build_problem(cfg)
    prof = _profile(cfg)
    rows = [reduce_row(cfg, problem, prof, e) for e in cfg.eps]
    write_table(out / "reduce.csv", REDUCE_COLUMNS, rows, cfg.config_hash())
    for r in rows:
        print(f"eps={r['eps']:.1e} z1=({r['z1_x']:.6f}, {r['z1_y']:.6f}) escaped={r['escaped']} "
              f"gap_ratio={r['gap_ratio']:.3f}")
    return EXIT_OK


SOLVE_COLUMNS = ["eps", "n", "iterations", "residual", "converged", "relocated", "omega_inf", "omega_ratio",
                 "energy", "min_w", "components", "kappa_mean", "kappa_target", "kappa_rel_err", "diameter_max",
                 "diam_over_eps", "z_solve_x", "z_solve_y"]
COMPONENT_COLUMNS = ["eps", "component", "center_x", "center_y", "weighted_x", "weighted_y", "diameter",
                     "diam_over_eps", "kappa", "n_nodes"]


def solve_eps(cfg: RunConfig, problem, prof, eps: float, Z=None, verbose: bool = False):
    """Ansatz at Z (default: the seeds) -> Newton on the configured grid."""
    from .ansatz import assemble
    from .solver import solve

    config = assemble(problem, problem.seeds if Z is None else Z, eps, prof)
    return solve(problem, config, cfg.grid_for(eps), tol=cfg.tol, max_iter=cfg.max_iter, verbose=verbose,
                 relocate_on_stall=cfg.relocate)


def solve_rows(cfg: RunConfig, problem, sol):
    rep = sol.report
    eps = sol.eps
    le = abs(math.log(eps))
    comps = rep.components
    target = kappa_target(cfg, problem)
    kap = float(np.mean([c.kappa for c in comps]))
    dmax = max(c.diameter for c in comps)
    Z = np.atleast_2d(rep.Z)
    row = dict(eps=eps, n=sol.grid.n, iterations=rep.iterations, residual=rep.residual, converged=rep.converged,
               relocated=rep.relocated, omega_inf=rep.omega_inf, omega_ratio=rep.omega_inf / (math.log(le) / le**2),
               energy=rep.energy, min_w=rep.min_w, components=len(comps), kappa_mean=kap, kappa_target=target,
               kappa_rel_err=abs(kap - target) / target, diameter_max=dmax, diam_over_eps=dmax / eps,
               z_solve_x=Z[0, 0], z_solve_y=Z[0, 1])
    crow = [dict(eps=eps, component=i + 1, center_x=c.center[0], center_y=c.center[1],
                 weighted_x=c.weighted_center[0], weighted_y=c.weighted_center[1], diameter=c.diameter,
                 diam_over_eps=c.diameter / eps, kappa=c.kappa, n_nodes=c.n_nodes) for i, c in enumerate(comps)]
    return row, crow


def _write_solution(cfg, sol, out: Path):
    from .solver import dump_field

    out.mkdir(parents=True, exist_ok=True)
    (out / f"solve_report_{_tag(sol.eps)}.txt").write_text(sol.report.as_text() + "\n", encoding="utf-8")
    if cfg.field_format != "none":
        ext = "csv" if cfg.field_format == "csv" else "f64"
        dump_field(sol.grid, sol.w, out / f"w_{_tag(sol.eps)}.{ext}", fmt=cfg.field_format,
                   header=f"# config_hash={cfg.config_hash()}\n")


def run_solve(cfg: RunConfig, out: Path, verbose: bool = False) -> int:
    problem = build_problem(cfg)
    prof = _profile(cfg)
    eps = cfg.eps[0]
    sol = solve_eps(cfg, problem, prof, eps, verbose=verbose)
    row, crow = solve_rows(cfg, problem, sol)
    h = cfg.config_hash()
    write_table(out / "solve.csv", SOLVE_COLUMNS, [row], h)
    write_table(out / "components.csv", COMPONENT_COLUMNS, crow, h)
    _write_solution(cfg, sol, out)
    print(sol.report.as_text())
    return EXIT_OK


LIFT_COLUMNS = ["eps", "orthogonality", "v3_identity", "divergence_max", "circulation", "flux_3d",
                "omega_expected", "omega_recovered", "omega_rel_err", "binormal_residual"]
TRAJECTORY_COLUMNS = ["eps", "tau", "centroid_x", "centroid_y", "P_x", "P_y", "distance", "weak_one",
                      "weak_x1", "weak_gauss", "kappa"]


def lift_rows(cfg: RunConfig, problem, sol):
    from .geometry import HelixSpec, binormal_residual
    from . import helix_lift as H

    spec = problem.spec or HelixSpec(k=cfg.k, r_star=cfg.r_star, c=cfg.c, R_star=cfg.R_star, m=cfg.m)
    alpha = problem.alpha if problem.spec is not None else 0.0
    beta = problem.beta
    grid = sol.grid
    fl = H.HelicalFlowSlice.from_solution(sol.w, grid, sol.q, sol.eps, sol.p, spec.k, alpha)
    pts = grid.points
    div, _ = H.divergence_3d(fl.v1, fl.v2, fl.v3, grid, spec.k)
    ug = grid.to_array(fl.stream)
    row = dict(eps=sol.eps, orthogonality=fl.orthogonality(),
               v3_identity=float(np.max(np.abs(fl.v3 - (pts[:, 0] * fl.v2 - pts[:, 1] * fl.v1) / spec.k))),
               divergence_max=float(np.max(np.abs(div))), circulation=fl.circulation(), flux_3d=fl.flux_3d(),
               binormal_residual=float(np.max(binormal_residual(np.linspace(0, 10, 101), 1.3, spec))))
    traj = []
    if problem.spec is not None:
        le = abs(math.log(sol.eps))
        row["omega_expected"] = alpha * le
        row["omega_recovered"] = H.recover_angular_velocity(ug, grid, sol.eps, alpha, beta, sol.p)
        row["omega_rel_err"] = abs(row["omega_recovered"] / row["omega_expected"] - 1)
        for r in H.concentration_metric(ug, grid, spec, sol.eps, alpha, beta, sol.p, taus=cfg.taus):
            traj.append(dict(eps=sol.eps, **r))
    return row, traj


def run_lift(cfg: RunConfig, out: Path, verbose: bool = False) -> int:
    if cfg.kind == "generic":
        raise ConfigError("kind", "lift needs a helical problem")
    problem = build_problem(cfg)
    prof = _profile(cfg)
    sol = solve_eps(cfg, problem, prof, cfg.eps[0], verbose=verbose)
    row, traj = lift_rows(cfg, problem, sol)
    h = cfg.config_hash()
    write_table(out / "lift.csv", LIFT_COLUMNS, [row], h)
    write_table(out / "trajectory.csv", TRAJECTORY_COLUMNS, traj, h)
    print(f"orthogonality {row['orthogonality']:.1e}  flux {row['flux_3d']:.6f}  "
          f"omega {row.get('omega_recovered', math.nan):.6f} (expected {row.get('omega_expected', math.nan):.6f})")
    return EXIT_OK


def sweep_job(cfg: RunConfig, eps: float, out: str) -> dict:
    """reduce -> solve seeded at the reduced Z -> lift, for one eps; writes per-job tables."""
    problem = build_problem(cfg)
    prof = _profile(cfg)
    job = Path(out) / "jobs" / _tag(eps)
    h = cfg.config_hash()
    red = reduce_row(cfg, problem, prof, eps)
    write_table(job / "reduce.csv", REDUCE_COLUMNS, [red], h)
    write_table(job / "ansatz.csv", ANSATZ_COLUMNS, [ansatz_row(cfg, problem, prof, eps, dump_dir=job)], h)
    sol = solve_eps(cfg, problem, prof, eps, Z=red["Z"])
    row, crow = solve_rows(cfg, problem, sol)
    write_table(job / "solve.csv", SOLVE_COLUMNS, [row], h)
    write_table(job / "components.csv", COMPONENT_COLUMNS, crow, h)
    _write_solution(cfg, sol, job)
    if cfg.kind != "generic":
        lrow, traj = lift_rows(cfg, problem, sol)
        write_table(job / "lift.csv", LIFT_COLUMNS, [lrow], h)
        write_table(job / "trajectory.csv", TRAJECTORY_COLUMNS, traj, h)
    return dict(eps=eps, dir=str(job))


def _merge(out: Path, name: str, columns, dirs, h):
    rows = []
    for d in dirs:
        p = Path(d) / name
        if p.exists():
            rows += read_table(p)
    write_table(out / name, columns, rows, h)


def run_sweep(cfg: RunConfig, out: Path, jobs: int = 1) -> int:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(sweep_job, [cfg] * len(cfg.eps), cfg.eps, [str(out)] * len(cfg.eps)))
    else:
        done = [sweep_job(cfg, e, str(out)) for e in cfg.eps]
    dirs = [d["dir"] for d in sorted(done, key=lambda d: -d["eps"])]
    h = cfg.config_hash()
    for name, cols in (("reduce.csv", REDUCE_COLUMNS), ("ansatz.csv", ANSATZ_COLUMNS), ("solve.csv", SOLVE_COLUMNS),
                       ("components.csv", COMPONENT_COLUMNS), ("lift.csv", LIFT_COLUMNS),
                       ("trajectory.csv", TRAJECTORY_COLUMNS)):
        _merge(out, name, cols, dirs, h)
    for r in read_table(out / "solve.csv"):
        print(f"eps={float(r['eps']):.1e} n={r['n']} its={r['iterations']} kappa={float(r['kappa_mean']):.6f} "
              f"(target {float(r['kappa_target']):.6f}) diam/eps={float(r['diam_over_eps']):.3f}")
    return EXIT_OK


# ------------------------------------------------------------------ entry


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory (default: ./out)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweep")
    common.add_argument("--eps", help="override eps list, e.g. 1e-2,3e-3")
    common.add_argument("--p", type=float, help="override the exponent p")
    common.add_argument("--grid-n", help="override grid size(s)")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="helical-vortex", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    kw = {}
    if args.eps is not None:
        kw["eps"] = _floats("eps", args.eps)
    if args.p is not None:
        kw["p"] = args.p
    if args.grid_n is not None:
        try:
            kw["n"] = tuple(int(v) for v in args.grid_n.replace(",", " ").split())
        except ValueError:
            raise ConfigError("n", f"cannot parse {args.grid_n!r}") from None
    if args.out is not None:
        kw["out"] = args.out
    return replace(cfg, **kw).validate()


def main(argv=None) -> int:
    from .solver import NewtonStalled, NoVortexCore, ResolutionError

    args = make_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out)
        if args.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")
        cmd = args.command
        if cmd == "profile":
            return run_profile(cfg, out)
        if cmd == "greens-validate":
            return run_greens(cfg, out)
        if cmd == "ansatz":
            return run_ansatz(cfg, out)
        if cmd == "solve":
            return run_solve(cfg, out, args.verbose)
        if cmd == "reduce":
            return run_reduce(cfg, out)
        if cmd == "lift":
            return run_lift(cfg, out, args.verbose)
        return run_sweep(cfg, out, args.jobs)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ResolutionError as err:
        print(f"error: {err} (suggested n = {err.suggested_n})", file=sys.stderr)
        return EXIT_RESOLUTION
    except (NewtonStalled, NoVortexCore, FloatingPointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
