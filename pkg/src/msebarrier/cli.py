"""Configuration, pipeline orchestration and report emission.

The pipeline runs geometry -> data stats -> criterion -> barrier -> solver in
dependency order.  Stage failures are captured in the report instead of
raised, and dependent stages are skipped with a reason; the process exit code
distinguishes config errors (1) and internal stage errors (2) from a clean
run (0), regardless of the mathematical verdict.
"""
from __future__ import annotations

import argparse
import importlib.resources
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import barrier as bar
from . import criterion as cri
from . import domain2d as dom
from . import msesolve as mse
from .exprcalc import ExprError, parse

__all__ = [
    "Config",
    "ConfigError",
    "ConfigParseError",
    "ValidationError",
    "load_config",
    "config_from_dict",
    "bundled_config_path",
    "run",
    "export",
    "main",
]


class ConfigError(Exception):
    pass


class ConfigParseError(ConfigError):
    def __init__(self, path: str, position: int, message: str):
        super().__init__(f"{path}:{position}: {message}")
        self.path = path
        self.position = position


class ValidationError(ConfigError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"config field '{field_name}': {reason}")
        self.field = field_name
        self.reason = reason


# ---------------------------------------------------------------------------
# config model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    radial: str | None = None
    x: str | None = None
    y: str | None = None
    period: float = 2.0 * math.pi
    interior_point: tuple[float, float] | None = None


@dataclass(frozen=True)
class AbstractGeometry:
    n: int
    lambda_r: float
    mu_r: float
    r: float
    R: float = math.inf


@dataclass(frozen=True)
class AbstractData:
    tau: float
    omega: float


@dataclass(frozen=True)
class SamplingSpec:
    boundary: int = 4096
    interior: int = 96
    classify: int = 1024
    barrier_points: int = 12000


@dataclass(frozen=True)
class JenkinsSerrinSpec:
    l: float
    l_prime: float | None = None
    curvature_bound: float | None = None
    sup_dphi: float | None = None
    sup_d2phi: float | None = None
    mean_curv_neg: float | None = None


@dataclass(frozen=True)
class SolverSpec:
    n_radial: int = 32
    n_angular: int = 128
    grad_tol: float = 1e-10
    max_iterations: int = 200
    levels: int = 3  # half / base / doubled meshes for Richardson checks


@dataclass(frozen=True)
class OutputSpec:
    psi_grid: int = 100


@dataclass(frozen=True)
class Config:
    phi: str
    mode: str = "euclidean-2d"
    domain: DomainSpec | None = None
    geometry: AbstractGeometry | None = None
    data: AbstractData | None = None
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    delta: float | None = None
    jenkins_serrin: JenkinsSerrinSpec | None = None
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0

    def to_dict(self) -> dict:
        d: dict = {"mode": self.mode, "phi": self.phi, "seed": self.seed}
        if self.domain is not None:
            ds: dict = {"period": self.domain.period}
            if self.domain.radial is not None:
                ds["radial"] = self.domain.radial
            else:
                ds["x"] = self.domain.x
                ds["y"] = self.domain.y
            if self.domain.interior_point is not None:
                ds["interior_point"] = list(self.domain.interior_point)
            d["domain"] = ds
        if self.geometry is not None:
            d["geometry"] = {"n": self.geometry.n, "lambda_r": self.geometry.lambda_r,
                             "mu_r": self.geometry.mu_r, "r": self.geometry.r,
                             "R": "inf" if math.isinf(self.geometry.R) else self.geometry.R}
        if self.data is not None:
            d["data"] = {"tau": self.data.tau, "omega": self.data.omega}
        d["sampling"] = {"boundary": self.sampling.boundary,
                         "interior": self.sampling.interior,
                         "classify": self.sampling.classify,
                         "barrier_points": self.sampling.barrier_points}
        if self.delta is not None:
            d["delta"] = self.delta
        if self.jenkins_serrin is not None:
            js = {"l": self.jenkins_serrin.l}
            for k in ("l_prime", "curvature_bound", "sup_dphi", "sup_d2phi",
                      "mean_curv_neg"):
                v = getattr(self.jenkins_serrin, k)
                if v is not None:
                    js[k] = v
            d["jenkins_serrin"] = js
        d["solver"] = {"n_radial": self.solver.n_radial,
                       "n_angular": self.solver.n_angular,
                       "grad_tol": self.solver.grad_tol,
                       "max_iterations": self.solver.max_iterations,
                       "levels": self.solver.levels}
        d["output"] = {"psi_grid": self.output.psi_grid}
        return d


def _check_keys(d: dict, allowed: set[str], path: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValidationError(path, f"unknown key(s) {sorted(unknown)}")


def _num(d: dict, key: str, path: str, default=None, positive=False):
    if key not in d:
        if default is None:
            raise ValidationError(f"{path}.{key}", "missing required number")
        return default
    v = d[key]
    if v == "inf":
        return math.inf
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ValidationError(f"{path}.{key}", f"expected a number, got {v!r}")
    if positive and not v > 0:
        raise ValidationError(f"{path}.{key}", "must be positive")
    return float(v)


def _parse_expr_field(src, variables, path: str) -> str:
    if not isinstance(src, str):
        raise ValidationError(path, f"expected an expression string, got {src!r}")
    try:
        parse(src, variables)
    except ExprError as exc:
        raise ValidationError(path, f"bad expression: {exc}") from exc
    return src


def config_from_dict(raw: dict) -> Config:
    _check_keys(raw, {"mode", "phi", "domain", "geometry", "data", "sampling",
                      "delta", "jenkins_serrin", "solver", "output", "seed"},
                "<root>")
    mode = raw.get("mode", "euclidean-2d")
    if mode not in ("euclidean-2d", "abstract"):
        raise ValidationError("mode", f"must be 'euclidean-2d' or 'abstract', got {mode!r}")
    if "phi" not in raw:
        raise ValidationError("phi", "missing boundary-data expression")
    phi = _parse_expr_field(raw["phi"], ("x", "y"), "phi")

    domain = None
    if "domain" in raw:
        d = raw["domain"]
        _check_keys(d, {"radial", "x", "y", "period", "interior_point"}, "domain")
        has_radial = "radial" in d
        has_xy = "x" in d or "y" in d
        if has_radial and has_xy:
            raise ValidationError("domain", "give either 'radial' or 'x'/'y', not both")
        if not has_radial and not ("x" in d and "y" in d):
            raise ValidationError("domain", "need 'radial' or both 'x' and 'y'")
        period = _num(d, "period", "domain", default=2.0 * math.pi, positive=True)
        pt = None
        if "interior_point" in d:
            p = d["interior_point"]
            if (not isinstance(p, list) or len(p) != 2
                    or not all(isinstance(v, (int, float)) for v in p)):
                raise ValidationError("domain.interior_point", "expected [x, y]")
            pt = (float(p[0]), float(p[1]))
        if has_radial:
            domain = DomainSpec(radial=_parse_expr_field(d["radial"], ("t",), "domain.radial"),
                                period=period, interior_point=pt)
        else:
            domain = DomainSpec(x=_parse_expr_field(d["x"], ("t",), "domain.x"),
                                y=_parse_expr_field(d["y"], ("t",), "domain.y"),
                                period=period, interior_point=pt)

    geometry = None
    if "geometry" in raw:
        g = raw["geometry"]
        _check_keys(g, {"n", "lambda_r", "mu_r", "r", "R"}, "geometry")
        n = g.get("n", 2)
        if not isinstance(n, int) or n < 2:
            raise ValidationError("geometry.n", "dimension must be an integer >= 2")
        lam = _num(g, "lambda_r", "geometry")
        if not lam < 0:
            raise ValidationError("geometry.lambda_r", "must be negative")
        geometry = AbstractGeometry(n, lam, _num(g, "mu_r", "geometry", positive=True),
                                    _num(g, "r", "geometry", positive=True),
                                    _num(g, "R", "geometry", default=math.inf))

    data = None
    if "data" in raw:
        dd = raw["data"]
        _check_keys(dd, {"tau", "omega"}, "data")
        data = AbstractData(_num(dd, "tau", "data", positive=True),
                            _num(dd, "omega", "data", positive=True))

    if mode == "euclidean-2d":
        if domain is None:
            raise ValidationError("domain", "required in euclidean-2d mode")
        if geometry is not None:
            raise ValidationError("geometry", "only allowed in abstract mode")
    else:
        if domain is not None:
            raise ValidationError("domain", "abstract mode takes no planar domain")
        if geometry is None:
            raise ValidationError("geometry", "required in abstract mode")
        if data is None:
            raise ValidationError("data", "abstract mode needs user-supplied tau and omega")

    sampling = SamplingSpec()
    if "sampling" in raw:
        s = raw["sampling"]
        _check_keys(s, {"boundary", "interior", "classify", "barrier_points"}, "sampling")
        sampling = SamplingSpec(
            int(_num(s, "boundary", "sampling", default=4096, positive=True)),
            int(_num(s, "interior", "sampling", default=96, positive=True)),
            int(_num(s, "classify", "sampling", default=1024, positive=True)),
            int(_num(s, "barrier_points", "sampling", default=12000, positive=True)))

    delta = None
    if "delta" in raw and raw["delta"] is not None:
        delta = _num(raw, "delta", "<root>", positive=True)

    js = None
    if "jenkins_serrin" in raw:
        j = raw["jenkins_serrin"]
        _check_keys(j, {"l", "l_prime", "curvature_bound", "sup_dphi",
                        "sup_d2phi", "mean_curv_neg"}, "jenkins_serrin")
        js = JenkinsSerrinSpec(
            _num(j, "l", "jenkins_serrin", positive=True),
            l_prime=None if "l_prime" not in j else _num(j, "l_prime", "jenkins_serrin", positive=True),
            curvature_bound=None if "curvature_bound" not in j else _num(j, "curvature_bound", "jenkins_serrin"),
            sup_dphi=None if "sup_dphi" not in j else _num(j, "sup_dphi", "jenkins_serrin"),
            sup_d2phi=None if "sup_d2phi" not in j else _num(j, "sup_d2phi", "jenkins_serrin"),
            mean_curv_neg=None if "mean_curv_neg" not in j else _num(j, "mean_curv_neg", "jenkins_serrin"))

    solver = SolverSpec()
    if "solver" in raw:
        s = raw["solver"]
        _check_keys(s, {"n_radial", "n_angular", "grad_tol", "max_iterations",
                        "levels"}, "solver")
        solver = SolverSpec(
            int(_num(s, "n_radial", "solver", default=32, positive=True)),
            int(_num(s, "n_angular", "solver", default=128, positive=True)),
            _num(s, "grad_tol", "solver", default=1e-10, positive=True),
            int(_num(s, "max_iterations", "solver", default=200, positive=True)),
            int(_num(s, "levels", "solver", default=3, positive=True)))

    output = OutputSpec()
    if "output" in raw:
        o = raw["output"]
        _check_keys(o, {"psi_grid"}, "output")
        output = OutputSpec(int(_num(o, "psi_grid", "output", default=100, positive=True)))

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("seed", "must be an integer")

    return Config(phi, mode, domain, geometry, data, sampling, delta, js,
                  solver, output, seed)


def load_config(path) -> Config:
    """Read and validate a JSON config file; unknown keys are rejected."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(str(path), exc.pos, exc.msg) from exc
    if not isinstance(raw, dict):
        raise ConfigParseError(str(path), 0, "top-level JSON value must be an object")
    return config_from_dict(raw)


def bundled_config_path():
    """Path of the packaged example configuration."""
    return importlib.resources.files("msebarrier") / "configs" / "paper_example.json"


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

_STAGE_ORDER = ("geometry", "stats", "criterion", "barrier", "solve")
_VERB_STAGES = {
    "check": ("geometry", "stats", "criterion"),
    "barrier": ("geometry", "stats", "criterion", "barrier"),
    "solve": _STAGE_ORDER,
    "report": _STAGE_ORDER,
}


def _build_domain(cfg: Config) -> dom.Domain2D:
    spec = cfg.domain
    if spec.radial is not None:
        d = dom.Domain2D.from_radial(spec.radial, spec.period)
        if spec.interior_point is not None:
            d = dom.Domain2D(d.boundary, spec.interior_point, d.radial_expr)
        return d
    return dom.Domain2D.from_exprs(spec.x, spec.y, spec.period, spec.interior_point)


def _classification_dict(cls: dom.BoundaryClassification) -> dict:
    return {
        "kappa_min": cls.kappa_min,
        "kappa_max_abs": cls.kappa_max_abs,
        "negative_arcs": [[lo, hi] for lo, hi in cls.negative_arcs],
        "eps_neg": cls.eps_neg,
        "n_samples": cls.n_samples,
        "mean_convex": not cls.negative_arcs,
    }


def _sphere_dict(s: dom.ExteriorSphere) -> dict:
    return {"t_tangency": s.t_tangency, "p": list(map(float, s.p)),
            "p0": list(map(float, s.p0)), "r": s.r}


def _barrier_report_dict(rep: bar.BarrierCheckReport) -> dict:
    return {
        "kind": rep.kind,
        "n_points": rep.n_points,
        "max_operator": rep.max_operator,
        "min_operator": rep.min_operator,
        "extreme_gap": rep.extreme_gap,
        "pinning": rep.pinning,
        "cap_excess": rep.cap_excess,
        "worst_operator_point": list(rep.worst_operator_point),
        "worst_gap_point": list(rep.worst_gap_point),
        "violations": list(rep.violations),
        "passed": rep.passed,
    }


def run(config: Config, verb: str = "report") -> dict:
    """Execute the pipeline stages for ``verb`` and return the report dict.

    Stage exceptions are captured as status "failed"; stages whose inputs
    failed or were skipped report status "skipped" with a reason.
    """
    stages = _VERB_STAGES[verb]
    report: dict = {
        "config": config.to_dict(),
        "verb": verb,
        "stages": {},
        "timings": {},
    }
    ctx: dict = {}

    for name in _STAGE_ORDER:
        if name not in stages:
            continue
        t0 = time.perf_counter()
        try:
            record = _STAGE_FUNCS[name](config, ctx)
        except Exception as exc:  # failure-transparent: captured, not raised
            record = {"status": "failed", "reason": f"{type(exc).__name__}: {exc}"}
            ctx[f"{name}_failed"] = True
        report["stages"][name] = record
        report["timings"][name] = time.perf_counter() - t0
    return report


def _needs(ctx: dict, *keys):
    missing = [k for k in keys if k not in ctx]
    return missing


def _stage_geometry(cfg: Config, ctx: dict) -> dict:
    if cfg.mode == "abstract":
        g = cfg.geometry
        ctx["geom"] = cri.GeometrySummary(g.n, g.lambda_r, g.mu_r, g.r, g.R,
                                          source="user-supplied")
        return {"status": "ok",
                "summary": {"n": g.n, "lambda_r": g.lambda_r, "mu_r": g.mu_r,
                            "r": g.r, "R": "inf" if math.isinf(g.R) else g.R,
                            "source": "user-supplied"}}
    domain = _build_domain(cfg)
    ctx["domain"] = domain
    cls = dom.classify_boundary(domain, cfg.sampling.classify)
    ctx["classification"] = cls
    record = {"status": "ok", "classification": _classification_dict(cls)}
    if cls.negative_arcs:
        ext = dom.exterior_radius(domain, cls)
        ctx["exterior"] = ext
        geom = cri.GeometrySummary.euclidean(ext.r)
        ctx["geom"] = geom
        record["exterior"] = {
            "r": ext.r,
            "osculating_cap": ext.osculating_cap,
            "cap_limited": ext.cap_limited,
            "spheres": [_sphere_dict(s) for s in ext.spheres],
        }
        record["summary"] = {"n": geom.n, "lambda_r": geom.lambda_r,
                             "mu_r": geom.mu_r, "r": geom.r, "R": "inf",
                             "source": geom.source}
    else:
        record["summary"] = None
    return record


def _stage_stats(cfg: Config, ctx: dict) -> dict:
    if cfg.mode == "abstract":
        d = cfg.data
        stats = cri.DataStats(d.tau, d.omega, math.nan, math.nan, math.nan, 0.0)
        ctx["stats"] = stats
        return {"status": "ok", "tau": d.tau, "omega": d.omega,
                "source": "user-supplied"}
    if "domain" not in ctx:
        return {"status": "skipped", "reason": "geometry stage did not produce a domain"}
    phi = parse(cfg.phi, ("x", "y"))
    ctx["phi"] = phi
    stats = cri.data_stats(phi, ctx["domain"], cfg.sampling.interior)
    ctx["stats"] = stats
    return {"status": "ok", "tau": stats.tau, "omega": stats.omega,
            "sup_grad": stats.sup_grad, "sup_hess": stats.sup_hess,
            "sup_lap": stats.sup_lap, "refine_error": stats.refine_error,
            "phi_c2_smooth": phi.c2_smooth, "source": "sampled"}


def _stage_criterion(cfg: Config, ctx: dict) -> dict:
    if "stats" not in ctx:
        return {"status": "skipped", "reason": "no data statistics available"}
    stats: cri.DataStats = ctx["stats"]

    if cfg.mode == "abstract":
        geom = ctx["geom"]
        k = cri.constants(stats, geom)
        delta = cfg.delta if cfg.delta is not None else k.delta_max * (1.0 - 1e-6)
        values = k.as_dict()
        values["tau"] = stats.tau
        values["omega"] = stats.omega
        values["bound_mo"] = cri.osc_bound_mo(k, delta)
        if math.isinf(geom.R):
            hb = cri.hadamard_bounds(k, geom.R)
            values["bound_hc"], values["bound_hc2"] = hb["hc"], hb["hc2"]
        cor = cri.corollary_sh(k, stats, geom)
        values["sh_lhs"] = cor.sh_lhs
        values["she_value"] = cor.she_value
        values["js_B"] = None
        ctx["constants"] = k
        ctx["chosen_delta"] = delta
        return {"status": "ok", "values": values, "chosen_delta": delta}

    if "classification" not in ctx:
        return {"status": "skipped", "reason": "no boundary classification available"}
    cls = ctx["classification"]
    opts = cri.VerdictOptions(
        delta_override=cfg.delta,
        stats_density=cfg.sampling.interior,
        classify_samples=cfg.sampling.classify,
        js_l=None if cfg.jenkins_serrin is None else cfg.jenkins_serrin.l,
        js_l_prime=None if cfg.jenkins_serrin is None else cfg.jenkins_serrin.l_prime,
        js_overrides={} if cfg.jenkins_serrin is None else {
            k: v for k, v in (
                ("curvature_bound", cfg.jenkins_serrin.curvature_bound),
                ("sup_dphi", cfg.jenkins_serrin.sup_dphi),
                ("sup_d2phi", cfg.jenkins_serrin.sup_d2phi),
                ("mean_curv_neg", cfg.jenkins_serrin.mean_curv_neg),
            ) if v is not None})
    pre = {"classification": cls, "stats": ctx.get("stats"),
           "exterior": ctx.get("exterior")}
    v = cri.verdict(ctx["domain"], ctx["phi"], opts, precomputed=pre)
    ctx["verdict"] = v
    values = {
        "tau": stats.tau, "omega": stats.omega,
        "bound_mo": v.bound_mo, "bound_hc": v.bound_hc, "bound_hc2": v.bound_hc2,
        "sh_lhs": v.sh_lhs, "she_value": v.she_value, "js_B": v.js_B,
    }
    if v.branch not in ("mean-convex", "trivial-constant"):
        k = cri.constants(stats, ctx["geom"])
        ctx["constants"] = k
        ctx["chosen_delta"] = v.chosen_delta
        values.update(k.as_dict())
    js_verified = None
    if cfg.jenkins_serrin is not None and "domain" in ctx:
        js_verified = cri.js_graph_radius_verify(ctx["domain"], cfg.jenkins_serrin.l)
    return {
        "status": "ok",
        "values": values,
        "chosen_delta": v.chosen_delta,
        "branch": v.branch,
        "solvable": v.solvable,
        "conditions": [{"name": c.name, "bound": c.bound, "value": c.value,
                        "margin": c.margin, "passed": c.passed}
                       for c in v.conditions],
        "notes": list(v.notes),
        "js_graph_radius_ok": js_verified,
    }


def _stage_barrier(cfg: Config, ctx: dict) -> dict:
    if cfg.mode == "abstract":
        return {"status": "skipped", "reason": "abstract mode has no planar geometry"}
    if "classification" in ctx and not ctx["classification"].negative_arcs:
        return {"status": "skipped", "reason": "boundary is mean-convex: no concave arc"}
    missing = _needs(ctx, "constants", "exterior", "phi", "chosen_delta")
    if missing:
        return {"status": "skipped", "reason": f"missing upstream results: {missing}"}
    k: cri.CriterionConstants = ctx["constants"]
    delta = ctx["chosen_delta"]
    profiles = []
    reports = []
    for sphere in ctx["exterior"].spheres:
        prof = bar.BarrierProfile(k.rho, k.sigma, delta, sphere)
        profiles.append(prof)
        up = bar.verify_upper_barrier(ctx["domain"], ctx["phi"], prof,
                                      cfg.sampling.barrier_points)
        lo = bar.verify_lower_barrier(ctx["domain"], ctx["phi"], prof,
                                      cfg.sampling.barrier_points)
        reports.append({"sphere": _sphere_dict(sphere),
                        "upper": _barrier_report_dict(up),
                        "lower": _barrier_report_dict(lo)})
    ctx["profiles"] = profiles
    props = bar.psi_properties(profiles[0], ctx["stats"].omega)
    return {
        "status": "ok",
        "profile": {"rho": k.rho, "sigma": k.sigma, "c1": profiles[0].c1,
                    "delta": delta},
        "psi_properties": [{"name": c.name, "passed": c.passed, "margin": c.margin}
                           for c in props],
        "reports": reports,
        "certified": all(r["upper"]["passed"] and r["lower"]["passed"]
                         for r in reports),
    }


def _stage_solve(cfg: Config, ctx: dict) -> dict:
    if cfg.mode == "abstract":
        return {"status": "skipped", "reason": "abstract mode has no planar geometry"}
    missing = _needs(ctx, "domain", "phi")
    if missing:
        return {"status": "skipped", "reason": f"missing upstream results: {missing}"}
    domain, phi = ctx["domain"], ctx["phi"]
    s = cfg.solver
    opts = mse.SolveOptions(grad_tol=s.grad_tol, max_iterations=s.max_iterations)

    levels = []
    nr, na = s.n_radial, s.n_angular
    if s.levels >= 3 and nr % 2 == 0 and na % 2 == 0:
        levels.append((nr // 2, na // 2))
    levels.append((nr, na))
    if s.levels >= 2:
        levels.append((2 * nr, 2 * na))

    solved = []
    for (r_, a_) in levels:
        mesh = mse.triangulate_star(domain, r_, a_)
        res = mse.solve(mesh, phi, opts)
        solved.append((mesh, res))
        if not res.converged:
            return {"status": "failed",
                    "reason": f"solver did not converge on mesh {r_}x{a_}"}

    base_i = len(levels) - 2 if len(levels) >= 2 else 0
    base_mesh, base_res = solved[base_i]
    fine = solved[base_i + 1] if base_i + 1 < len(solved) else None
    check = mse.verify_solution(base_mesh, base_res, phi,
                                profiles=ctx.get("profiles", ()), fine=fine)
    ctx["mesh"] = base_mesh
    ctx["solution"] = base_res

    richardson = None
    if len(solved) >= 3:
        d1 = mse.nodal_difference(solved[0][0], solved[0][1].u,
                                  solved[1][0], solved[1][1].u)
        d2 = mse.nodal_difference(solved[1][0], solved[1][1].u,
                                  solved[2][0], solved[2][1].u)
        richardson = d1 / d2 if d2 > 0 else math.inf

    osc = float(base_res.u.max() - base_res.u.min())
    return {
        "status": "ok",
        "levels": [{"n_radial": m.n_radial, "n_angular": m.n_angular,
                    "nodes": m.n_nodes, "iterations": r.iterations,
                    "converged": r.converged, "max_residual": r.max_residual,
                    "energy": r.energy_history[-1]}
                   for (m, r) in solved],
        "oscillation": osc,
        "richardson_ratio": richardson,
        "checks": {
            "max_principle_ok": check.max_principle_ok,
            "max_principle_excess": check.max_principle_excess,
            "boundary_trace_error": check.boundary_trace_error,
            "barrier_ok": check.barrier_ok,
            "barrier_excess": check.barrier_excess,
            "barrier_nodes_checked": check.barrier_nodes_checked,
            "tol_mesh": check.tol_mesh,
        },
    }


_STAGE_FUNCS = {
    "geometry": _stage_geometry,
    "stats": _stage_stats,
    "criterion": _stage_criterion,
    "barrier": _stage_barrier,
    "solve": _stage_solve,
}


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.7g}"


def _text_summary(report: dict) -> str:
    lines = []
    cfg = report["config"]
    lines.append("msebarrier report")
    lines.append("=" * 17)
    lines.append(f"mode: {cfg['mode']}")
    lines.append(f"phi: {cfg['phi']}")
    for name in _STAGE_ORDER:
        rec = report["stages"].get(name)
        if rec is None:
            continue
        status = rec["status"].upper()
        lines.append("")
        lines.append(f"[{name}] {status}"
                     + (f" ({rec.get('reason', '')})" if status != "OK" else ""))
        if status != "OK":
            continue
        if name == "geometry" and "classification" in rec:
            c = rec["classification"]
            lines.append(f"  kappa_min ≈ {_fmt(c['kappa_min'])}   "
                         f"max|kappa| ≈ {_fmt(c['kappa_max_abs'])}")
            lines.append(f"  concave arcs: {len(c['negative_arcs'])}")
            if rec.get("exterior"):
                lines.append(f"  exterior radius r ≈ {_fmt(rec['exterior']['r'])}")
        elif name == "stats":
            lines.append(f"  tau ≈ {_fmt(rec['tau'])}   omega ≈ {_fmt(rec['omega'])}")
        elif name == "criterion":
            v = rec["values"]
            if "theta" in v:
                lines.append(f"  theta ≈ {_fmt(v['theta'])}")
                lines.append(f"  delta_max ≈ {_fmt(v['delta_max'])}")
            if v.get("bound_mo") is not None:
                lines.append(f"  bound(mo, δ={_fmt(rec['chosen_delta'])}) ≈ "
                             f"{_fmt(v['bound_mo'])}")
            if v.get("bound_hc") is not None:
                lines.append(f"  bound(hc) ≈ {_fmt(v['bound_hc'])}   "
                             f"bound(hc2) ≈ {_fmt(v['bound_hc2'])}")
            if v.get("she_value") is not None:
                lines.append(f"  radius form (she) ≈ {_fmt(v['she_value'])}")
            if v.get("js_B") is not None:
                lines.append(f"  B_JS ≈ {_fmt(v['js_B'])}")
            for c in rec.get("conditions", ()):
                verdict_s = "pass" if c["passed"] else "FAIL"
                lines.append(f"    condition {c['name']}: margin {_fmt(c['margin'])} "
                             f"-> {verdict_s}")
            if "branch" in rec:
                lines.append(f"  verdict: {rec['branch']} "
                             f"({'solvable' if rec['solvable'] else 'not established'})")
        elif name == "barrier":
            lines.append(f"  certified: {rec['certified']}")
            for r in rec["reports"]:
                lines.append(f"    tangency t ≈ {_fmt(r['sphere']['t_tangency'])}: "
                             f"max M(w) = {_fmt(r['upper']['max_operator'])}, "
                             f"min M(xi) = {_fmt(r['lower']['min_operator'])}")
        elif name == "solve":
            ch = rec["checks"]
            lines.append(f"  oscillation ≈ {_fmt(rec['oscillation'])}   "
                         f"richardson ratio ≈ {_fmt(rec['richardson_ratio'])}")
            lines.append(f"  max principle: {'ok' if ch['max_principle_ok'] else 'VIOLATED'}"
                         f"   barrier bracket: {'ok' if ch['barrier_ok'] else 'VIOLATED'}")
    lines.append("")
    return "\n".join(lines)


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _csv_bundle(report: dict, config: Config, stem: Path) -> list[str]:
    """Recompute the plot data deterministically from the report's config."""
    written = []
    cfg = config
    if cfg.mode != "euclidean-2d":
        return written
    domain = _build_domain(cfg)
    ts = np.linspace(0.0, domain.boundary.period, 2048, endpoint=False)
    pos = domain.boundary.points(ts)
    kap = domain.boundary.orientation_sign * dom.signed_curvature_many(domain.boundary, ts)
    path = stem.with_name(stem.name + "_boundary.csv")
    _write_csv(path, "t,x,y,kappa", zip(ts, pos[0], pos[1], kap))
    written.append(str(path))

    crit = report["stages"].get("criterion", {})
    if crit.get("status") == "ok" and "theta" in crit.get("values", {}):
        v = crit["values"]
        delta = crit["chosen_delta"]
        n = config.output.psi_grid
        s = np.linspace(0.0, delta, n + 1)
        psi, dpsi, ddpsi = bar.psi_closed_form(v["rho"], v["sigma"], s)
        path = stem.with_name(stem.name + "_psi.csv")
        _write_csv(path, "s,psi,dpsi,ddpsi", zip(s, psi, dpsi, ddpsi))
        written.append(str(path))

    solve_rec = report["stages"].get("solve", {})
    if solve_rec.get("status") == "ok":
        lv = solve_rec["levels"][-2] if len(solve_rec["levels"]) >= 2 else solve_rec["levels"][-1]
        mesh = mse.triangulate_star(domain, lv["n_radial"], lv["n_angular"])
        phi = parse(cfg.phi, ("x", "y"))
        res = mse.solve(mesh, phi, mse.SolveOptions(grad_tol=cfg.solver.grad_tol,
                                                    max_iterations=cfg.solver.max_iterations))
        path = stem.with_name(stem.name + "_solution.csv")
        _write_csv(path, "x,y,u", zip(mesh.nodes[:, 0], mesh.nodes[:, 1], res.u))
        written.append(str(path))
        path = stem.with_name(stem.name + "_triangles.csv")
        with open(path, "w") as fh:
            fh.write("i0,i1,i2\n")
            for tri in mesh.triangles:
                fh.write(f"{tri[0]},{tri[1]},{tri[2]}\n")
        written.append(str(path))
    return written


def export(report: dict, fmt: str = "json", out=None,
           normalize_timings: bool = False) -> str | None:
    """Serialize the report: 'json' (machine), 'text' (human summary) or
    'csv-bundle' (plot data next to ``out``).  Returns the rendered string
    for json/text."""
    rep = dict(report)
    if normalize_timings:
        rep["timings"] = {k: 0.0 for k in report.get("timings", {})}
    if fmt == "json":
        text = json.dumps(rep, indent=2, sort_keys=True, allow_nan=True)
        if out is not None:
            Path(out).write_text(text + "\n")
        return text
    if fmt == "text":
        text = _text_summary(rep)
        if out is not None:
            Path(out).write_text(text)
        return text
    if fmt == "csv-bundle":
        if out is None:
            raise ValueError("csv-bundle needs an output path stem")
        stem = Path(out)
        config = config_from_dict(rep["config"])
        files = _csv_bundle(rep, config, stem)
        path = stem.with_name(stem.name + "_report.json")
        path.write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
        files.append(str(path))
        return "\n".join(files)
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="msebarrier",
        description="Solvability analysis for the minimal surface equation "
                    "on non-mean-convex planar domains")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in (
            ("check", "criterion evaluation only"),
            ("barrier", "criterion plus barrier certification"),
            ("solve", "criterion, barrier and the FEM cross-check"),
            ("report", "full pipeline")):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", default=None,
                       help="JSON config path (default: bundled example)")
        p.add_argument("--out", default=None, help="output path (stem for csv-bundle)")
        p.add_argument("--format", default="json",
                       choices=["json", "text", "csv-bundle"])
        p.add_argument("--delta", type=float, default=None,
                       help="override the barrier depth")
        p.add_argument("--threads", type=int, default=1,
                       help="recorded in the report; evaluation is vectorized "
                            "and bit-stable regardless")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-timings", action="store_true",
                       help="zero out timings for byte-stable output")
    args = parser.parse_args(argv)

    try:
        cfg_path = args.config if args.config is not None else bundled_config_path()
        config = load_config(cfg_path)
        overrides = {}
        if args.delta is not None:
            overrides["delta"] = args.delta
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            raw = config.to_dict()
            raw.update(overrides)
            config = config_from_dict(raw)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    report = run(config, args.verb)
    report["threads"] = args.threads
    rendered = export(report, args.format, args.out,
                      normalize_timings=args.no_timings)
    if args.out is None and rendered is not None:
        print(rendered)
    failed = any(rec.get("status") == "failed"
                 for rec in report["stages"].values())
    return 2 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
