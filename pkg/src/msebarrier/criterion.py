"""Scalar constants and solvability conditions for the Dirichlet problem of
the minimal surface equation on domains whose boundary has concave arcs.

Given the boundary-data statistics (tau, omega) and the geometry of the
concave boundary part (lambda_r, mu_r, r, R), this module evaluates

* the derived constants rho, a, b, c, theta, sigma and the admissible
  barrier depth delta_max,
* the oscillation bound of the exterior-disk barrier at a chosen depth,
* its closed forms when R is infinite,
* the purely geometric reformulation (separating data from domain),
* the classical Jenkins-Serrin oscillation bound for comparison,

and aggregates everything into a Verdict.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import barrier as _barrier
from .domain2d import (
    BoundaryClassification,
    Domain2D,
    ExteriorRadiusResult,
    NotConverged,
    classify_boundary,
    closure_samples,
    exterior_radius,
)
from .exprcalc import Expr, eval_curve_jet_many, eval_jet2_many

__all__ = [
    "DataStats",
    "GeometrySummary",
    "CriterionConstants",
    "CorollaryResult",
    "JenkinsSerrinResult",
    "Verdict",
    "DegenerateData",
    "DeltaOutOfRange",
    "RequiresInfiniteR",
    "TAU_MIN",
    "data_stats",
    "constants",
    "osc_bound_mo",
    "hadamard_bounds",
    "corollary_sh",
    "jenkins_serrin_b",
    "js_graph_radius_verify",
    "verdict",
]

TAU_MIN = 1e-8


class DegenerateData(Exception):
    """tau is below TAU_MIN; the constants would divide by rho -> 0."""


class DeltaOutOfRange(Exception):
    """Requested barrier depth is outside (0, delta_max)."""


class RequiresInfiniteR(Exception):
    """Closed-form bounds assume the depth cap ln(theta)/(rho (theta-1))."""


@dataclass(frozen=True)
class DataStats:
    """Suprema of the boundary data over the closed domain."""

    tau: float
    omega: float
    sup_grad: float
    sup_hess: float
    sup_lap: float
    refine_error: float


@dataclass(frozen=True)
class GeometrySummary:
    """Geometry of the concave boundary part as seen by the criterion."""

    n: int
    lambda_r: float
    mu_r: float
    r: float
    R: float = math.inf
    source: str = "computed-from-domain"  # or "user-supplied"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        if not self.lambda_r < 0:
            raise ValueError("lambda_r must be negative")
        if not self.mu_r > 0:
            raise ValueError("mu_r must be positive")
        if not self.r > 0:
            raise ValueError("r must be positive")

    @classmethod
    def euclidean(cls, r: float, n: int = 2, source: str = "computed-from-domain"):
        return cls(n=n, lambda_r=-1.0 / r, mu_r=1.0 / r, r=r, R=math.inf, source=source)


@dataclass(frozen=True)
class CriterionConstants:
    rho: float
    a: float
    b: float
    c: float
    theta: float
    sigma: float
    delta_max: float
    n: int

    def as_dict(self) -> dict:
        return {"rho": self.rho, "a": self.a, "b": self.b, "c": self.c,
                "theta": self.theta, "sigma": self.sigma,
                "delta_max": self.delta_max, "n": self.n}


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    bound: float
    value: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.bound - self.value


@dataclass(frozen=True)
class CorollaryResult:
    sh_lhs: float
    sh_pass: bool
    she_value: float | None
    she_pass: bool
    she_reason: str = ""


@dataclass(frozen=True)
class JenkinsSerrinResult:
    A: float
    C: float
    H: float
    B: float
    l: float
    l_prime: float


@dataclass(frozen=True)
class Verdict:
    branch: str  # mean-convex | criterion-mo | corollary-sh | trivial-constant | fails
    solvable: bool
    chosen_delta: float | None
    bound_mo: float | None
    bound_hc: float | None
    bound_hc2: float | None
    sh_lhs: float | None
    she_value: float | None
    js_B: float | None
    omega: float | None
    conditions: tuple[ConditionCheck, ...] = ()
    notes: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# data statistics
# ---------------------------------------------------------------------------

def _stats_at(phi: Expr, pts: np.ndarray) -> tuple[float, float, float, float, float]:
    val, grad, hess = eval_jet2_many(phi, pts)
    sup_grad = float(np.hypot(grad[0], grad[1]).max())
    # operator norm of a symmetric 2x2: max |eigenvalue|
    half_tr = 0.5 * (hess[0, 0] + hess[1, 1])
    disc = np.sqrt(0.25 * (hess[0, 0] - hess[1, 1]) ** 2 + hess[0, 1] ** 2)
    sup_hess = float(np.maximum(np.abs(half_tr + disc), np.abs(half_tr - disc)).max())
    sup_lap = float(np.abs(hess[0, 0] + hess[1, 1]).max())
    return float(val.max()), float(val.min()), sup_grad, sup_hess, sup_lap


def data_stats(phi: Expr, domain: Domain2D, density: int = 96) -> DataStats:
    """Estimate tau and omega by sampling the closure, with one refinement
    doubling as a convergence certificate.

    Raises NotConverged when the last doubling still moves tau or omega by
    more than 1e-3 relative.
    """
    coarse = _stats_at(phi, closure_samples(domain, density))
    fine = _stats_at(phi, closure_samples(domain, 2 * density))
    sup_v, inf_v, sup_grad, sup_hess, sup_lap = fine
    tau = max(sup_lap, sup_grad, sup_hess)
    omega = sup_v - inf_v
    tau_c = max(coarse[4], coarse[2], coarse[3])
    omega_c = coarse[0] - coarse[1]
    err = max(abs(tau - tau_c), abs(omega - omega_c))
    scale = max(tau, omega)
    if err > 1e-3 * scale:
        raise NotConverged(
            f"suprema changed by {err:.2e} (> 1e-3 * {scale:.3g}) on the last doubling")
    return DataStats(tau, omega, sup_grad, sup_hess, sup_lap, err)


# ---------------------------------------------------------------------------
# constants and bounds
# ---------------------------------------------------------------------------

def constants(stats: DataStats, geom: GeometrySummary) -> CriterionConstants:
    """Direct evaluation of rho, a, b, c, theta, sigma and delta_max."""
    tau = stats.tau
    if tau <= TAU_MIN:
        raise DegenerateData(f"tau = {tau:.3g} <= {TAU_MIN:g}")
    rho = tau * (1.0 + 2.0 * tau ** 2)
    a = (2.0 * tau ** 3 + 4.0 * tau ** 2 + 3.0 * tau) / rho
    b = -(tau ** 2 + 2.0 * tau + 2.0) / rho
    c = tau ** 2 / rho
    theta = a + b * (geom.n - 1) * geom.lambda_r + c * geom.mu_r
    sigma = rho * (1.0 - theta)
    cap = math.log(theta) / (rho * (theta - 1.0))
    delta_max = min(geom.R - geom.r, cap)
    return CriterionConstants(rho, a, b, c, theta, sigma, delta_max, geom.n)


def osc_bound_mo(k: CriterionConstants, delta: float) -> float:
    """Oscillation bound at barrier depth delta:

        [theta (1 - exp(-rho (theta-1) delta)) - rho (theta-1) delta]
        / (rho (theta-1)^2)

    The value is checked against the barrier profile height psi(delta) built
    from the same constants; the two are one identity and must agree to 1e-12.
    """
    if not 0.0 < delta < k.delta_max:
        raise DeltaOutOfRange(f"delta = {delta:.6g} not in (0, {k.delta_max:.6g})")
    x = k.rho * (k.theta - 1.0) * delta
    bound = (k.theta * (1.0 - math.exp(-x)) - x) / (k.rho * (k.theta - 1.0) ** 2)
    psi, _, _ = _barrier.psi_closed_form(k.rho, k.sigma, delta)
    if abs(bound - psi) > 1e-12 * max(1.0, abs(bound)):
        raise AssertionError(
            f"oscillation bound {bound!r} disagrees with barrier height {psi!r}")
    return bound


def hadamard_bounds(k: CriterionConstants, R: float = math.inf) -> dict:
    """Closed-form bounds available when R is infinite:

    hc  = (theta - ln theta - 1) / (rho (theta-1)^2)   (depth cap attained)
    hc2 = (a - ln a - 1) / (rho (theta-1)^2)           (geometry-free numerator)
    """
    if not math.isinf(R):
        raise RequiresInfiniteR("closed forms assume the depth cap is attainable (R = inf)")
    denom = k.rho * (k.theta - 1.0) ** 2
    hc = (k.theta - math.log(k.theta) - 1.0) / denom
    hc2 = (k.a - math.log(k.a) - 1.0) / denom
    return {"hc": hc, "hc2": hc2}


def corollary_sh(k: CriterionConstants, stats: DataStats,
                 geom: GeometrySummary) -> CorollaryResult:
    """Condition separating the data side from the domain side.

    sh_lhs depends only on the data (and mu_r); passing means
    sh_lhs <= lambda_r with a negative left-hand side.  In the Euclidean
    case the same inequality rearranges into a bound on the disk radius,
    0 < she_value <= r.
    """
    if stats.omega <= 0:
        raise ValueError("omega must be positive")
    if stats.tau <= TAU_MIN:
        raise DegenerateData(f"tau = {stats.tau:.3g} <= {TAU_MIN:g}")
    root = math.sqrt(k.a - math.log(k.a) - 1.0)
    s = math.sqrt(k.rho * stats.omega)
    sh_lhs = (root - s * (k.a + k.c * geom.mu_r - 1.0)) / (s * k.b * (geom.n - 1))
    sh_pass = sh_lhs <= geom.lambda_r and sh_lhs < 0
    denom = root - (k.a - 1.0) * s
    if denom <= 0:
        return CorollaryResult(sh_lhs, sh_pass, None, False,
                               "nonpositive denominator in the radius form: "
                               f"(a-1) sqrt(rho omega) = {(k.a - 1) * s:.6g} >= "
                               f"sqrt(a - ln a - 1) = {root:.6g}")
    she_value = s * (k.c - k.b * (geom.n - 1)) / denom
    she_pass = 0.0 < she_value <= geom.r
    return CorollaryResult(sh_lhs, sh_pass, she_value, she_pass)


def jenkins_serrin_b(l: float, k_bound: float, sup_d2phi: float, sup_dphi: float,
                     h_script: float, n: int, l_prime: float | None = None,
                     ) -> JenkinsSerrinResult:
    """Classical oscillation bound B built from the chord-graph radius l.

    l_prime defaults to l / sqrt(2); it can be overridden when a coarser
    estimate of the graph radius is preferred.  B is +inf when the boundary
    has no concave part (h_script <= 0).
    """
    if l <= 0:
        raise ValueError("l must be positive")
    lp = l / math.sqrt(2.0) if l_prime is None else float(l_prime)
    A = max(math.pi / lp, k_bound, sup_d2phi)
    C = A / (1.0 + sup_dphi ** 2) ** (8 * n)
    if h_script <= 0:
        B = math.inf
    elif C <= h_script:
        B = (C / h_script) / (16.0 * n * A)
    else:
        B = (1.0 + math.log(C / h_script)) / (16.0 * n * A)
    return JenkinsSerrinResult(A, C, h_script, B, l, lp)


def js_graph_radius_verify(domain: Domain2D, l: float, n_samples: int = 1024) -> bool:
    """Check that around every boundary point the boundary trace inside the
    ball of radius l is a single component, graphed over the tangent line
    with slope below 1."""
    if l <= 0:
        raise ValueError("l must be positive")
    period = domain.boundary.period
    ts = np.linspace(0.0, period, n_samples, endpoint=False)
    pos, vel, _ = eval_curve_jet_many(domain.boundary.x_expr, domain.boundary.y_expr, ts)
    speed = np.hypot(vel[0], vel[1])
    tang = vel / speed
    for i in range(n_samples):
        dx = pos[0] - pos[0, i]
        dy = pos[1] - pos[1, i]
        near = np.hypot(dx, dy) < l
        # single circular run of samples inside the ball
        runs = int(np.sum(near & ~np.roll(near, 1)))
        if runs != 1:
            return False
        # rotate the run to be contiguous, project on tangent/normal at p
        order = np.roll(np.arange(n_samples), -int(np.argmin(near)))  # start outside
        idx = order[near[order]]
        u = dx[idx] * tang[0, i] + dy[idx] * tang[1, i]
        g = -dx[idx] * tang[1, i] + dy[idx] * tang[0, i]
        du = np.diff(u)
        if not (np.all(du > 0) or np.all(du < 0)):
            return False
        if np.any(np.abs(np.diff(g)) >= np.abs(du)):
            return False
    return True


# ---------------------------------------------------------------------------
# aggregate verdict
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerdictOptions:
    delta_override: float | None = None
    stats_density: int = 96
    classify_samples: int = 1024
    js_l: float | None = None
    js_l_prime: float | None = None
    js_overrides: dict = field(default_factory=dict)


def _optimal_delta(k: CriterionConstants) -> float:
    """The bound is increasing in delta, so the best admissible depth sits
    just under the cap; a golden-section pass guards against cap = inf edge
    cases and confirms monotonicity numerically."""
    hi = k.delta_max * (1.0 - 1e-6)
    lo = hi * 1e-6
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    f = lambda d: osc_bound_mo(k, d)
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(60):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        if hi - lo < 1e-12 * k.delta_max:
            break
    return 0.5 * (lo + hi)


def verdict(domain: Domain2D, phi: Expr, options: VerdictOptions | None = None,
            precomputed: dict | None = None) -> Verdict:
    """Full solvability assessment for one domain and boundary data.

    ``precomputed`` may carry 'classification', 'exterior', 'stats' from an
    earlier pipeline stage to avoid recomputation.
    """
    opts = options or VerdictOptions()
    pre = precomputed or {}
    cls: BoundaryClassification = (pre.get("classification")
                                   or classify_boundary(domain, opts.classify_samples))
    conditions: list[ConditionCheck] = []
    notes: list[str] = []

    if not cls.negative_arcs:
        return Verdict("mean-convex", True, None, None, None, None, None, None,
                       None, None, (), ("boundary is mean-convex: solvable for any C2 data",))

    ext: ExteriorRadiusResult = pre.get("exterior") or exterior_radius(domain, cls)
    geom = GeometrySummary.euclidean(ext.r)
    stats: DataStats = pre.get("stats") or data_stats(phi, domain, opts.stats_density)

    if stats.tau <= TAU_MIN:
        if stats.omega < 1e-8:
            return Verdict("trivial-constant", True, None, None, None, None, None,
                           None, None, stats.omega, (),
                           ("data is constant to machine precision: the constant solves it",))
        raise DegenerateData(
            f"tau = {stats.tau:.3g} below {TAU_MIN:g} but omega = {stats.omega:.3g}")

    k = constants(stats, geom)
    delta = opts.delta_override if opts.delta_override is not None else _optimal_delta(k)
    bound_mo = osc_bound_mo(k, delta)
    conditions.append(ConditionCheck("mo", bound_mo, stats.omega,
                                     stats.omega <= bound_mo))
    hb = hadamard_bounds(k, geom.R)
    conditions.append(ConditionCheck("hc", hb["hc"], stats.omega,
                                     stats.omega <= hb["hc"]))
    conditions.append(ConditionCheck("hc2", hb["hc2"], stats.omega,
                                     stats.omega <= hb["hc2"]))
    cor = corollary_sh(k, stats, geom)
    conditions.append(ConditionCheck("sh", geom.lambda_r, cor.sh_lhs, cor.sh_pass))
    if cor.she_value is not None:
        conditions.append(ConditionCheck("she", geom.r, cor.she_value, cor.she_pass))
    elif cor.she_reason:
        notes.append(f"she: {cor.she_reason}")

    js_B = None
    if opts.js_l is not None:
        ov = opts.js_overrides
        js = jenkins_serrin_b(
            opts.js_l,
            ov.get("curvature_bound", cls.kappa_max_abs),
            ov.get("sup_d2phi", stats.sup_hess),
            ov.get("sup_dphi", stats.sup_grad),
            ov.get("mean_curv_neg", -cls.kappa_min),
            geom.n,
            l_prime=opts.js_l_prime)
        js_B = js.B
        conditions.append(ConditionCheck("jenkins-serrin", js.B, stats.omega,
                                         stats.omega <= js.B))

    if conditions[0].passed:
        branch, solvable = "criterion-mo", True
    elif cor.sh_pass:
        branch, solvable = "corollary-sh", True
    else:
        branch, solvable = "fails", False

    return Verdict(branch, solvable, delta, bound_mo, hb["hc"], hb["hc2"],
                   cor.sh_lhs, cor.she_value, js_B, stats.omega,
                   tuple(conditions), tuple(notes))
