"""Bounded planar domains given by a closed parametric C^2 boundary curve.

Provides signed curvature, classification of the non-convex part of the
boundary, the largest uniform exterior-disk radius along that part, a
point-membership test, and second-order jets of the distance to an exterior
disk (the geometric input of the barrier construction).

Curvature is always evaluated from exact derivatives of the parametrization;
the dense boundary polyline is used only for membership and disk-fit tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .exprcalc import Expr, Jet2, eval_curve_jet_many, eval_jet2_many, parse

__all__ = [
    "BoundaryCurve",
    "Domain2D",
    "BoundaryClassification",
    "ExteriorSphere",
    "ExteriorRadiusResult",
    "DegenerateVelocity",
    "NotConverged",
    "NoNegativePart",
    "FitFailure",
    "CenterSingularity",
    "EmptyRegion",
    "signed_curvature",
    "signed_curvature_many",
    "classify_boundary",
    "bisect_largest",
    "exterior_radius",
    "contains",
    "contains_many",
    "closure_samples",
    "distance_jet",
    "distance_jet_many",
    "sample_region",
]


class DegenerateVelocity(Exception):
    """The curve velocity vanishes at the requested parameter."""


class NotConverged(Exception):
    """Sampling refinement hit its cap before the requested stability."""


class NoNegativePart(Exception):
    """The boundary has no arc of negative curvature."""


class FitFailure(Exception):
    """No exterior disk of any radius fits (boundary self-proximity)."""


class CenterSingularity(Exception):
    """Distance jet requested at the disk center."""


class EmptyRegion(Exception):
    """No sample point satisfies the region predicates at this density."""


_CLOSURE_TOL = 1e-9
_MIN_SPEED = 1e-12


@dataclass(frozen=True)
class BoundaryCurve:
    """Closed parametric curve t -> (x(t), y(t)) on [0, period]."""

    x_expr: Expr
    y_expr: Expr
    period: float = 2.0 * math.pi
    counterclockwise: bool = field(default=True, compare=False)

    @classmethod
    def from_exprs(cls, x_src: str, y_src: str, period: float = 2.0 * math.pi):
        probe = cls(parse(x_src, ("t",)), parse(y_src, ("t",)), period)
        probe.validate()
        return cls(probe.x_expr, probe.y_expr, period, probe.detect_ccw())

    @classmethod
    def from_radial(cls, radius_src: str, period: float = 2.0 * math.pi):
        """Build the curve r = xi(t) traced as xi(t) * (cos t, sin t)."""
        xi = f"({radius_src})"
        return cls.from_exprs(f"{xi} * cos(t)", f"{xi} * sin(t)", period)

    def points(self, ts: np.ndarray) -> np.ndarray:
        pos, _, _ = eval_curve_jet_many(self.x_expr, self.y_expr, ts)
        return pos

    def validate(self, n_check: int = 512) -> None:
        p0 = self.points(np.array([0.0, self.period]))
        gap = float(np.hypot(*(p0[:, 1] - p0[:, 0])))
        if gap > _CLOSURE_TOL:
            raise ValueError(f"curve is not closed: |gamma(0)-gamma(T)| = {gap:.3e}")
        ts = np.linspace(0.0, self.period, n_check, endpoint=False)
        _, vel, _ = eval_curve_jet_many(self.x_expr, self.y_expr, ts)
        speed = np.hypot(vel[0], vel[1])
        if speed.min() <= _MIN_SPEED:
            raise ValueError("curve is not regular: |gamma'(t)| vanishes on the sample grid")

    def detect_ccw(self, n: int = 2048) -> bool:
        """Orientation from the signed (shoelace) area of a dense polygon."""
        ts = np.linspace(0.0, self.period, n, endpoint=False)
        p = self.points(ts)
        x, y = p
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        return bool(area2 > 0)

    @property
    def orientation_sign(self) -> float:
        """+1 for counterclockwise parametrization, -1 for clockwise."""
        return 1.0 if self.counterclockwise else -1.0


@dataclass(frozen=True)
class Domain2D:
    """Bounded domain enclosed by a simple closed C^2 boundary curve."""

    boundary: BoundaryCurve
    interior_hint: tuple[float, float] | None = None
    radial_expr: Expr | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_simple(self.boundary)

    @classmethod
    def from_radial(cls, radius_src: str, period: float = 2.0 * math.pi):
        curve = BoundaryCurve.from_radial(radius_src, period)
        return cls(curve, interior_hint=(0.0, 0.0), radial_expr=parse(radius_src, ("t",)))

    @classmethod
    def from_exprs(cls, x_src: str, y_src: str, period: float = 2.0 * math.pi,
                   interior_hint: tuple[float, float] | None = None):
        return cls(BoundaryCurve.from_exprs(x_src, y_src, period), interior_hint)

    def boundary_polyline(self, n: int = 4096) -> np.ndarray:
        """Dense boundary sample, shape (2, n), used for membership/fit tests."""
        ts = np.linspace(0.0, self.boundary.period, n, endpoint=False)
        return self.boundary.points(ts)


def _check_simple(curve: BoundaryCurve, n: int = 512) -> None:
    """Reject curves whose sampled segments cross (non-simple boundary)."""
    ts = np.linspace(0.0, curve.period, n, endpoint=False)
    p = curve.points(ts)
    q = np.roll(p, -1, axis=1)
    # proper segment-segment intersection test for all non-adjacent pairs
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))  # first and last segments are adjacent
    i, j = i[keep], j[keep]

    def orient(ax, ay, bx, by, cx, cy):
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    d1 = orient(p[0, i], p[1, i], q[0, i], q[1, i], p[0, j], p[1, j])
    d2 = orient(p[0, i], p[1, i], q[0, i], q[1, i], q[0, j], q[1, j])
    d3 = orient(p[0, j], p[1, j], q[0, j], q[1, j], p[0, i], p[1, i])
    d4 = orient(p[0, j], p[1, j], q[0, j], q[1, j], q[0, i], q[1, i])
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    if crossing.any():
        k = int(np.argmax(crossing))
        raise ValueError(
            f"boundary is not simple: segments at t = {ts[i[k]]:.6g} and "
            f"t = {ts[j[k]]:.6g} intersect")


@dataclass(frozen=True)
class BoundaryClassification:
    """Signed-curvature profile and the arcs where the boundary is concave."""

    ts: np.ndarray                     # sample parameters
    points: np.ndarray                 # (2, n)
    kappa: np.ndarray                  # inner-normal signed curvature
    kappa_min: float
    kappa_max_abs: float
    negative_arcs: tuple[tuple[float, float], ...]  # closures of {kappa < -eps}
    eps_neg: float
    n_samples: int

    @property
    def samples(self):
        return list(zip(self.ts.tolist(), self.points.T.tolist(), self.kappa.tolist()))


@dataclass(frozen=True)
class ExteriorSphere:
    """A disk of radius r tangent to the boundary from outside at p."""

    t_tangency: float
    p: np.ndarray   # boundary point, (2,)
    p0: np.ndarray  # center, (2,)
    r: float


@dataclass(frozen=True)
class ExteriorRadiusResult:
    r: float
    spheres: tuple[ExteriorSphere, ...]          # one per negative-arc extremum
    sample_spheres: tuple[ExteriorSphere, ...]   # per sampled concave point, on demand
    osculating_cap: float
    cap_limited: bool


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def signed_curvature_many(curve: BoundaryCurve, ts: np.ndarray) -> np.ndarray:
    """kappa = (x'y'' - y'x'') / |gamma'|^3 at each t, as parametrized.

    For a counterclockwise curve this is the curvature with respect to the
    inner normal (positive where the enclosed region is convex); reversing
    the orientation negates it.
    """
    ts = np.asarray(ts, dtype=float)
    _, vel, acc = eval_curve_jet_many(curve.x_expr, curve.y_expr, ts)
    speed = np.hypot(vel[0], vel[1])
    if np.any(speed < _MIN_SPEED):
        bad = float(ts[int(np.argmin(speed))])
        raise DegenerateVelocity(f"|gamma'({bad})| < {_MIN_SPEED:g}")
    return (vel[0] * acc[1] - vel[1] * acc[0]) / speed ** 3


def signed_curvature(curve: BoundaryCurve, t: float) -> float:
    return float(signed_curvature_many(curve, np.array([t]))[0])


def _inner_curvature_many(domain: Domain2D, ts: np.ndarray) -> np.ndarray:
    # normalize to the inner orientation regardless of how t runs
    return domain.boundary.orientation_sign * signed_curvature_many(domain.boundary, ts)


def classify_boundary(domain: Domain2D, n_samples: int = 1024,
                      eps_neg: float = 1e-8) -> BoundaryClassification:
    """Sample the curvature profile and extract the concave arcs.

    The sample count doubles until the curvature minimum moves by less than
    1e-4 between refinements (cap 2**20).  Arcs are maximal intervals with
    kappa < -eps_neg, extended to the adjacent zero crossings of kappa.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    period = domain.boundary.period
    cap = 2 ** 20
    n = int(n_samples)
    prev_min = None
    while True:
        ts = np.linspace(0.0, period, n, endpoint=False)
        kappa = _inner_curvature_many(domain, ts)
        kmin = float(kappa.min())
        if prev_min is not None and abs(kmin - prev_min) < 1e-4:
            break
        if n >= cap:
            raise NotConverged(
                f"kappa_min still moving by {abs(kmin - (prev_min or kmin)):.2e} at {n} samples")
        prev_min = kmin
        n *= 2
    # polish the extrema beyond grid resolution
    kmin = _polish_extremum(domain, ts, kappa, np.argmin(kappa), minimize=True)
    kmax_abs = max(abs(kmin),
                   abs(_polish_extremum(domain, ts, kappa, np.argmax(kappa), minimize=False)))
    arcs = _negative_arcs(domain, ts, kappa, eps_neg)
    pos = domain.boundary.points(ts)
    return BoundaryClassification(ts, pos, kappa, kmin, kmax_abs, tuple(arcs),
                                  eps_neg, n)


def _polish_extremum(domain, ts, kappa, idx, minimize):
    """Parabolic refinement of a sampled extremum of kappa."""
    period = domain.boundary.period
    n = len(ts)
    h = period / n
    t0 = ts[idx]
    f = lambda t: float(_inner_curvature_many(domain, np.array([t % period]))[0])
    a, b, c = f(t0 - h), float(kappa[idx]), f(t0 + h)
    denom = a - 2 * b + c
    t_star = t0 if denom == 0 else t0 + 0.5 * h * (a - c) / denom
    if abs(t_star - t0) > h:
        t_star = t0
    cand = [b, f(t_star)]
    return min(cand) if minimize else max(cand)


def _negative_arcs(domain, ts, kappa, eps_neg):
    """Maximal parameter intervals with kappa < -eps_neg, closed at kappa = 0."""
    period = domain.boundary.period
    n = len(ts)
    neg = kappa < -eps_neg
    if not neg.any():
        return []
    if neg.all():
        return [(0.0, period)]
    f = lambda t: float(_inner_curvature_many(domain, np.array([t % period]))[0])
    arcs = []
    # walk circularly, find each maximal run of negative samples
    starts = np.nonzero(~np.roll(neg, 1) & neg)[0]
    for i0 in starts:
        i1 = i0
        while neg[(i1 + 1) % n]:
            i1 = i1 + 1  # may exceed n when the run wraps
        lo = _zero_cross(f, ts[(i0 - 1) % n], period / n)
        hi = _zero_cross(f, ts[i1 % n], period / n)
        arcs.append((lo % period, hi % period))
    arcs.sort()
    return arcs


def _zero_cross(f, t_left, h):
    """Root of kappa in [t_left, t_left + h]; falls back to the midpoint."""
    a, b = t_left, t_left + h
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        return 0.5 * (a + b)
    return float(brentq(f, a, b, xtol=1e-12))


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

_BOUNDARY_BAND = 1e-9


def contains_many(domain: Domain2D, xy: np.ndarray, n_boundary: int = 4096) -> np.ndarray:
    """Classify points as +1 (inside), 0 (boundary), -1 (outside).

    Uses the exact radial profile when the domain was built in radial form,
    otherwise a winding test against the sampled boundary polygon.  Points
    within 1e-9 of the boundary report as boundary.
    """
    xy = np.asarray(xy, dtype=float)
    if xy.ndim == 1:
        xy = xy[:, None]
    if domain.radial_expr is not None:
        theta = np.arctan2(xy[1], xy[0]) % (2.0 * math.pi)
        rad = np.hypot(xy[0], xy[1])
        xi, _, _ = eval_jet2_many(domain.radial_expr, theta[None, :])
        res = rad - xi
        out = np.where(res > 0, -1, 1).astype(np.int8)
        out[np.abs(res) <= _BOUNDARY_BAND * np.maximum(1.0, rad)] = 0
        return out
    period = domain.boundary.period
    ts = np.linspace(0.0, period, n_boundary, endpoint=False)
    poly = domain.boundary.points(ts)
    out, dist, near = _polygon_classify(poly, xy)
    # the polyline sits a chord sagitta away from the true curve: resolve
    # points inside that ambiguity band against the exact parametrization
    seg = float(np.hypot(np.diff(poly[0], append=poly[0, 0]),
                         np.diff(poly[1], append=poly[1, 0])).max())
    ambiguous = np.nonzero(dist <= max(10.0 * _BOUNDARY_BAND, seg ** 2))[0]
    h = period / n_boundary
    for i in ambiguous:
        t0 = ts[near[i]]
        res = minimize_scalar(
            lambda t: float(np.sum((domain.boundary.points(np.array([t % period]))[:, 0]
                                    - xy[:, i]) ** 2)),
            bounds=(t0 - 2 * h, t0 + 2 * h), method="bounded",
            options={"xatol": 1e-14})
        t_star = float(res.x) % period
        q = domain.boundary.points(np.array([t_star]))[:, 0]
        gap = xy[:, i] - q
        if np.hypot(*gap) <= _BOUNDARY_BAND:
            out[i] = 0
        else:
            nu = _outward_normals(domain, np.array([t_star]))[:, 0]
            out[i] = -1 if float(gap @ nu) > 0 else 1
    return out


def _polygon_classify(poly: np.ndarray, xy: np.ndarray):
    px, py = poly
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    out = np.empty(xy.shape[1], dtype=np.int8)
    dist = np.empty(xy.shape[1])
    near = np.empty(xy.shape[1], dtype=np.int64)
    chunk = max(1, int(2_000_000 // max(1, poly.shape[1])))
    for lo in range(0, xy.shape[1], chunk):
        X = xy[0, lo:lo + chunk][:, None]
        Y = xy[1, lo:lo + chunk][:, None]
        # even-odd crossing count against the polygon edges
        cond = (py[None, :] > Y) != (qy[None, :] > Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = px[None, :] + (Y - py[None, :]) * (qx - px)[None, :] / (qy - py)[None, :]
        crossing = cond & (X < x_int)
        inside = crossing.sum(axis=1) % 2 == 1
        # distance to the polyline for the boundary band
        ex, ey = (qx - px)[None, :], (qy - py)[None, :]
        ll = ex * ex + ey * ey
        tt = np.clip(((X - px[None, :]) * ex + (Y - py[None, :]) * ey) / ll, 0.0, 1.0)
        d2 = (X - (px[None, :] + tt * ex)) ** 2 + (Y - (py[None, :] + tt * ey)) ** 2
        near[lo:lo + chunk] = d2.argmin(axis=1)
        dist[lo:lo + chunk] = np.sqrt(d2.min(axis=1))
        res = np.where(inside, 1, -1).astype(np.int8)
        res[dist[lo:lo + chunk] <= _BOUNDARY_BAND] = 0
        out[lo:lo + chunk] = res
    return out, dist, near


def contains(domain: Domain2D, x) -> str:
    """Three-valued membership: 'inside', 'boundary' or 'outside'."""
    code = int(contains_many(domain, np.asarray(x, dtype=float)[:, None])[0])
    return {1: "inside", 0: "boundary", -1: "outside"}[code]


def closure_samples(domain: Domain2D, density: int) -> np.ndarray:
    """Interior grid plus a dense boundary sample of the closure, shape (2, m)."""
    poly = domain.boundary_polyline(max(512, 4 * density))
    lo = poly.min(axis=1)
    hi = poly.max(axis=1)
    xs = np.linspace(lo[0], hi[0], density)
    ys = np.linspace(lo[1], hi[1], density)
    X, Y = np.meshgrid(xs, ys)
    grid = np.stack([X.ravel(), Y.ravel()])
    inside = contains_many(domain, grid) >= 0
    return np.concatenate([grid[:, inside], poly], axis=1)


# ---------------------------------------------------------------------------
# exterior disks
# ---------------------------------------------------------------------------

def _outward_normals(domain: Domain2D, ts: np.ndarray) -> np.ndarray:
    _, vel, _ = eval_curve_jet_many(domain.boundary.x_expr, domain.boundary.y_expr, ts)
    speed = np.hypot(vel[0], vel[1])
    sgn = domain.boundary.orientation_sign
    return sgn * np.stack([vel[1], -vel[0]]) / speed


def bisect_largest(feasible, lo: float, hi: float, rel_tol: float) -> float:
    """Largest feasible value of a monotone predicate on [lo, hi].

    Assumes feasible(lo) is True; returns a feasible value within rel_tol
    (relative) of the true supremum.
    """
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def exterior_radius(domain: Domain2D, cls: BoundaryClassification,
                    n_fit: int = 16384, n_concave: int = 256,
                    rel_tol: float = 1e-4, per_sample: bool = False) -> ExteriorRadiusResult:
    """Largest uniform radius r such that at every sampled concave boundary
    point the disk of radius r tangent from outside lies in the complement.

    r is capped by the osculating bound min 1/|kappa| over the concave part
    and maximized by bisection against a dense boundary polyline.
    """
    if not cls.negative_arcs:
        raise NoNegativePart("boundary has no concave arc")
    period = domain.boundary.period
    poly = domain.boundary_polyline(n_fit)

    t_conc = []
    for lo, hi in cls.negative_arcs:
        span = (hi - lo) % period or period
        t_conc.append((lo + span * np.linspace(0.0, 1.0, n_concave)) % period)
    t_conc = np.concatenate(t_conc)
    kap = _inner_curvature_many(domain, t_conc)
    p_conc = domain.boundary.points(t_conc)
    nu = _outward_normals(domain, t_conc)

    neg = kap < 0
    worst_kappa = max(float(np.abs(kap[neg]).max()) if neg.any() else 0.0,
                      abs(min(cls.kappa_min, 0.0)))
    cap = 1.0 / worst_kappa if worst_kappa > 0 else math.inf

    def feasible(r: float) -> bool:
        centers = p_conc + r * nu
        if np.any(contains_many(domain, centers) > 0):
            return False
        # min distance from each center to the boundary polyline vertices;
        # the vertex spacing is dense enough that the sagitta is negligible
        for lo_i in range(0, centers.shape[1], 256):
            c = centers[:, lo_i:lo_i + 256]
            d = np.hypot(poly[0][:, None] - c[0][None, :],
                         poly[1][:, None] - c[1][None, :]).min(axis=0)
            if np.any(d < r * (1.0 - 1e-6) - 1e-12):
                return False
        return True

    tiny = min(cap, 1e-6)
    if not feasible(tiny):
        raise FitFailure("no exterior disk fits even at negligible radius")
    if feasible(cap):
        r = cap
        cap_limited = True
    else:
        r = bisect_largest(feasible, tiny, cap, rel_tol)
        cap_limited = False

    def sphere_at(t: float) -> ExteriorSphere:
        p = domain.boundary.points(np.array([t % period]))[:, 0]
        n_out = _outward_normals(domain, np.array([t % period]))[:, 0]
        return ExteriorSphere(t % period, p, p + r * n_out, r)

    spheres = []
    for lo, hi in cls.negative_arcs:
        span = (hi - lo) % period or period
        tt = lo + span * np.linspace(0.0, 1.0, 513)
        kk = _inner_curvature_many(domain, tt % period)
        j = int(np.argmin(kk))
        if 0 < j < len(tt) - 1:
            res = minimize_scalar(
                lambda t: float(_inner_curvature_many(domain, np.array([t % period]))[0]),
                bounds=(float(tt[j - 1]), float(tt[j + 1])), method="bounded",
                options={"xatol": 1e-10})
            t_ext = float(res.x)
        else:
            t_ext = float(tt[j])
        spheres.append(sphere_at(t_ext))
    sample_spheres = tuple(sphere_at(float(t)) for t in t_conc) if per_sample else ()
    return ExteriorRadiusResult(r, tuple(spheres), sample_spheres, cap, cap_limited)


def validate_sphere_fit(domain: Domain2D, sphere: ExteriorSphere,
                        n_boundary: int) -> float:
    """Worst-case signed clearance min |q - p0| - r over a boundary sample."""
    poly = domain.boundary_polyline(n_boundary)
    d = np.hypot(poly[0] - sphere.p0[0], poly[1] - sphere.p0[1])
    return float(d.min() - sphere.r)


# ---------------------------------------------------------------------------
# distance jets and barrier region sampling
# ---------------------------------------------------------------------------

def distance_jet_many(sphere: ExteriorSphere, xy: np.ndarray):
    """Jet of d(x) = |x - p0| - r: unit gradient, Hessian (I - u u^T)/|x - p0|."""
    xy = np.asarray(xy, dtype=float)
    dx = xy[0] - sphere.p0[0]
    dy = xy[1] - sphere.p0[1]
    rho = np.hypot(dx, dy)
    if np.any(rho < 1e-9):
        raise CenterSingularity("distance jet at the disk center")
    ux, uy = dx / rho, dy / rho
    val = rho - sphere.r
    grad = np.stack([ux, uy])
    hess = np.empty((2, 2) + rho.shape)
    hess[0, 0] = (1.0 - ux * ux) / rho
    hess[0, 1] = hess[1, 0] = -ux * uy / rho
    hess[1, 1] = (1.0 - uy * uy) / rho
    return val, grad, hess


def distance_jet(sphere: ExteriorSphere, x) -> Jet2:
    v, g, H = distance_jet_many(sphere, np.asarray(x, dtype=float)[:, None])
    return Jet2(float(v[0]), g[:, 0].copy(), H[:, :, 0].copy())


def sample_region(domain: Domain2D, sphere: ExteriorSphere, delta: float,
                  density: int = 4096) -> np.ndarray:
    """Quasi-uniform samples (2, m) of the lens B_{r+delta}(p0) intersected
    with the closed domain, including its boundary trace and the tangency
    point.

    ``density`` is the approximate number of interior grid points requested;
    the grid is refined (up to 3 doublings) until at least that many qualify.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    rr = sphere.r + delta
    n_axis = max(8, int(math.sqrt(density)))
    pieces = []
    for _ in range(4):
        xs = np.linspace(sphere.p0[0] - rr, sphere.p0[0] + rr, n_axis)
        ys = np.linspace(sphere.p0[1] - rr, sphere.p0[1] + rr, n_axis)
        X, Y = np.meshgrid(xs, ys)
        grid = np.stack([X.ravel(), Y.ravel()])
        in_ball = np.hypot(grid[0] - sphere.p0[0], grid[1] - sphere.p0[1]) <= rr
        grid = grid[:, in_ball]
        keep = contains_many(domain, grid) >= 0
        interior = grid[:, keep]
        if interior.shape[1] >= density:
            break
        n_axis *= 2
    pieces.append(interior)

    # boundary trace of the region: domain boundary inside the ball ...
    ts = np.linspace(0.0, domain.boundary.period, 4096, endpoint=False)
    bnd = domain.boundary.points(ts)
    on = np.hypot(bnd[0] - sphere.p0[0], bnd[1] - sphere.p0[1]) <= rr
    pieces.append(bnd[:, on])
    # ... and the spherical cap inside the domain
    ang = np.linspace(0.0, 2.0 * math.pi, 2048, endpoint=False)
    cap = np.stack([sphere.p0[0] + rr * np.cos(ang), sphere.p0[1] + rr * np.sin(ang)])
    cap_keep = contains_many(domain, cap) >= 0
    pieces.append(cap[:, cap_keep])
    # the tangency point anchors the region even as delta -> 0
    p = np.asarray(sphere.p, dtype=float)
    if (np.hypot(*(p - sphere.p0)) <= rr + 1e-12
            and contains_many(domain, p.reshape(2, 1))[0] >= 0):
        pieces.append(p.reshape(2, 1))

    nonempty = [piece for piece in pieces if piece.size]
    if not nonempty:
        raise EmptyRegion("no sample point lies in the barrier region at this density")
    return np.concatenate(nonempty, axis=1)
