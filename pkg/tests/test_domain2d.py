import math

import numpy as np
import pytest

from msebarrier.domain2d import (
    BoundaryCurve,
    Domain2D,
    EmptyRegion,
    ExteriorSphere,
    FitFailure,
    NoNegativePart,
    bisect_largest,
    classify_boundary,
    closure_samples,
    contains,
    contains_many,
    distance_jet,
    distance_jet_many,
    exterior_radius,
    sample_region,
    signed_curvature,
    signed_curvature_many,
    validate_sphere_fit,
)
from msebarrier.exprcalc import parse

from mpeval import fd_jet
from oracle import ARCS, KAPPA_MAX_ABS, KAPPA_MIN, R_EXT


DUMBBELL_B = (9.0 - math.sqrt(57.0)) / 4.0  # tunes the neck curvature to -2


def dumbbell_domain():
    return Domain2D.from_radial(f"1 + {DUMBBELL_B!r}*cos(2*t)")


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

def test_circle_curvature_exact():
    for radius in (0.5, 1.0, 3.0):
        curve = BoundaryCurve.from_exprs(f"{radius}*cos(t)", f"{radius}*sin(t)")
        ts = np.linspace(0.0, 2 * math.pi, 37)
        kap = signed_curvature_many(curve, ts)
        assert np.all(np.abs(kap - 1.0 / radius) <= 1e-10)


def test_reversing_orientation_negates_curvature():
    ccw = BoundaryCurve.from_exprs("cos(t)", "sin(t)")
    cw = BoundaryCurve.from_exprs("cos(t)", "-sin(t)")
    assert ccw.counterclockwise and not cw.counterclockwise
    for t in (0.0, 0.7, 2.0, 4.5):
        assert signed_curvature(cw, t) == pytest.approx(-signed_curvature(ccw, 2 * math.pi - t),
                                                        rel=1e-12, abs=1e-12)
        assert signed_curvature(cw, t) == pytest.approx(-1.0, rel=1e-12)


def test_clockwise_curve_classifies_like_ccw():
    cw = Domain2D(BoundaryCurve.from_exprs("cos(t)", "-sin(t)"))
    cls = classify_boundary(cw, 64)
    assert cls.negative_arcs == ()
    assert cls.kappa_min == pytest.approx(1.0, abs=1e-10)


def test_ellipse_curvature_against_analytic():
    a, b = 2.0, 1.0
    curve = BoundaryCurve.from_exprs(f"{a}*cos(t)", f"{b}*sin(t)")
    assert signed_curvature(curve, 0.0) == pytest.approx(2.0, abs=1e-12)
    ts = np.linspace(0.0, 2 * math.pi, 101)
    kap = signed_curvature_many(curve, ts)
    exact = a * b / (a ** 2 * np.sin(ts) ** 2 + b ** 2 * np.cos(ts) ** 2) ** 1.5
    assert np.allclose(kap, exact, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def test_unit_circle_classification(unit_disk):
    cls = classify_boundary(unit_disk, 64)
    assert cls.negative_arcs == ()
    assert cls.kappa_min == pytest.approx(1.0, abs=1e-12)


def test_ellipse_has_no_negative_arcs():
    dom = Domain2D.from_exprs("2*cos(t)", "sin(t)")
    assert classify_boundary(dom, 128).negative_arcs == ()


def test_paper_curvature_extrema(paper_classification):
    assert paper_classification.kappa_min == pytest.approx(KAPPA_MIN, abs=1e-6)
    assert paper_classification.kappa_max_abs == pytest.approx(KAPPA_MAX_ABS, abs=1e-6)


def test_paper_negative_arcs(paper_classification):
    arcs = paper_classification.negative_arcs
    assert len(arcs) == 2
    for (lo, hi), (elo, ehi) in zip(arcs, ARCS):
        assert lo == pytest.approx(elo, abs=1e-6)
        assert hi == pytest.approx(ehi, abs=1e-6)


def test_arc_endpoints_stable_under_refinement(paper_domain, paper_classification):
    finer = classify_boundary(paper_domain, 2 * paper_classification.n_samples)
    for (a1, b1), (a2, b2) in zip(paper_classification.negative_arcs,
                                  finer.negative_arcs):
        assert abs(a1 - a2) < 1e-3 and abs(b1 - b2) < 1e-3


def test_min_sample_count_enforced(paper_domain):
    with pytest.raises(ValueError):
        classify_boundary(paper_domain, 32)


# ---------------------------------------------------------------------------
# curve validation
# ---------------------------------------------------------------------------

def test_open_curve_rejected():
    with pytest.raises(ValueError):
        BoundaryCurve.from_exprs("cos(t/2)", "sin(t/2)")


def test_irregular_curve_rejected():
    # velocity vanishes at t = 0
    with pytest.raises(ValueError):
        BoundaryCurve.from_exprs("cos(t)^3", "sin(t)^3")


# ---------------------------------------------------------------------------
# exterior disks
# ---------------------------------------------------------------------------

def test_exterior_radius_paper(paper_domain, paper_classification, paper_exterior):
    assert paper_exterior.r == pytest.approx(R_EXT, rel=1e-4)
    assert paper_exterior.cap_limited
    assert len(paper_exterior.spheres) == 2
    ts = [s.t_tangency for s in paper_exterior.spheres]
    assert ts[0] == pytest.approx(math.pi / 2, abs=1e-6)
    assert ts[1] == pytest.approx(3 * math.pi / 2, abs=1e-6)


def test_exterior_spheres_fit_at_denser_sampling(paper_domain, paper_exterior):
    # disk-fit invariant re-validated against a 10x denser boundary sample
    for sphere in paper_exterior.spheres:
        assert abs(np.hypot(*(sphere.p - sphere.p0)) - sphere.r) <= 1e-9
        clearance = validate_sphere_fit(paper_domain, sphere, 163840)
        assert clearance >= -1e-6 * sphere.r


def test_exterior_radius_brute_force_oracle(paper_domain, paper_classification,
                                            paper_exterior):
    """Independent fit check: for each sampled concave point, the disk at the
    reported r keeps its distance to a dense boundary sample, and a 5% larger
    disk does not."""
    from msebarrier.domain2d import _outward_normals

    poly = paper_domain.boundary_polyline(100000)

    def worst_clearance(r):
        worst = np.inf
        for lo, hi in paper_classification.negative_arcs:
            ts = np.linspace(lo, hi, 100)
            p = paper_domain.boundary.points(ts)
            nu = _outward_normals(paper_domain, ts)
            centers = p + r * nu
            for i in range(centers.shape[1]):
                d = np.hypot(poly[0] - centers[0, i], poly[1] - centers[1, i]).min()
                worst = min(worst, d - r)
        return worst

    assert worst_clearance(paper_exterior.r) >= -1e-5
    assert worst_clearance(1.05 * paper_exterior.r) < -1e-4


def test_no_negative_part(unit_disk):
    cls = classify_boundary(unit_disk, 64)
    with pytest.raises(NoNegativePart):
        exterior_radius(unit_disk, cls)


def test_dumbbell_osculating_limited():
    dom = dumbbell_domain()
    cls = classify_boundary(dom, 1024)
    assert cls.kappa_min == pytest.approx(-2.0, abs=1e-6)
    ext = exterior_radius(dom, cls)
    assert ext.cap_limited
    assert ext.r == pytest.approx(0.5, abs=1e-6)
    for sphere in ext.spheres:
        assert validate_sphere_fit(dom, sphere, 100000) >= -1e-6


def test_self_crossing_curve_rejected():
    # bowtie: the sampled segments cross at the origin
    with pytest.raises(ValueError, match="not simple"):
        Domain2D.from_exprs("sin(2*t)", "sin(t)")


def test_fit_failure_guard(paper_domain, paper_classification, monkeypatch):
    # self-proximity below resolution is reported via the membership test:
    # if every candidate center lands inside the domain, no disk fits
    import msebarrier.domain2d as d2

    monkeypatch.setattr(d2, "contains_many",
                        lambda dom, xy, n_boundary=4096: np.ones(xy.shape[1], np.int8))
    with pytest.raises(FitFailure):
        exterior_radius(paper_domain, paper_classification)


def test_bisect_largest_recovers_threshold():
    for threshold in (0.3, 1.0, 2.5):
        got = bisect_largest(lambda r: r <= threshold, 1e-6, 4.0, 1e-6)
        assert got == pytest.approx(threshold, rel=1e-5)
        assert got <= threshold


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def test_contains_paper_domain(paper_domain):
    assert contains(paper_domain, (0.0, 0.0)) == "inside"
    assert contains(paper_domain, (10.0, 10.0)) == "outside"
    on_curve = paper_domain.boundary.points(np.array([0.3]))[:, 0]
    assert contains(paper_domain, on_curve) == "boundary"


def test_contains_polyline_path():
    dom = Domain2D.from_exprs("2*cos(t)", "sin(t)")
    assert contains(dom, (0.0, 0.0)) == "inside"
    assert contains(dom, (1.99, 0.9)) == "outside"
    assert contains(dom, (3.0, 0.0)) == "outside"
    on_curve = dom.boundary.points(np.array([1.1]))[:, 0]
    assert contains(dom, on_curve) == "boundary"


def test_contains_many_agrees_between_paths(paper_domain):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-3.5, 3.5, size=(2, 500))
    radial = contains_many(paper_domain, pts)
    poly_dom = Domain2D(paper_domain.boundary)  # radial shortcut disabled
    winding = contains_many(poly_dom, pts, n_boundary=16384)
    mask = radial != 0  # skip the boundary band, where the paths may disagree
    assert np.array_equal(radial[mask], winding[mask])


# ---------------------------------------------------------------------------
# distance jets
# ---------------------------------------------------------------------------

def test_distance_jet_axis_point():
    sphere = ExteriorSphere(0.0, np.array([1.0, 0.0]), np.array([0.0, 0.0]), 1.0)
    jet = distance_jet(sphere, (2.0, 0.0))
    assert jet.value == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(jet.gradient, [1.0, 0.0])
    assert np.allclose(jet.hessian, [[0.0, 0.0], [0.0, 0.5]])


def test_distance_jet_level_set_identity():
    sphere = ExteriorSphere(0.0, np.array([2.0, 0.0]), np.array([0.5, -0.3]), 1.5)
    ang = np.linspace(0, 2 * math.pi, 17)
    pts = np.stack([sphere.p0[0] + sphere.r * np.cos(ang),
                    sphere.p0[1] + sphere.r * np.sin(ang)])
    val, grad, hess = distance_jet_many(sphere, pts)
    assert np.allclose(val, 0.0, atol=1e-14)
    op_norm = np.abs(np.linalg.eigvalsh(hess.transpose(2, 0, 1))).max(axis=1)
    assert np.allclose(op_norm, 1.0 / sphere.r, atol=1e-12)


def test_distance_jet_matches_finite_differences():
    sphere = ExteriorSphere(0.0, np.array([1.0, 1.0]), np.array([-0.2, 0.4]), 0.8)
    expr = parse(f"sqrt((x - ({float(sphere.p0[0])}))^2 + (y - ({float(sphere.p0[1])}))^2)"
                 f" - {float(sphere.r)}", ("x", "y"))
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = rng.uniform(-3, 3, size=2)
        if np.hypot(*(x - sphere.p0)) < 0.3:
            continue
        jet = distance_jet(sphere, x)
        v, g, h = fd_jet(expr, x)
        assert jet.value == pytest.approx(v, abs=1e-10)
        assert np.all(np.abs(jet.gradient - g) <= 1e-6 * np.abs(g) + 1e-8)
        assert np.all(np.abs(jet.hessian - h) <= 1e-6 * np.abs(h) + 1e-8)


def test_distance_jet_center_singularity():
    from msebarrier.domain2d import CenterSingularity
    sphere = ExteriorSphere(0.0, np.array([1.0, 0.0]), np.array([0.0, 0.0]), 1.0)
    with pytest.raises(CenterSingularity):
        distance_jet(sphere, (0.0, 0.0))


# ---------------------------------------------------------------------------
# region sampling
# ---------------------------------------------------------------------------

def test_sample_region_predicates(paper_domain, paper_exterior):
    sphere = paper_exterior.spheres[0]
    pts = sample_region(paper_domain, sphere, delta=1.0, density=4000)
    assert pts.shape[1] >= 4000
    dist = np.hypot(pts[0] - sphere.p0[0], pts[1] - sphere.p0[1])
    assert np.all(dist <= sphere.r + 1.0 + 1e-9)
    assert np.all(contains_many(paper_domain, pts) >= 0)


def test_sample_region_shrinks_to_tangency(paper_domain, paper_exterior):
    sphere = paper_exterior.spheres[0]
    pts = sample_region(paper_domain, sphere, delta=1e-9, density=100)
    gap = np.hypot(pts[0] - sphere.p[0], pts[1] - sphere.p[1]).min()
    assert gap <= 1e-9


def test_sample_region_empty_for_separated_sphere(paper_domain):
    far = ExteriorSphere(0.0, np.array([50.0, 50.0]), np.array([51.0, 50.0]), 1.0)
    with pytest.raises(EmptyRegion):
        sample_region(paper_domain, far, delta=0.5, density=100)


def test_closure_samples_cover_boundary_and_interior(paper_domain):
    pts = closure_samples(paper_domain, 32)
    codes = contains_many(paper_domain, pts)
    assert np.all(codes >= 0)
    assert (codes == 0).sum() > 0 and (codes == 1).sum() > 0
