import numpy as np
import pytest

from msebarrier.barrier import BarrierProfile
from msebarrier.domain2d import Domain2D
from msebarrier.exprcalc import parse
from msebarrier.msesolve import (
    LineSearchStall,
    NotStarShaped,
    SolveOptions,
    SolveResult,
    discrete_energy,
    discrete_gradient,
    nodal_difference,
    solve,
    triangulate_star,
    verify_solution,
)


@pytest.fixture(scope="module")
def paper_solves(paper_domain, paper_phi):
    out = []
    for nr, na in ((16, 64), (32, 128), (64, 256)):
        mesh = triangulate_star(paper_domain, nr, na)
        out.append((mesh, solve(mesh, paper_phi)))
    return out


# ---------------------------------------------------------------------------
# meshing
# ---------------------------------------------------------------------------

def test_node_count_formula(unit_disk):
    mesh = triangulate_star(unit_disk, 4, 16)
    assert mesh.n_nodes == 1 + 4 * 16 == 65
    assert mesh.triangles.shape[0] == 16 + 2 * 16 * 3
    assert mesh.boundary_mask.sum() == 16


def test_paper_mesh_positive_areas(paper_domain):
    mesh = triangulate_star(paper_domain, 32, 128)
    p = mesh.nodes[mesh.triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    assert np.all(area > 1e-14)


def test_boundary_nodes_on_curve(paper_domain):
    mesh = triangulate_star(paper_domain, 8, 32)
    on = mesh.boundary_mask
    pts = paper_domain.boundary.points(mesh.boundary_t[on])
    err = np.hypot(pts[0] - mesh.nodes[on, 0], pts[1] - mesh.nodes[on, 1])
    assert err.max() <= 1e-9


def test_non_star_domain_rejected():
    kidney = Domain2D.from_exprs("cos(t) - 0.9*cos(2*t)", "sin(t)")
    with pytest.raises(NotStarShaped):
        triangulate_star(kidney, 8, 32)


def test_mesh_size_preconditions(unit_disk):
    with pytest.raises(ValueError):
        triangulate_star(unit_disk, 3, 64)
    with pytest.raises(ValueError):
        triangulate_star(unit_disk, 8, 8)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

def test_constant_data(unit_disk):
    mesh = triangulate_star(unit_disk, 8, 32)
    res = solve(mesh, parse("2.5", ("x", "y")))
    assert res.converged
    assert res.iterations == 0
    assert np.abs(res.u - 2.5).max() <= 1e-12
    assert res.max_residual <= 1e-12


def test_affine_data_exact(paper_domain):
    mesh = triangulate_star(paper_domain, 16, 64)
    res = solve(mesh, parse("0.4*x - 0.3*y + 1.2", ("x", "y")))
    exact = 0.4 * mesh.nodes[:, 0] - 0.3 * mesh.nodes[:, 1] + 1.2
    assert res.converged
    assert np.abs(res.u - exact).max() <= 1e-10


def test_paper_solution_oscillation(paper_solves, paper_stats):
    for mesh, res in paper_solves:
        assert res.converged
        osc = float(res.u.max() - res.u.min())
        assert osc <= paper_stats.omega + 1e-6


def test_energy_monotone(paper_solves):
    for _, res in paper_solves:
        e = np.array(res.energy_history)
        assert np.all(np.diff(e) <= 1e-12)


def test_shift_equivariance(paper_domain, paper_phi):
    mesh = triangulate_star(paper_domain, 8, 32)
    base = solve(mesh, paper_phi)
    shifted = solve(mesh, parse("exp(-y)/20 + 1 + 5", ("x", "y")))
    assert np.abs(shifted.u - base.u - 5.0).max() <= 1e-10


def test_energy_gradient_matches_finite_differences(paper_domain, paper_phi):
    mesh = triangulate_star(paper_domain, 4, 16)
    rng = np.random.default_rng(17)
    u = rng.normal(scale=0.2, size=mesh.n_nodes)
    grad = discrete_gradient(mesh, u)
    h = 1e-6
    for i in rng.choice(mesh.n_nodes, size=12, replace=False):
        up, um = u.copy(), u.copy()
        up[i] += h
        um[i] -= h
        fd = (discrete_energy(mesh, up) - discrete_energy(mesh, um)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_line_search_stall_reported(paper_domain, paper_phi):
    mesh = triangulate_star(paper_domain, 4, 16)
    with pytest.raises(LineSearchStall):
        solve(mesh, paper_phi, SolveOptions(grad_tol=1e-30, max_iterations=50,
                                            min_step=0.9))


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def test_refinement_second_order(paper_solves):
    (m0, r0), (m1, r1), (m2, r2) = paper_solves
    d1 = nodal_difference(m0, r0.u, m1, r1.u)
    d2 = nodal_difference(m1, r1.u, m2, r2.u)
    assert 3.0 <= d1 / d2 <= 5.0


def test_verify_solution_paper(paper_solves, paper_phi, paper_constants,
                               paper_exterior):
    (m0, r0), (m1, r1), (m2, r2) = paper_solves
    profiles = [BarrierProfile(paper_constants.rho, paper_constants.sigma, 1.0, s)
                for s in paper_exterior.spheres]
    rep = verify_solution(m1, r1, paper_phi, profiles=profiles, fine=(m2, r2))
    assert rep.max_principle_ok
    assert rep.boundary_trace_error == 0.0
    assert rep.barrier_ok
    assert rep.barrier_nodes_checked > 0
    assert rep.tol_mesh < 1e-3


def test_verify_solution_affine_brackets(paper_domain, paper_constants,
                                         paper_exterior):
    phi = parse("0.1*x + 0.05*y + 1", ("x", "y"))
    mesh = triangulate_star(paper_domain, 16, 64)
    res = solve(mesh, phi)
    profiles = [BarrierProfile(paper_constants.rho, paper_constants.sigma, 1.0, s)
                for s in paper_exterior.spheres]
    rep = verify_solution(mesh, res, phi, profiles=profiles)
    assert rep.max_principle_ok and rep.barrier_ok


def test_verify_solution_negative_control(paper_solves, paper_phi):
    mesh, res = paper_solves[1]
    bumped = res.u.copy()
    victim = int(np.nonzero(~mesh.boundary_mask)[0][37])
    bumped[victim] += 1.0
    fake = SolveResult(bumped, res.energy_history, res.grad_norm_history,
                       res.iterations, True, res.max_residual)
    rep = verify_solution(mesh, fake, paper_phi)
    assert not rep.max_principle_ok
    assert rep.max_principle_node == victim
    assert rep.max_principle_excess > 0.5


def test_nodal_difference_requires_nested(paper_domain):
    m1 = triangulate_star(paper_domain, 8, 32)
    m2 = triangulate_star(paper_domain, 12, 48)
    with pytest.raises(ValueError):
        nodal_difference(m1, np.zeros(m1.n_nodes), m2, np.zeros(m2.n_nodes))


def test_verify_needs_convergence(paper_solves, paper_phi):
    mesh, res = paper_solves[0]
    bad = SolveResult(res.u, res.energy_history, res.grad_norm_history,
                      res.iterations, False, res.max_residual)
    with pytest.raises(ValueError):
        verify_solution(mesh, bad, paper_phi)
