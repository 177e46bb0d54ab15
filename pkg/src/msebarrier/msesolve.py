"""Desk-scale solver for the minimal surface equation on star-shaped planar
domains.

The discrete problem minimizes the piecewise-linear graph area
sum_T area(T) sqrt(1 + |grad u|_T^2) over nodal values with Dirichlet data on
the boundary ring.  The functional is convex with positive-definite reduced
Hessian, so damped Newton with backtracking converges globally and the
minimizer is unique.  Meshes are structured polar fans, which keeps node
positions nested across refinement levels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain2d import Domain2D
from .exprcalc import Expr, eval_jet2_many

__all__ = [
    "Mesh",
    "SolveResult",
    "SolveOptions",
    "SolutionCheckReport",
    "NotStarShaped",
    "LineSearchStall",
    "triangulate_star",
    "discrete_energy",
    "discrete_gradient",
    "solve",
    "nodal_difference",
    "verify_solution",
]


class NotStarShaped(Exception):
    """The domain is not star-shaped about the chosen center."""


class LineSearchStall(Exception):
    """Backtracking could not find a decreasing step."""


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray          # (m, 2)
    triangles: np.ndarray      # (k, 3) int, positively oriented
    boundary_mask: np.ndarray  # (m,) bool
    boundary_t: np.ndarray     # (m,) parameter on the curve, nan for interior
    n_radial: int
    n_angular: int
    center: np.ndarray         # (2,)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def interior_index(self) -> np.ndarray:
        return np.nonzero(~self.boundary_mask)[0]


@dataclass(frozen=True)
class SolveResult:
    u: np.ndarray
    energy_history: tuple[float, ...]
    grad_norm_history: tuple[float, ...]
    iterations: int
    converged: bool
    max_residual: float


@dataclass(frozen=True)
class SolveOptions:
    grad_tol: float = 1e-10
    max_iterations: int = 200
    armijo: float = 1e-4
    min_step: float = 1e-14


def triangulate_star(domain: Domain2D, n_radial: int, n_angular: int) -> Mesh:
    """Structured polar triangulation: a fan at the center plus quad rings
    split into triangles; ring i sits at fraction i/n_radial along the rays
    from the center to the boundary points gamma(t_j).

    Node count is 1 + n_radial * n_angular.
    """
    if n_radial < 4 or n_angular < 16:
        raise ValueError("need n_radial >= 4 and n_angular >= 16")
    period = domain.boundary.period
    if domain.interior_hint is not None:
        center = np.asarray(domain.interior_hint, dtype=float)
    else:
        dense = domain.boundary_polyline(2048)
        center = dense.mean(axis=1)

    # ray sampling: boundary directions seen from the center must rotate
    # monotonically, otherwise some ray leaves the domain
    probe = domain.boundary.points(
        np.linspace(0.0, period, max(512, 4 * n_angular), endpoint=False))
    v = probe - center[:, None]
    cross = v[0] * np.roll(v[1], -1) - v[1] * np.roll(v[0], -1)
    sgn = domain.boundary.orientation_sign
    if np.any(sgn * cross <= 0):
        raise NotStarShaped(
            "boundary direction is not monotone around the center "
            f"{center.tolist()}")

    t_ring = np.linspace(0.0, period, n_angular, endpoint=False)
    ring_pts = domain.boundary.points(t_ring)
    if not domain.boundary.counterclockwise:
        # keep the angular index increasing counterclockwise
        t_ring = t_ring[::-1].copy()
        ring_pts = ring_pts[:, ::-1].copy()

    m = 1 + n_radial * n_angular
    nodes = np.empty((m, 2))
    nodes[0] = center
    boundary_t = np.full(m, np.nan)
    for i in range(1, n_radial + 1):
        frac = i / n_radial
        sl = slice(1 + (i - 1) * n_angular, 1 + i * n_angular)
        nodes[sl, 0] = center[0] + frac * (ring_pts[0] - center[0])
        nodes[sl, 1] = center[1] + frac * (ring_pts[1] - center[1])
    boundary_t[1 + (n_radial - 1) * n_angular:] = t_ring
    boundary_mask = np.zeros(m, dtype=bool)
    boundary_mask[1 + (n_radial - 1) * n_angular:] = True

    def node(i: int, j: int) -> int:
        return 1 + (i - 1) * n_angular + (j % n_angular)

    tris = []
    for j in range(n_angular):
        tris.append((0, node(1, j), node(1, j + 1)))
    for i in range(1, n_radial):
        for j in range(n_angular):
            a, b = node(i, j), node(i + 1, j)
            c, d = node(i + 1, j + 1), node(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.asarray(tris, dtype=np.int64)

    p = nodes[triangles]
    area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    if np.any(area2 <= 2e-14):
        raise NotStarShaped("degenerate or inverted triangle in the polar mesh")
    return Mesh(nodes, triangles, boundary_mask, boundary_t,
                n_radial, n_angular, center)


# ---------------------------------------------------------------------------
# discrete area functional
# ---------------------------------------------------------------------------

def _geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]          # (k, 3, 2)
    e = np.empty_like(p)                    # opposite-edge vectors
    e[:, 0] = p[:, 2] - p[:, 1]
    e[:, 1] = p[:, 0] - p[:, 2]
    e[:, 2] = p[:, 1] - p[:, 0]
    area = 0.5 * (e[:, 2, 0] * (-e[:, 1, 1]) - e[:, 2, 1] * (-e[:, 1, 0]))
    # gradient of the barycentric basis: rotate opposite edge by 90 degrees
    gradb = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area)[:, None, None]
    return area, gradb


def _tri_gradients(mesh: Mesh, u: np.ndarray, gradb: np.ndarray) -> np.ndarray:
    uv = u[mesh.triangles]                  # (k, 3)
    return np.einsum("ki,kid->kd", uv, gradb)


def discrete_energy(mesh: Mesh, u: np.ndarray) -> float:
    area, gradb = _geometry(mesh)
    g = _tri_gradients(mesh, u, gradb)
    return float(np.sum(area * np.sqrt(1.0 + (g ** 2).sum(axis=1))))


def discrete_gradient(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    area, gradb = _geometry(mesh)
    g = _tri_gradients(mesh, u, gradb)
    s = np.sqrt(1.0 + (g ** 2).sum(axis=1))
    coef = (area / s)[:, None] * np.einsum("kd,kid->ki", g, gradb)
    grad = np.zeros(mesh.n_nodes)
    np.add.at(grad, mesh.triangles, coef)
    return grad


def _assemble(mesh: Mesh, u: np.ndarray, area, gradb):
    """Energy, nodal gradient and sparse Hessian of the area functional."""
    g = _tri_gradients(mesh, u, gradb)
    s = np.sqrt(1.0 + (g ** 2).sum(axis=1))
    energy = float(np.sum(area * s))

    gb = np.einsum("kd,kid->ki", g, gradb)      # (k, 3): g . b_i
    coef = (area / s)[:, None] * gb
    grad = np.zeros(mesh.n_nodes)
    np.add.at(grad, mesh.triangles, coef)

    bb = np.einsum("kid,kjd->kij", gradb, gradb)
    hloc = (area / s)[:, None, None] * bb \
        - (area / s ** 3)[:, None, None] * gb[:, :, None] * gb[:, None, :]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    H = sp.coo_matrix((hloc.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    return energy, grad, H


def _laplace_init(mesh: Mesh, u_bc: np.ndarray, area, gradb) -> np.ndarray:
    """Harmonic extension of the boundary values (the quadratic-energy
    minimizer), used as the Newton starting point."""
    bb = np.einsum("kid,kjd->kij", gradb, gradb)
    kloc = area[:, None, None] * bb
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = sp.coo_matrix((kloc.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    idx = mesh.interior_index
    u = u_bc.copy()
    rhs = -(K @ u)[idx]
    u[idx] += spla.spsolve(K[idx][:, idx].tocsc(), rhs)
    return u


def solve(mesh: Mesh, phi: Expr, opts: SolveOptions | None = None) -> SolveResult:
    """Damped Newton minimization of the discrete graph area with boundary
    values phi(node) fixed on the boundary ring."""
    opts = opts or SolveOptions()
    area, gradb = _geometry(mesh)
    val, _, _ = eval_jet2_many(phi, mesh.nodes.T)
    u = np.where(mesh.boundary_mask, val, 0.0)
    u = _laplace_init(mesh, u, area, gradb)
    idx = mesh.interior_index

    energies: list[float] = []
    gnorms: list[float] = []
    converged = False
    it = 0
    for it in range(opts.max_iterations + 1):
        energy, grad, H = _assemble(mesh, u, area, gradb)
        gnorm = float(np.abs(grad[idx]).max()) if idx.size else 0.0
        energies.append(energy)
        gnorms.append(gnorm)
        if gnorm < opts.grad_tol:
            converged = True
            break
        if it == opts.max_iterations:
            break
        step = np.zeros(mesh.n_nodes)
        step[idx] = spla.spsolve(H[idx][:, idx].tocsc(), -grad[idx])
        slope = float(grad[idx] @ step[idx])
        alpha = 1.0
        while True:
            e_new = discrete_energy(mesh, u + alpha * step)
            if e_new <= energy + opts.armijo * alpha * slope:
                break
            alpha *= 0.5
            if alpha < opts.min_step:
                raise LineSearchStall(
                    f"no decrease along the Newton direction at iteration {it}")
        u = u + alpha * step
    return SolveResult(u, tuple(energies), tuple(gnorms), it, converged,
                       gnorms[-1] if gnorms else 0.0)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def nodal_difference(coarse: Mesh, coarse_u: np.ndarray,
                     fine: Mesh, fine_u: np.ndarray) -> float:
    """max |u_coarse - u_fine| over the shared (nested) node positions.

    The fine mesh must double both mesh counts; node (i, j) of the coarse
    mesh then coincides with node (2i, 2j) of the fine mesh.
    """
    if (fine.n_radial != 2 * coarse.n_radial
            or fine.n_angular != 2 * coarse.n_angular):
        raise ValueError("fine mesh must double n_radial and n_angular")
    diffs = [abs(float(coarse_u[0] - fine_u[0]))]
    for i in range(1, coarse.n_radial + 1):
        for j in range(coarse.n_angular):
            ci = 1 + (i - 1) * coarse.n_angular + j
            fi = 1 + (2 * i - 1) * fine.n_angular + 2 * j
            diffs.append(abs(float(coarse_u[ci] - fine_u[fi])))
    return max(diffs)


@dataclass(frozen=True)
class SolutionCheckReport:
    max_principle_ok: bool
    max_principle_excess: float
    max_principle_node: int
    boundary_trace_error: float
    barrier_ok: bool
    barrier_excess: float
    barrier_nodes_checked: int
    tol_mesh: float
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.max_principle_ok and self.barrier_ok


def verify_solution(mesh: Mesh, result: SolveResult, phi: Expr,
                    profiles=(), fine: tuple[Mesh, SolveResult] | None = None,
                    tol_floor: float = 1e-9) -> SolutionCheckReport:
    """Check the discrete solution against the comparison structure:

    (i) interior values stay within the boundary-data range,
    (ii) inside each barrier region the solution is bracketed by the lower
        and upper barriers up to the mesh tolerance,
    (iii) the boundary trace reproduces phi exactly.

    The mesh tolerance is the Richardson error estimate from a doubled mesh
    when ``fine`` is given, otherwise ``tol_floor``.
    """
    if not result.converged:
        raise ValueError("verify_solution needs a converged result")
    u = result.u
    val, _, _ = eval_jet2_many(phi, mesh.nodes.T)
    bmask = mesh.boundary_mask
    trace_err = float(np.abs(u[bmask] - val[bmask]).max())

    lo, hi = float(val[bmask].min()), float(val[bmask].max())
    interior = ~bmask
    excess = float(np.maximum(u[interior] - hi, lo - u[interior]).max())
    mp_ok = excess <= tol_floor
    worst = int(np.nonzero(interior)[0][int(
        np.argmax(np.maximum(u[interior] - hi, lo - u[interior])))])

    tol_mesh = tol_floor
    notes = []
    if fine is not None:
        fmesh, fres = fine
        diff = nodal_difference(mesh, u, fmesh, fres.u)
        # second-order method: the coarse error is about 4/3 of the
        # two-level difference
        tol_mesh = max(tol_floor, (4.0 / 3.0) * diff)
        notes.append(f"two-level difference {diff:.3e}")

    barrier_excess = 0.0
    n_checked = 0
    from .barrier import psi_closed_form
    for prof in profiles:
        p0 = prof.sphere.p0
        d = np.hypot(mesh.nodes[:, 0] - p0[0], mesh.nodes[:, 1] - p0[1]) - prof.sphere.r
        in_region = d <= prof.delta
        if not in_region.any():
            continue
        psi, _, _ = psi_closed_form(prof.rho, prof.sigma,
                                    np.clip(d[in_region], 0.0, prof.delta))
        w_up = val[in_region] + psi
        w_lo = val[in_region] - psi
        over = float((u[in_region] - (w_up + tol_mesh)).max())
        under = float(((w_lo - tol_mesh) - u[in_region]).max())
        barrier_excess = max(barrier_excess, over, under)
        n_checked += int(in_region.sum())
    barrier_ok = barrier_excess <= 0.0 or n_checked == 0

    return SolutionCheckReport(mp_ok, excess, worst, trace_err,
                               barrier_ok, barrier_excess, n_checked,
                               tol_mesh, tuple(notes))
