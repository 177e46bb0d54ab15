"""Exterior-disk barriers for the minimal surface operator.

The radial profile psi solves  psi'' - sigma psi' + rho = 0,  psi(0) = 0,
with the integration constant pinned so that psi'(0) = 1; then psi is
strictly increasing and strictly concave on the admissible depth range and
w = phi + psi(dist to the disk) is a supersolution near a concave boundary
tangency (phi - psi(dist) is the matching subsolution).  This module
evaluates the profile in closed form, checks its qualitative properties,
applies the minimal surface operator to composite jets, and certifies the
barrier inequalities on a dense sample of the barrier region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain2d import (
    Domain2D,
    ExteriorSphere,
    closure_samples,
    distance_jet_many,
    sample_region,
)
from .exprcalc import Expr, Jet2, eval_jet2_many

__all__ = [
    "BarrierProfile",
    "BarrierCheckReport",
    "OutOfRange",
    "psi_closed_form",
    "psi_jet",
    "psi_properties",
    "minimal_operator",
    "minimal_operator_many",
    "w_jet",
    "hw_expansion",
    "verify_upper_barrier",
    "verify_lower_barrier",
]


class OutOfRange(Exception):
    """Profile evaluated outside [0, delta]."""


@dataclass(frozen=True)
class BarrierProfile:
    """Radial barrier profile anchored to one exterior disk.

    c1 is fixed at (rho - sigma)/sigma, the endpoint of the admissible
    window that gives psi'(0) = 1.
    """

    rho: float
    sigma: float
    delta: float
    sphere: ExteriorSphere

    def __post_init__(self):
        if self.sigma >= 0:
            raise ValueError("sigma must be negative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def c1(self) -> float:
        return (self.rho - self.sigma) / self.sigma

    @property
    def delta_cap(self) -> float:
        """Depth beyond which psi' would leave (0, 1]."""
        return math.log(self.rho / (self.rho - self.sigma)) / self.sigma


def psi_closed_form(rho: float, sigma: float, s):
    """psi, psi', psi'' at s for the profile with psi(0)=0, psi'(0)=1.

    psi(s)  = (1/sigma) [rho s + ((sigma - rho)/sigma)(e^{sigma s} - 1)]
    psi'(s) = rho/sigma - c1 e^{sigma s}
    psi''(s)= -c1 sigma e^{sigma s},   c1 = (rho - sigma)/sigma
    """
    s = np.asarray(s, dtype=float)
    c1 = (rho - sigma) / sigma
    e = np.exp(sigma * s)
    psi = (rho * s - c1 * (e - 1.0)) / sigma
    dpsi = rho / sigma - c1 * e
    ddpsi = -c1 * sigma * e
    return psi, dpsi, ddpsi


def psi_jet(profile: BarrierProfile, s: float) -> tuple[float, float, float]:
    """(psi, psi', psi'') at a single depth s in [0, delta]."""
    if not 0.0 <= s <= profile.delta:
        raise OutOfRange(f"s = {s!r} outside [0, {profile.delta!r}]")
    p, d1, d2 = psi_closed_form(profile.rho, profile.sigma, s)
    return float(p), float(d1), float(d2)


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    margin: float


def psi_properties(profile: BarrierProfile, omega: float, n_grid: int = 1024):
    """Report-style check of the profile contract on a dense grid of [0, delta]:
    psi(0) = 0, 0 < psi' <= 1, psi'' < 0, and psi(delta) >= omega."""
    s = np.linspace(0.0, profile.delta, n_grid)
    psi, dpsi, ddpsi = psi_closed_form(profile.rho, profile.sigma, s)
    checks = [
        PropertyCheck("psi(0) = 0", abs(float(psi[0])) <= 1e-14, -abs(float(psi[0]))),
        PropertyCheck("psi' > 0", bool(dpsi.min() > 0), float(dpsi.min())),
        PropertyCheck("psi' <= 1", bool(dpsi.max() <= 1.0 + 1e-14),
                      float(1.0 - dpsi.max())),
        PropertyCheck("psi'' < 0", bool(ddpsi.max() < 0), float(-ddpsi.max())),
        PropertyCheck("psi(delta) >= omega", bool(psi[-1] >= omega),
                      float(psi[-1] - omega)),
    ]
    return checks


# ---------------------------------------------------------------------------
# the operator and composite jets
# ---------------------------------------------------------------------------

def minimal_operator_many(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """(1 + |grad|^2) tr(hess) - grad^T hess grad, batched over the last axis."""
    g2 = (grad ** 2).sum(axis=0)
    lap = np.trace(hess, axis1=0, axis2=1)
    quad = (grad[:, None, :] * hess * grad[None, :, :]).sum(axis=(0, 1))
    return (1.0 + g2) * lap - quad


def minimal_operator(jet: Jet2) -> float:
    """Minimal surface operator applied to one second-order jet."""
    if jet.gradient.shape[0] < 2:
        raise ValueError("operator needs dimension >= 2")
    return float(minimal_operator_many(jet.gradient[:, None],
                                       jet.hessian[:, :, None])[0])


def w_jet(phi_jet: Jet2, d_jet: Jet2, psi: tuple[float, float, float]) -> Jet2:
    """Jet of w = phi + psi(d) by the chain rule:

    grad w = grad phi + psi' grad d
    hess w = hess phi + psi' hess d + psi'' (grad d)(grad d)^T
    """
    p, d1, d2 = psi
    grad = phi_jet.gradient + d1 * d_jet.gradient
    hess = (phi_jet.hessian + d1 * d_jet.hessian
            + d2 * np.outer(d_jet.gradient, d_jet.gradient))
    return Jet2(phi_jet.value + p, grad, hess)


def hw_expansion(phi_jet: Jet2, d_jet: Jet2, psi: tuple[float, float, float]) -> dict:
    """Term-by-term expansion of hess(w)(grad w, grad w) with E_n = grad d:

    data term      |grad phi|^2 hess(phi)(u, u),          u = grad phi / |grad phi|
    mixed term     psi' [2 |grad phi| hess(phi)(E_n, u) + |grad phi|^2 hess(d)(u, u)]
    normal term    psi'^2 hess(phi)(E_n, E_n)
    radial term    psi'' (E_n(phi) + psi')^2

    Valid because grad d is unit and hess(d) annihilates it.
    """
    _, d1, d2 = psi
    gp = phi_jet.gradient
    en = d_jet.gradient
    norm = float(np.hypot(*gp)) if gp.shape[0] == 2 else float(np.linalg.norm(gp))
    if norm > 0:
        u = gp / norm
        data = norm ** 2 * float(u @ phi_jet.hessian @ u)
        mixed = d1 * (2.0 * norm * float(en @ phi_jet.hessian @ u)
                      + norm ** 2 * float(u @ d_jet.hessian @ u))
    else:
        data = 0.0
        mixed = 0.0
    normal = d1 ** 2 * float(en @ phi_jet.hessian @ en)
    radial = d2 * (float(en @ gp) + d1) ** 2
    total = data + mixed + normal + radial
    return {"data": data, "mixed": mixed, "normal": normal, "radial": radial,
            "total": total}


# ---------------------------------------------------------------------------
# certification on the barrier region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BarrierCheckReport:
    """Failure-transparent record of the barrier inequalities on a sample.

    Upper barrier (w = phi + psi(d)): max_operator <= 0, min_gap >= 0.
    Lower barrier (xi = phi - psi(d)): min_operator >= 0, max_gap <= 0
    (gap is the signed difference to phi).  pinning is the barrier minus the
    data at the tangency point and must vanish.
    """

    kind: str  # "upper" | "lower"
    n_points: int
    max_operator: float
    min_operator: float
    extreme_gap: float          # min(w - phi) for upper, max(xi - phi) for lower
    pinning: float              # barrier - data at the tangency point
    cap_excess: float | None    # min over the spherical cap of (barrier - sup phi)
    worst_operator_point: tuple[float, float]
    worst_gap_point: tuple[float, float]
    violations: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def _barrier_fields(domain: Domain2D, phi: Expr, profile: BarrierProfile,
                    pts: np.ndarray, sign: float):
    """Operator values and gaps of phi + sign * psi(d) at sample points."""
    val, grad, hess = eval_jet2_many(phi, pts)
    dval, dgrad, dhess = distance_jet_many(profile.sphere, pts)
    s = np.clip(dval, 0.0, profile.delta)
    psi, d1, d2 = psi_closed_form(profile.rho, profile.sigma, s)
    wgrad = grad + sign * d1 * dgrad
    whess = (hess + sign * d1 * dhess
             + sign * d2 * dgrad[:, None, :] * dgrad[None, :, :])
    op = minimal_operator_many(wgrad, whess)
    gap = sign * psi
    return op, gap, val


def _verify(domain: Domain2D, phi: Expr, profile: BarrierProfile, density: int,
            kind: str) -> BarrierCheckReport:
    sign = 1.0 if kind == "upper" else -1.0
    pts = sample_region(domain, profile.sphere, profile.delta, density)
    op, gap, phi_val = _barrier_fields(domain, phi, profile, pts, sign)

    i_op = int(np.argmax(op) if kind == "upper" else np.argmin(op))
    i_gap = int(np.argmin(gap) if kind == "upper" else np.argmax(gap))
    max_op = float(op.max())
    min_op = float(op.min())
    extreme_gap = float(gap[i_gap])

    p = np.asarray(profile.sphere.p, dtype=float)
    _, gap_p, _ = _barrier_fields(domain, phi, profile, p.reshape(2, 1), sign)
    pinning = float(gap_p[0])

    # region-boundary cap: the barrier must clear the data extremum there
    # whenever the profile height covers the oscillation
    closure = closure_samples(domain, 64)
    cval, _, _ = eval_jet2_many(phi, closure)
    sup_phi, inf_phi = float(cval.max()), float(cval.min())
    omega = sup_phi - inf_phi
    psi_delta, _, _ = psi_closed_form(profile.rho, profile.sigma, profile.delta)
    covers_osc = float(psi_delta) >= omega
    rr = profile.sphere.r + profile.delta
    dist = np.hypot(pts[0] - profile.sphere.p0[0], pts[1] - profile.sphere.p0[1])
    on_cap = np.abs(dist - rr) <= 1e-9 * max(1.0, rr)
    cap_excess = None
    if on_cap.any():
        if kind == "upper":
            cap_excess = float((phi_val[on_cap] + gap[on_cap] - sup_phi).min())
        else:
            cap_excess = float((inf_phi - (phi_val[on_cap] + gap[on_cap])).min())

    violations = []
    if kind == "upper":
        if max_op > 0:
            violations.append(f"operator positive: max M(w) = {max_op:.3e}")
        if extreme_gap < 0:
            violations.append(f"w below phi: min(w - phi) = {extreme_gap:.3e}")
    else:
        if min_op < 0:
            violations.append(f"operator negative: min M(xi) = {min_op:.3e}")
        if extreme_gap > 0:
            violations.append(f"xi above phi: max(xi - phi) = {extreme_gap:.3e}")
    if abs(pinning) > 1e-10:
        violations.append(f"tangency pinning off by {pinning:.3e}")
    if covers_osc and cap_excess is not None and cap_excess < -1e-9:
        violations.append(f"region-boundary cap violated by {cap_excess:.3e}")

    return BarrierCheckReport(
        kind, pts.shape[1], max_op, min_op, extreme_gap, pinning, cap_excess,
        (float(pts[0, i_op]), float(pts[1, i_op])),
        (float(pts[0, i_gap]), float(pts[1, i_gap])),
        tuple(violations))


def verify_upper_barrier(domain: Domain2D, phi: Expr, profile: BarrierProfile,
                         density: int = 10000) -> BarrierCheckReport:
    """Certify w = phi + psi(d) on a dense sample of the barrier region:
    M(w) <= 0, w >= phi, and w(p) = phi(p) at the tangency point."""
    return _verify(domain, phi, profile, density, "upper")


def verify_lower_barrier(domain: Domain2D, phi: Expr, profile: BarrierProfile,
                         density: int = 10000) -> BarrierCheckReport:
    """Certify xi = phi - psi(d): M(xi) >= 0, xi <= phi, xi(p) = phi(p)."""
    return _verify(domain, phi, profile, density, "lower")
