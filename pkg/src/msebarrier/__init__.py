"""Solvability analysis for the Dirichlet problem of the minimal surface
equation on non-mean-convex planar domains.

The package decides solvability through an explicit oscillation bound built
from an exterior-disk barrier, compares it with the classical chord-graph
bound, certifies the barrier numerically, and cross-validates with a small
finite element solve of the equation itself.
"""
from .barrier import (
    BarrierCheckReport,
    BarrierProfile,
    minimal_operator,
    psi_jet,
    psi_properties,
    verify_lower_barrier,
    verify_upper_barrier,
    w_jet,
)
from .cli import Config, bundled_config_path, export, load_config, run
from .criterion import (
    CriterionConstants,
    DataStats,
    GeometrySummary,
    Verdict,
    constants,
    corollary_sh,
    data_stats,
    hadamard_bounds,
    jenkins_serrin_b,
    js_graph_radius_verify,
    osc_bound_mo,
    verdict,
)
from .domain2d import (
    BoundaryClassification,
    BoundaryCurve,
    Domain2D,
    ExteriorSphere,
    classify_boundary,
    contains,
    distance_jet,
    exterior_radius,
    sample_region,
    signed_curvature,
)
from .exprcalc import CurveJet, Expr, Jet2, eval_curve_jet, eval_jet2, parse
from .msesolve import Mesh, SolveResult, solve, triangulate_star, verify_solution

__version__ = "0.1.0"
