"""Axisymmetric hypersurfaces in warped products: curvature integrals,
inverse mean curvature flow, weighted inequality checks and a polar moment
shape search."""

from .ambient import AmbientSpace, Kind, NoHorizonError, make_ambient
from .flow import FlowConfig, FlowTrace, imcf_run
from .geometry import GeometricReport, geometric_report, parametric_report
from .inequalities import InequalityResult, Status, run_suite, verify_counterexample
from .search import SearchConfig, SearchResult, minimize_pmi, pmi_objective
from .shapes import RadialProfile, fillmore_curve, legendre_profile, perturbed_sphere, sphere_profile

__version__ = "0.1.0"

__all__ = [
    "AmbientSpace",
    "FlowConfig",
    "FlowTrace",
    "GeometricReport",
    "InequalityResult",
    "Kind",
    "NoHorizonError",
    "RadialProfile",
    "SearchConfig",
    "SearchResult",
    "Status",
    "fillmore_curve",
    "geometric_report",
    "imcf_run",
    "legendre_profile",
    "make_ambient",
    "minimize_pmi",
    "parametric_report",
    "perturbed_sphere",
    "pmi_objective",
    "run_suite",
    "sphere_profile",
    "verify_counterexample",
]
