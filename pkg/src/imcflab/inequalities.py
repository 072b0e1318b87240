"""Weighted geometric inequalities evaluated on geometric reports.

Every check returns an ``InequalityResult`` with the two sides, the slack
``lhs - rhs`` and a status. A shape that violates the hypotheses of an
inequality (mean convexity, convexity, sigma_2 > 0) gets the status
``hypothesis_failed`` rather than a pass or a fail.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .ambient import AmbientSpace, Kind
from .geometry import GeometricReport, geometric_report, parametric_report
from .shapes import RadialProfile, fillmore_curve
from .spectral import sphere_area

TOL = 1e-9
EQ_TOL = 1e-7


class Status(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    HYPOTHESIS_FAILED = "hypothesis_failed"
    EXPECTED_FAILURE = "expected_failure"


@dataclass(frozen=True)
class InequalityResult:
    name: str
    lhs: float
    rhs: float
    slack: float
    rel_slack: float
    passed: bool
    equality_case: bool
    status: Status
    shape: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        d["status"] = self.status.value
        return d

    def to_json(self) -> str:
        return json.dumps(
            {k: float(f"{v:.17g}") if isinstance(v, float) else v for k, v in self.to_dict().items()}
        )


def make_result(
    name: str,
    lhs: float,
    rhs: float,
    *,
    hypothesis: bool = True,
    expect_failure: bool = False,
    tol: float = TOL,
    eq_tol: float = EQ_TOL,
    shape: str = "",
) -> InequalityResult:
    """Build a result; ``tol`` and ``eq_tol`` are relative to max(|lhs|, |rhs|)."""
    if tol < 0 or eq_tol < 0:
        raise ValueError("tolerances must be nonnegative")
    slack = lhs - rhs
    denom = max(abs(lhs), abs(rhs))
    rel = slack / denom if denom > 0 else 0.0
    passed = rel >= -tol
    if not hypothesis:
        status = Status.HYPOTHESIS_FAILED
    elif passed:
        status = Status.PASS
    elif expect_failure:
        status = Status.EXPECTED_FAILURE
    else:
        status = Status.FAIL
    return InequalityResult(name, lhs, rhs, slack, rel, passed, abs(rel) <= eq_tol, status, shape)


def _require(report: GeometricReport, *kinds: str) -> None:
    if report.ambient not in kinds:
        raise ValueError(f"check needs ambient in {kinds}, got {report.ambient!r}")


def _iso_term(area: float, omega: float, n: int) -> float:
    """omega (|Sigma| / omega)^(n/(n-1))."""
    return omega * (area / omega) ** (n / (n - 1))


# Euclidean ---------------------------------------------------------------


def check_kwong(report: GeometricReport, **kw) -> tuple[InequalityResult, InequalityResult]:
    """int r dSigma >= n Vol and int r^2 sigma_1 dSigma >= n Vol."""
    _require(report, "euclidean")
    n, vol = report.n, report.volume
    h = report.mean_convex
    return (
        make_result("kwong_r", report.r_moment, n * vol, hypothesis=h, **kw),
        make_result("kwong_r2_sigma1", report.r2_sigma1, n * vol, hypothesis=h, **kw),
    )


def check_theorem_rn(report: GeometricReport, **kw) -> InequalityResult:
    """int r dSigma >= ((n-1)/n) omega (|Sigma|/omega)^(n/(n-1)) + Vol."""
    _require(report, "euclidean")
    n = report.n
    omega = sphere_area(n - 1)
    rhs = (n - 1) / n * _iso_term(report.area, omega, n) + report.volume
    return make_result("weighted_area_rn", report.r_moment, rhs, hypothesis=report.mean_convex, **kw)


def corollary_k0_rhs(report: GeometricReport) -> float:
    n, area, vol = report.n, report.area, report.volume
    omega = sphere_area(n - 1)
    x = area / omega
    c = (n - 1) / n
    return (
        c**2 * omega * x ** ((n + 1) / (n - 1))
        + 2 * c * vol * x ** (1 / (n - 1))
        + vol**2 / area
    )


def check_corollary_k0(report: GeometricReport, **kw) -> InequalityResult:
    """Lower bound for the polar moment int r^2 dSigma."""
    _require(report, "euclidean")
    return make_result(
        "polar_moment_bound", report.r2_moment, corollary_k0_rhs(report), hypothesis=report.mean_convex, **kw
    )


def check_theorem_k1(report: GeometricReport, **kw) -> InequalityResult:
    """int r^2 sigma_1 dSigma >= omega (|Sigma|/omega)^(n/(n-1))."""
    _require(report, "euclidean")
    omega = sphere_area(report.n - 1)
    return make_result(
        "weighted_sigma1", report.r2_sigma1, _iso_term(report.area, omega, report.n),
        hypothesis=report.mean_convex, **kw,
    )


def check_kwong_miao_k(report: GeometricReport, k: int = 2, **kw) -> InequalityResult:
    """int r^2 sigma_k dSigma >= omega (|Sigma|/omega)^((n-k+1)/(n-1)); only k = 2."""
    _require(report, "euclidean")
    if k != 2:
        raise ValueError("only k = 2 is available (sigma_2 is the highest stored moment)")
    n = report.n
    if n < 3:
        raise ValueError("sigma_2 needs n >= 3")
    omega = sphere_area(n - 1)
    rhs = omega * (report.area / omega) ** ((n - k + 1) / (n - 1))
    return make_result("weighted_sigma2", report.r2_sigma2, rhs, hypothesis=report.sigma2_positive, **kw)


def check_isoperimetric(report: GeometricReport, **kw) -> InequalityResult:
    _require(report, "euclidean")
    omega = sphere_area(report.n - 1)
    return make_result("isoperimetric", _iso_term(report.area, omega, report.n), report.n * report.volume, **kw)


def check_holder(report: GeometricReport, **kw) -> InequalityResult:
    """(int r dSigma)^2 <= |Sigma| int r^2 dSigma."""
    _require(report, "euclidean")
    return make_result("holder", report.area * report.r2_moment, report.r_moment**2, **kw)


def check_pmi(report: GeometricReport, expect_failure: bool = False, **kw) -> InequalityResult:
    """int r^2 dSigma >= omega (|Sigma|/omega)^((n+1)/(n-1)); false in general."""
    _require(report, "euclidean")
    n = report.n
    omega = sphere_area(n - 1)
    rhs = omega * (report.area / omega) ** ((n + 1) / (n - 1))
    return make_result("polar_moment_isoperimetric", report.r2_moment, rhs, expect_failure=expect_failure, **kw)


def check_improved_kwong(report: GeometricReport, expect_failure: bool = False, **kw) -> InequalityResult:
    """int r dSigma >= omega (|Sigma|/omega)^(n/(n-1)); false in general."""
    _require(report, "euclidean")
    omega = sphere_area(report.n - 1)
    return make_result(
        "weighted_area_isoperimetric", report.r_moment, _iso_term(report.area, omega, report.n),
        expect_failure=expect_failure, **kw,
    )


# other ambients ----------------------------------------------------------


def check_sphere_ambient(report: GeometricReport, **kw) -> InequalityResult:
    """int sin r dSigma >= int cos r dOmega + ((n-1)/n) omega (|Sigma|/omega)^(n/(n-1)).

    The distance is measured from the pole, which is the equator center for
    pole-symmetric convex shapes.
    """
    _require(report, "sphere")
    n = report.n
    omega = sphere_area(n - 1)
    rhs = report.weighted_volume + (n - 1) / n * _iso_term(report.area, omega, n)
    return make_result(
        "weighted_area_sphere", report.weighted_area, rhs, hypothesis=report.strictly_convex, **kw
    )


def check_substatic(report: GeometricReport, ambient: AmbientSpace | None = None, **kw) -> InequalityResult:
    """int lambda dSigma >= int lambda' dOmega + ((n-1)/n) theta (|Sigma|/theta)^(n/(n-1)) + (s0/n)|dP|.

    theta is the fiber area; the last term is the horizon contribution
    (zero in hyperbolic space).
    """
    _require(report, "hyperbolic", "adsrn")
    n = report.n
    theta = ambient.fiber_area if ambient is not None else report.fiber_area
    horizon = ambient.horizon_term if ambient is not None and ambient.kind is Kind.ADSRN else report.horizon_term
    rhs = report.weighted_volume + (n - 1) / n * _iso_term(report.area, theta, n) + horizon
    return make_result(
        "weighted_area_substatic", report.weighted_area, rhs, hypothesis=report.mean_convex, **kw
    )


def applicable_checks(report: GeometricReport, ambient: AmbientSpace | None = None, **kw) -> list[InequalityResult]:
    """Every theorem-level check that applies to the report's ambient."""
    if report.ambient == "euclidean":
        out = list(check_kwong(report, **kw))
        out += [
            check_theorem_rn(report, **kw),
            check_corollary_k0(report, **kw),
            check_theorem_k1(report, **kw),
            check_isoperimetric(report, **kw),
            check_holder(report, **kw),
        ]
        if report.n >= 3:
            out.append(check_kwong_miao_k(report, 2, **kw))
        return out
    if report.ambient == "sphere":
        return [check_sphere_ambient(report, **kw)]
    return [check_substatic(report, ambient, **kw)]


# counterexample surface ---------------------------------------------------

AREA_SQ_EXACT = 122855056 * math.pi**2 / 1225
R2_MOMENT_EXACT = 124744936 * math.pi / 5005
RATIO_EXACT = 545759095 / (2196034126 * math.pi)
KAPPA_RANGE = (1.0 / 17.0, 1.0)


class CounterexampleError(AssertionError):
    pass


@dataclass(frozen=True)
class CounterexampleReport:
    area_sq: float
    r2_moment: float
    ratio: float
    ratio_bound: float
    relative_margin: float
    kappa_min: float
    kappa_max: float
    scale_invariant_pmi: float
    report: GeometricReport
    results: list[InequalityResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "area_sq", "r2_moment", "ratio", "ratio_bound", "relative_margin",
            "kappa_min", "kappa_max", "scale_invariant_pmi",
        )}
        d["expected"] = {
            "area_sq": AREA_SQ_EXACT,
            "r2_moment": R2_MOMENT_EXACT,
            "ratio": RATIO_EXACT,
            "kappa_min": KAPPA_RANGE[0],
            "kappa_max": KAPPA_RANGE[1],
        }
        return d


def verify_counterexample(rtol: float = 1e-6, quad_tol: float = 1e-10) -> CounterexampleReport:
    """Integrate the rotated constant-width-style meridian and check its constants.

    Raises CounterexampleError listing computed and expected values when any
    constant misses its closed form by more than ``rtol`` or the polar moment
    ratio is not below 1/omega_2.
    """
    rep = parametric_report(fillmore_curve(), tol=quad_tol)
    area_sq = rep.area**2
    ratio = rep.r2_moment / area_sq
    bound = 1.0 / sphere_area(2)
    problems = []
    for label, got, want in (
        ("area^2", area_sq, AREA_SQ_EXACT),
        ("int r^2", rep.r2_moment, R2_MOMENT_EXACT),
        ("ratio", ratio, RATIO_EXACT),
    ):
        if abs(got - want) > rtol * abs(want):
            problems.append(f"{label}: computed {got!r}, expected {want!r}")
    for label, got, want in (("min kappa", rep.min_kappa, KAPPA_RANGE[0]), ("max kappa", rep.max_kappa, KAPPA_RANGE[1])):
        if abs(got - want) > rtol:
            problems.append(f"{label}: computed {got!r}, expected {want!r}")
    if not ratio < bound:
        problems.append(f"ratio {ratio!r} is not below 1/omega_2 = {bound!r}")
    if problems:
        raise CounterexampleError("; ".join(problems))
    results = [
        check_pmi(rep, expect_failure=True, shape="fillmore"),
        check_improved_kwong(rep, expect_failure=True, shape="fillmore"),
    ]
    results += applicable_checks(rep, shape="fillmore")
    omega = sphere_area(2)
    return CounterexampleReport(
        area_sq=area_sq,
        r2_moment=rep.r2_moment,
        ratio=ratio,
        ratio_bound=bound,
        relative_margin=(bound - ratio) / bound,
        kappa_min=rep.min_kappa,
        kappa_max=rep.max_kappa,
        scale_invariant_pmi=(rep.area / omega) ** -2 * rep.r2_moment,
        report=rep,
        results=results,
    )


# suites --------------------------------------------------------------------


@dataclass
class SuiteResult:
    results: list[InequalityResult] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)

    @property
    def hard_failures(self) -> list[InequalityResult]:
        return [r for r in self.results if r.status is Status.FAIL]

    def min_rel_slack(self) -> dict[str, float]:
        """Smallest relative slack per inequality over shapes whose hypotheses hold."""
        out: dict[str, float] = {}
        for r in self.results:
            if r.status is Status.HYPOTHESIS_FAILED:
                continue
            out[r.name] = min(out.get(r.name, math.inf), r.rel_slack)
        return out

    def by_shape(self, shape: str) -> list[InequalityResult]:
        return [r for r in self.results if r.shape == shape]


def _label(item, i: int) -> tuple[str, RadialProfile]:
    if isinstance(item, RadialProfile):
        return f"shape{i}", item
    label, profile = item
    return str(label), profile


def run_suite(
    shapes: Iterable[RadialProfile | tuple[str, RadialProfile]],
    ambient: AmbientSpace,
    tol: float = TOL,
    eq_tol: float = EQ_TOL,
) -> SuiteResult:
    """Apply every applicable check to every shape; errors are collected per shape."""
    suite = SuiteResult()
    for i, item in enumerate(shapes):
        label, profile = _label(item, i)
        try:
            rep = geometric_report(profile, ambient)
            for r in applicable_checks(rep, ambient, tol=tol, eq_tol=eq_tol, shape=label):
                suite.results.append(r)
        except (ValueError, ArithmeticError) as exc:
            suite.errors.append((label, f"{type(exc).__name__}: {exc}"))
    return suite


__all__ = [
    "AREA_SQ_EXACT",
    "CounterexampleError",
    "CounterexampleReport",
    "EQ_TOL",
    "InequalityResult",
    "KAPPA_RANGE",
    "R2_MOMENT_EXACT",
    "RATIO_EXACT",
    "Status",
    "SuiteResult",
    "TOL",
    "applicable_checks",
    "check_corollary_k0",
    "check_holder",
    "check_improved_kwong",
    "check_isoperimetric",
    "check_kwong",
    "check_kwong_miao_k",
    "check_pmi",
    "check_sphere_ambient",
    "check_substatic",
    "check_theorem_k1",
    "check_theorem_rn",
    "corollary_k0_rhs",
    "make_result",
    "run_suite",
    "verify_counterexample",
]
