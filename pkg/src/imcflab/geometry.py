"""Curvatures and integrals of radial graphs in warped products.

For a graph r = rho(phi) in dr^2 + lambda(r)^2 h, with lambda evaluated at
rho, the meridian and parallel principal curvatures (outward normal) are

    k_merid = (lambda^2 lambda' + 2 lambda' rho'^2 - lambda rho'') / (rho'^2 + lambda^2)^(3/2)
    k_par   = (lambda'/lambda - rho' cot(phi) / lambda^2) / v,   v = sqrt(1 + rho'^2/lambda^2)

and the area element is lambda^(n-2) sin^(n-2)(phi) sqrt(rho'^2 + lambda^2) dphi
times the measure of the unit (n-2)-sphere.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable

import numpy as np
from scipy.integrate import quad

from .ambient import AmbientSpace, Kind
from .shapes import ParametricCurve, RadialProfile
from .spectral import sphere_area


class QuadratureError(ArithmeticError):
    """Refining the quadrature changed a result by more than the tolerance."""


class CurvatureBlowUp(ArithmeticError):
    pass


@dataclass(frozen=True)
class SurfaceMeasures:
    phi: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    dlam: np.ndarray
    weights: np.ndarray  # full quadrature weight per node, sum = |Sigma|
    area_element: np.ndarray  # lambda^(n-2) sin^(n-2) phi sqrt(rho'^2 + lambda^2)
    v: np.ndarray
    kappa_merid: np.ndarray
    kappa_par: np.ndarray
    H: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    n: int


@dataclass(frozen=True)
class GeometricReport:
    area: float
    volume: float
    weighted_area: float
    weighted_volume: float
    r_moment: float
    r2_moment: float
    r2_sigma1: float
    r2_sigma2: float
    horizon_term: float
    Q: float
    E: float
    n: int
    fiber_area: float
    horizon_radius: float = 0.0
    ambient: str = "euclidean"
    min_H: float = math.nan
    min_kappa: float = math.nan
    max_kappa: float = math.nan
    mean_convex: bool = True
    strictly_convex: bool = True
    sigma2_positive: bool = True
    is_slice: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps({k: _jsonable(v) for k, v in self.to_dict().items()})


def _jsonable(v):
    if isinstance(v, float):
        return float(f"{v:.17g}")
    return v


REPORT_FIELDS = tuple(f.name for f in fields(GeometricReport))


@dataclass(frozen=True)
class ConvexityFlags:
    mean_convex: bool
    strictly_convex: bool
    min_H: float
    min_kappa: float
    max_kappa: float


def principal_curvatures(phi, rho, drho, d2rho, lam, dlam):
    """Meridian and parallel principal curvatures and v on a polar grid.

    At the poles rho' cot(phi) is replaced by its limit rho'', which makes
    k_par equal to k_merid there.
    """
    q2 = drho**2 + lam**2
    v = np.sqrt(q2) / lam
    k_merid = (lam**2 * dlam + 2.0 * dlam * drho**2 - lam * d2rho) / q2**1.5
    sin = np.sin(phi)
    cot_term = np.empty_like(rho)
    interior = sin > 1e-300
    interior[0] = interior[-1] = False
    cot_term[interior] = drho[interior] * np.cos(phi[interior]) / sin[interior]
    cot_term[~interior] = d2rho[~interior]
    k_par = (dlam / lam - cot_term / lam**2) / v
    return k_merid, k_par, v


def symmetric_functions(k_merid, k_par, n: int):
    """Mean curvature and normalized sigma_1, sigma_2 for curvatures
    (k_merid, k_par x (n-2))."""
    H = k_merid + (n - 2) * k_par
    sigma1 = H / (n - 1)
    e2 = (n - 2) * k_merid * k_par + 0.5 * (n - 2) * (n - 3) * k_par**2
    sigma2 = e2 * 2.0 / ((n - 1) * (n - 2))
    return H, sigma1, sigma2


def _angular_weights(profile: RadialProfile, ambient: AmbientSpace) -> np.ndarray:
    """Quadrature weights w_j of int_fiber f dA_h = sum_j w_j f(phi_j)."""
    g = profile.grid
    n = profile.n
    base = sphere_area(n - 2) * np.sin(g.phi) ** (n - 2) * g.weights
    return base * (ambient.fiber_area / sphere_area(n - 1))


def fiber_moment(profile: RadialProfile, ambient: AmbientSpace, k: float) -> float:
    """int_S lambda(rho)^k dS over the fiber, the comparison integral for large-time asymptotics."""
    return float(np.sum(_angular_weights(profile, ambient) * ambient.lam(profile.rho) ** k))


def surface_measures(
    profile: RadialProfile,
    ambient: AmbientSpace,
    rho2_cap: float = math.inf,
) -> SurfaceMeasures:
    if profile.n != ambient.n:
        raise ValueError(f"profile dimension {profile.n} != ambient dimension {ambient.n}")
    ambient.check_domain(profile.rho)
    if ambient.kind is Kind.ADSRN and ambient.fiber_eps != 1 and not profile.is_constant():
        raise ValueError("only slices are representable over a non-spherical fiber")
    drho, d2rho = profile.derivatives()
    if np.max(np.abs(d2rho)) > rho2_cap:
        raise CurvatureBlowUp(f"|rho''| = {np.max(np.abs(d2rho)):.3g} exceeds cap {rho2_cap}")
    return _measures_from_arrays(profile, ambient, drho, d2rho)


def _measures_from_arrays(profile, ambient, drho, d2rho) -> SurfaceMeasures:
    n = profile.n
    phi, rho = profile.phi, profile.rho
    lam, dlam = ambient.warp(rho)
    k_merid, k_par, v = principal_curvatures(phi, rho, drho, d2rho, lam, dlam)
    H, sigma1, sigma2 = symmetric_functions(k_merid, k_par, n)
    elem = lam ** (n - 2) * np.sqrt(drho**2 + lam**2)
    weights = _angular_weights(profile, ambient) * lam ** (n - 2) * np.sqrt(drho**2 + lam**2)
    elem = elem * np.sin(phi) ** (n - 2)
    return SurfaceMeasures(
        phi, rho, lam, dlam, weights, elem, v, k_merid, k_par, H, sigma1, sigma2, n
    )


def check_convexity(measures: SurfaceMeasures) -> ConvexityFlags:
    kmin = float(min(measures.kappa_merid.min(), measures.kappa_par.min()))
    kmax = float(max(measures.kappa_merid.max(), measures.kappa_par.max()))
    min_h = float(measures.H.min())
    return ConvexityFlags(min_h > 0, kmin > 0, min_h, kmin, kmax)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _enclosed_volume(profile: RadialProfile, ambient: AmbientSpace, angular: np.ndarray) -> float:
    """int_Omega 1 dOmega = int_fiber int_a^rho lambda^(n-1) dr dA."""
    n = profile.n
    rho = profile.rho
    if ambient.kind is Kind.EUCLIDEAN:
        return float(np.sum(angular * rho**n) / n)
    a = ambient.r_domain[0]
    half = 0.5 * (rho - a)
    r = a + half[:, None] * (_GL_X[None, :] + 1.0)
    inner = half * (ambient.lam(r) ** (n - 1) @ _GL_W)
    return float(np.sum(angular * inner))


def geometric_report(
    profile: RadialProfile,
    ambient: AmbientSpace,
    measures: SurfaceMeasures | None = None,
) -> GeometricReport:
    """All scalar integrals of a profile in the given ambient."""
    m = measures if measures is not None else surface_measures(profile, ambient)
    n = profile.n
    w = m.weights
    r = m.rho
    angular = _angular_weights(profile, ambient)
    area = float(np.sum(w))
    weighted_area = float(np.sum(w * m.lam))
    lam_a = float(ambient.lam(ambient.r_domain[0])) if ambient.kind is Kind.ADSRN else 0.0
    # int_a^rho lambda' lambda^(n-1) dr = (lambda(rho)^n - lambda(a)^n) / n
    weighted_volume = float(np.sum(angular * (m.lam**n - lam_a**n)) / n)
    volume = _enclosed_volume(profile, ambient, angular)
    horizon_term = ambient.horizon_term if ambient.kind is Kind.ADSRN else 0.0
    scale = area ** (-n / (n - 1))
    q_val = scale * (weighted_area - weighted_volume - horizon_term)
    r2_sigma1 = float(np.sum(w * r**2 * m.sigma1))
    flags = check_convexity(m)
    return GeometricReport(
        area=area,
        volume=volume,
        weighted_area=weighted_area,
        weighted_volume=weighted_volume,
        r_moment=float(np.sum(w * r)),
        r2_moment=float(np.sum(w * r**2)),
        r2_sigma1=r2_sigma1,
        r2_sigma2=float(np.sum(w * r**2 * m.sigma2)),
        horizon_term=horizon_term,
        Q=q_val,
        E=scale * (n - 1) * r2_sigma1,
        n=n,
        fiber_area=ambient.fiber_area,
        horizon_radius=ambient.horizon_radius,
        ambient=ambient.kind.value,
        min_H=flags.min_H,
        min_kappa=flags.min_kappa,
        max_kappa=flags.max_kappa,
        mean_convex=flags.mean_convex,
        strictly_convex=flags.strictly_convex,
        sigma2_positive=bool(np.min(m.sigma2) > 0),
        is_slice=profile.is_constant(),
    )


_CONVERGENCE_FIELDS = (
    "area",
    "volume",
    "weighted_area",
    "weighted_volume",
    "r_moment",
    "r2_moment",
    "r2_sigma1",
    "Q",
    "E",
)


def converged_report(
    profile: RadialProfile,
    ambient: AmbientSpace,
    rtol: float = 1e-8,
) -> GeometricReport:
    """Report with a grid-doubling check; raises QuadratureError on disagreement."""
    coarse = geometric_report(profile, ambient)
    fine = geometric_report(profile.resample(2 * profile.grid_size), ambient)
    for name in _CONVERGENCE_FIELDS:
        a, b = getattr(coarse, name), getattr(fine, name)
        if abs(a - b) > rtol * max(abs(a), abs(b), 1e-300):
            raise QuadratureError(f"{name}: {a!r} (N={profile.grid_size}) vs {b!r} (2N)")
    return fine


# parametric surfaces of revolution (n = 3, Euclidean) ----------------------


def parametric_curvatures(curve: ParametricCurve, t):
    """Meridian and parallel principal curvatures of the rotated curve."""
    t = np.asarray(t, dtype=float)
    dx, dy = curve.dx(t), curve.dy(t)
    ddx, ddy = curve.ddx(t), curve.ddy(t)
    speed = np.hypot(dx, dy)
    # outward normal for the clockwise meridian (top pole -> bottom pole)
    nx, ny = -dy / speed, dx / speed
    k_merid = -(ddx * nx + ddy * ny) / speed**2
    x = curve.x(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_par = np.where(np.abs(x) > 1e-12, nx / x, k_merid)
    return k_merid, k_par


def _quad(f, tol: float) -> float:
    val, err = quad(f, 0.0, math.pi, epsabs=0.0, epsrel=tol, limit=500)
    if not math.isfinite(val) or err > 10 * tol * max(abs(val), 1e-300):
        raise QuadratureError(f"adaptive quadrature did not reach rtol {tol:g} (err {err:.3g})")
    return val


def parametric_report(curve: ParametricCurve, tol: float = 1e-9) -> GeometricReport:
    """Integrals of the Euclidean surface of revolution of a meridian (n = 3).

    Every integral is done directly in the curve parameter by adaptive
    Gauss-Kronrod quadrature to relative tolerance ``tol``.
    """
    two_pi = 2.0 * math.pi

    def elem(t):
        return two_pi * curve.x(t) * np.hypot(curve.dx(t), curve.dy(t))

    def r2(t):
        return curve.x(t) ** 2 + curve.y(t) ** 2

    def support(t):
        # <p, nu> |c'| with nu = (-y', x') / |c'|
        return -curve.x(t) * curve.dy(t) + curve.y(t) * curve.dx(t)

    def sig(t):
        km, kp = parametric_curvatures(curve, t)
        return 0.5 * (km + kp), km * kp

    area = _quad(elem, tol)
    r_moment = _quad(lambda t: np.sqrt(r2(t)) * elem(t), tol)
    r2_moment = _quad(lambda t: r2(t) * elem(t), tol)
    volume = _quad(lambda t: two_pi / 3.0 * curve.x(t) * support(t), tol)
    r2_sigma1 = _quad(lambda t: r2(t) * sig(t)[0] * elem(t), tol)
    r2_sigma2 = _quad(lambda t: r2(t) * sig(t)[1] * elem(t), tol)
    ts = np.linspace(0.0, math.pi, 10001)
    km, kp = parametric_curvatures(curve, ts)
    kmin = float(min(km.min(), kp.min()))
    kmax = float(max(km.max(), kp.max()))
    h_min = float(np.min(km + kp))
    s2_min = float(np.min(km * kp))
    scale = area**-1.5
    return GeometricReport(
        area=area,
        volume=volume,
        weighted_area=r_moment,
        weighted_volume=volume,
        r_moment=r_moment,
        r2_moment=r2_moment,
        r2_sigma1=r2_sigma1,
        r2_sigma2=r2_sigma2,
        horizon_term=0.0,
        Q=scale * (r_moment - volume),
        E=scale * 2.0 * r2_sigma1,
        n=3,
        fiber_area=4.0 * math.pi,
        ambient="euclidean",
        min_H=h_min,
        min_kappa=kmin,
        max_kappa=kmax,
        mean_convex=h_min > 0,
        strictly_convex=kmin > 0,
        sigma2_positive=s2_min > 0,
        is_slice=False,
    )


def reports_to_rows(reports: Iterable[GeometricReport]) -> list[dict]:
    return [r.to_dict() for r in reports]
