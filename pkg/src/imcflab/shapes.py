"""Axisymmetric star-shaped hypersurfaces.

A hypersurface is stored as a radial graph r = rho(phi) over the polar angle
phi in [0, pi], sampled on a Legendre-Gauss-Lobatto grid. Meridian curves
given parametrically (distance from the axis, height) are kept in that form
for high-precision integration and converted to polar form on demand.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import eval_legendre

from .spectral import PolarGrid, polar_grid


class ShapeError(ValueError):
    """A generated shape violates its construction invariants."""


@dataclass(frozen=True)
class RadialProfile:
    n: int
    rho: np.ndarray
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 1 or len(rho) < 3:
            raise ValueError("rho must be a 1-D array with at least 3 samples")
        if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
            raise ShapeError("radius samples must be finite and positive")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def grid_size(self) -> int:
        return len(self.rho) - 1

    @property
    def grid(self) -> PolarGrid:
        return polar_grid(self.grid_size)

    @property
    def phi(self) -> np.ndarray:
        return self.grid.phi

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.regular_derivatives(self.rho)

    def pole_slopes(self) -> tuple[float, float]:
        d1 = self.grid.d1
        return float(d1[0] @ self.rho), float(d1[-1] @ self.rho)

    def evaluate(self, phi) -> np.ndarray:
        return self.grid.interpolate(self.rho, phi)

    def resample(self, grid_size: int) -> "RadialProfile":
        new = polar_grid(grid_size)
        return RadialProfile(self.n, self.grid.interpolate(self.rho, new.phi), self.flags)

    def scaled(self, c: float) -> "RadialProfile":
        return RadialProfile(self.n, c * self.rho, self.flags)

    def with_flags(self, *flags: str) -> "RadialProfile":
        return RadialProfile(self.n, self.rho, tuple(dict.fromkeys(self.flags + flags)))

    def is_constant(self, rtol: float = 1e-14) -> bool:
        return bool(np.ptp(self.rho) <= rtol * np.max(self.rho))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi", "rho"])
            for p, r in zip(self.phi, self.rho):
                writer.writerow([f"{p:.17g}", f"{r:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path, n: int) -> "RadialProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        phi, rho = data[:, 0], data[:, 1]
        grid = polar_grid(len(rho) - 1)
        if not np.allclose(phi, grid.phi, rtol=0, atol=1e-12):
            raise ValueError("CSV angles are not a Gauss-Lobatto grid")
        return cls(n, rho)


def _check_grid(grid_size: int) -> None:
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")


def sphere_profile(n: int, R: float, grid_size: int = 64) -> RadialProfile:
    _check_grid(grid_size)
    if R <= 0:
        raise ValueError("sphere radius must be positive")
    return RadialProfile(n, np.full(grid_size + 1, float(R)))


def legendre_profile(n: int, coeffs: Sequence[float], grid_size: int = 64) -> RadialProfile:
    """rho(phi) = sum_l coeffs[l] P_l(cos phi).

    Every term is smooth in cos(phi), so the slope vanishes at both poles.
    """
    _check_grid(grid_size)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0 or coeffs[0] <= 0:
        raise ValueError("coeffs[0] (mean radius) must be positive")
    phi = polar_grid(grid_size).phi
    rho = legendre_series(coeffs, np.cos(phi))
    if np.min(rho) <= 0:
        j = int(np.argmin(rho))
        raise ShapeError(f"radius not positive: min {rho[j]:.6g} at phi={phi[j]:.6g}")
    return RadialProfile(n, rho)


def legendre_series(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.polynomial.legendre.legval(x, coeffs)


def perturbed_sphere(
    n: int,
    R: float,
    modes: Sequence[tuple[int, float]] = (),
    grid_size: int = 64,
    ambient=None,
) -> RadialProfile:
    """rho = R (1 + sum amp_l P_l(cos phi)).

    With ``ambient`` given, the result carries a ``not_mean_convex`` flag when
    the mean curvature is not positive everywhere; the caller decides.
    """
    _check_grid(grid_size)
    phi = polar_grid(grid_size).phi
    x = np.cos(phi)
    pert = np.zeros_like(x)
    for ell, amp in modes:
        pert += amp * eval_legendre(int(ell), x)
    rho = R * (1.0 + pert)
    if np.min(rho) <= 0:
        raise ShapeError("perturbation drives the radius negative")
    profile = RadialProfile(n, rho)
    if ambient is not None:
        from .geometry import surface_measures

        if np.min(surface_measures(profile, ambient).H) <= 0:
            profile = profile.with_flags("not_mean_convex")
    return profile


_RADIUS_RANGE = {"euclidean": (0.5, 2.0), "sphere": (0.3, 1.2), "hyperbolic": (0.3, 2.0), "adsrn": (0.3, 2.0)}


def random_perturbed_spheres(
    n: int,
    count: int,
    rng: np.random.Generator,
    ambient,
    grid_size: int = 64,
    max_mode: int = 4,
    amplitude: float = 0.06,
    radius: tuple[float, float] | None = None,
    max_attempts: int = 100,
) -> list[RadialProfile]:
    """Seeded random perturbed spheres that satisfy the ambient's hypotheses.

    Amplitudes of P_1..P_max_mode are uniform in [-amplitude/l, amplitude/l].
    Candidates are redrawn until mean convex (strictly convex in the sphere
    ambient).
    """
    from .ambient import Kind
    from .geometry import check_convexity, surface_measures

    lo, hi = radius if radius is not None else _RADIUS_RANGE[ambient.kind.value]
    out: list[RadialProfile] = []
    for _ in range(count):
        for _attempt in range(max_attempts):
            R = rng.uniform(lo, hi)
            modes = [(ell, rng.uniform(-amplitude, amplitude) / ell) for ell in range(1, max_mode + 1)]
            try:
                p = perturbed_sphere(n, R, modes, grid_size)
                flags = check_convexity(surface_measures(p, ambient))
            except (ShapeError, ValueError):
                continue
            ok = flags.strictly_convex if ambient.kind is Kind.SPHERE else flags.mean_convex
            if ok:
                out.append(p)
                break
        else:
            raise ShapeError(f"no feasible shape after {max_attempts} draws")
    return out


def project_legendre(profile: RadialProfile, modes: int) -> np.ndarray:
    """Legendre coefficients c_0..c_{modes-1} of rho in the variable cos(phi)."""
    g = profile.grid
    x = np.cos(g.phi)
    w = g.weights * np.sin(g.phi)
    out = np.empty(modes)
    for ell in range(modes):
        out[ell] = (2 * ell + 1) / 2.0 * np.sum(w * profile.rho * eval_legendre(ell, x))
    return out


# parametric meridians ------------------------------------------------------


@dataclass(frozen=True)
class ParametricCurve:
    """Meridian t -> (x(t), y(t)), t in [0, pi]; x is the distance from the axis.

    Rotating about the y-axis gives a closed surface when x(0) = x(pi) = 0.
    """

    x: Callable[[np.ndarray], np.ndarray]
    y: Callable[[np.ndarray], np.ndarray]
    dx: Callable[[np.ndarray], np.ndarray]
    dy: Callable[[np.ndarray], np.ndarray]
    ddx: Callable[[np.ndarray], np.ndarray]
    ddy: Callable[[np.ndarray], np.ndarray]
    name: str = field(default="curve")

    def point(self, t):
        return self.x(t), self.y(t)

    def polar_angle(self, t, center=(0.0, 0.0)):
        """Angle from the +y axis as seen from ``center`` on the axis."""
        return np.arctan2(self.x(t) - center[0], self.y(t) - center[1])

    def check_star_shaped(self, center=(0.0, 0.0), samples: int = 4001) -> None:
        t = np.linspace(0.0, np.pi, samples)
        x = self.x(t)
        if abs(x[0]) > 1e-12 or abs(x[-1]) > 1e-12 or np.any(x[1:-1] <= 0):
            raise ShapeError("meridian must start and end on the axis with x > 0 between")
        ang = np.unwrap(self.polar_angle(t, center))
        bad = np.nonzero(np.diff(ang) <= 0)[0]
        if bad.size:
            raise ShapeError(
                f"not star-shaped about {center}: angle not increasing on "
                f"t in [{t[bad[0]]:.6g}, {t[bad[-1] + 1]:.6g}]"
            )


def fillmore_curve() -> ParametricCurve:
    """The meridian whose rotation gives the small-polar-moment convex surface.

    x = (cos 3t + 9) sin t - 3 sin 3t cos t, y = (cos 3t + 9) cos t + 3 sin 3t sin t.
    It is the envelope curve of the support function p(t) = cos 3t + 9, so
    x' = (9 - 8 cos 3t) cos t and y' = -(9 - 8 cos 3t) sin t.
    """

    def x(t):
        return (np.cos(3 * t) + 9) * np.sin(t) - 3 * np.sin(3 * t) * np.cos(t)

    def y(t):
        return (np.cos(3 * t) + 9) * np.cos(t) + 3 * np.sin(3 * t) * np.sin(t)

    def dx(t):
        return (9 - 8 * np.cos(3 * t)) * np.cos(t)

    def dy(t):
        return -(9 - 8 * np.cos(3 * t)) * np.sin(t)

    def ddx(t):
        return 24 * np.sin(3 * t) * np.cos(t) - (9 - 8 * np.cos(3 * t)) * np.sin(t)

    def ddy(t):
        return -24 * np.sin(3 * t) * np.sin(t) - (9 - 8 * np.cos(3 * t)) * np.cos(t)

    return ParametricCurve(x, y, dx, dy, ddx, ddy, name="fillmore")


def circle_curve(R: float = 1.0) -> ParametricCurve:
    return ParametricCurve(
        lambda t: R * np.sin(t),
        lambda t: R * np.cos(t),
        lambda t: R * np.cos(t),
        lambda t: -R * np.sin(t),
        lambda t: -R * np.sin(t),
        lambda t: -R * np.cos(t),
        name="circle",
    )


def ellipse_curve(a: float, c: float) -> ParametricCurve:
    """Meridian of the spheroid with equatorial semi-axis a and polar semi-axis c."""
    return ParametricCurve(
        lambda t: a * np.sin(t),
        lambda t: c * np.cos(t),
        lambda t: a * np.cos(t),
        lambda t: -c * np.sin(t),
        lambda t: -a * np.sin(t),
        lambda t: -c * np.cos(t),
        name="ellipse",
    )


def parametric_to_polar(
    curve: ParametricCurve,
    grid_size: int = 64,
    center: tuple[float, float] = (0.0, 0.0),
    n: int = 3,
) -> RadialProfile:
    """Sample a star-shaped meridian as rho(phi) on the LGL grid.

    Each node solves angle(t) = phi_i for t by bracketed root finding.
    """
    curve.check_star_shaped(center)
    phi = polar_grid(grid_size).phi
    rho = np.empty_like(phi)
    for i, target in enumerate(phi):
        if i == 0:
            t = 0.0
        elif i == len(phi) - 1:
            t = math.pi
        else:
            t = brentq(
                lambda s: float(curve.polar_angle(s, center)) - target,
                0.0,
                math.pi,
                xtol=1e-15,
                rtol=1e-15,
            )
        rho[i] = math.hypot(float(curve.x(t)) - center[0], float(curve.y(t)) - center[1])
    return RadialProfile(n, rho)


def polar_to_parametric(profile: RadialProfile) -> ParametricCurve:
    """Meridian of a polar profile with t = phi, by barycentric interpolation.

    Derivatives come from interpolating the spectral derivative samples.
    """
    g = profile.grid
    d1, d2 = profile.derivatives()

    def r(t):
        return g.interpolate(profile.rho, t)

    def r1(t):
        return g.interpolate(d1, t)

    def r2(t):
        return g.interpolate(d2, t)

    def x(t):
        t = np.asarray(t, dtype=float)
        return r(np.ravel(t)).reshape(t.shape) * np.sin(t)

    def y(t):
        t = np.asarray(t, dtype=float)
        return r(np.ravel(t)).reshape(t.shape) * np.cos(t)

    def dx(t):
        t = np.asarray(t, dtype=float)
        rr, rp = r(np.ravel(t)).reshape(t.shape), r1(np.ravel(t)).reshape(t.shape)
        return rp * np.sin(t) + rr * np.cos(t)

    def dy(t):
        t = np.asarray(t, dtype=float)
        rr, rp = r(np.ravel(t)).reshape(t.shape), r1(np.ravel(t)).reshape(t.shape)
        return rp * np.cos(t) - rr * np.sin(t)

    def ddx(t):
        t = np.asarray(t, dtype=float)
        rr, rp, rpp = (f(np.ravel(t)).reshape(t.shape) for f in (r, r1, r2))
        return rpp * np.sin(t) + 2 * rp * np.cos(t) - rr * np.sin(t)

    def ddy(t):
        t = np.asarray(t, dtype=float)
        rr, rp, rpp = (f(np.ravel(t)).reshape(t.shape) for f in (r, r1, r2))
        return rpp * np.cos(t) - 2 * rp * np.sin(t) - rr * np.cos(t)

    return ParametricCurve(x, y, dx, dy, ddx, ddy, name="polar")
