"""Warped-product ambient spaces dr^2 + lambda(r)^2 h.

Euclidean, round sphere and hyperbolic space use closed-form warping
functions. The adS-Reissner-Nordstrom family is table-backed: lambda solves
lambda' = sqrt(F(lambda)) with

    F(s) = eps + kappa^2 s^2 - 2 m s^(2-n) + q^2 s^(4-2n),

starting from the horizon lambda(0) = s0, the largest positive root of F.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .spectral import sphere_area


class Kind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"
    ADSRN = "adsrn"


class NoHorizonError(ValueError):
    """The horizon function has no positive real root."""

    def __init__(self, message: str, global_min: float, argmin: float):
        super().__init__(message)
        self.global_min = global_min
        self.argmin = argmin


class DomainError(ValueError):
    """A radius left the radial domain of the ambient space."""


def horizon_function(s, n: int, eps: int, m: float, q: float, kappa: float):
    s = np.asarray(s, dtype=float)
    return eps + kappa**2 * s**2 - 2.0 * m * s ** (2 - n) + q**2 * s ** (4 - 2 * n)


def horizon_function_prime(s, n: int, m: float, q: float, kappa: float):
    s = np.asarray(s, dtype=float)
    return (
        2.0 * kappa**2 * s
        - 2.0 * m * (2 - n) * s ** (1 - n)
        + q**2 * (4 - 2 * n) * s ** (3 - 2 * n)
    )


def largest_positive_root(
    func: Callable[[np.ndarray], np.ndarray],
    lo: float = 1e-6,
    hi: float = 1e6,
    samples: int = 4001,
    rtol: float = 1e-14,
) -> float:
    """Largest sign change of ``func`` on a log grid, refined by bisection.

    Raises NoHorizonError (carrying the sampled minimum) when no sign change
    is found.
    """
    s = np.geomspace(lo, hi, samples)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = func(s)
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    exact = np.nonzero(vals == 0.0)[0]
    if idx.size == 0:
        finite = np.where(np.isfinite(vals), vals, np.inf)
        j = int(np.argmin(finite))
        raise NoHorizonError(
            f"no positive root; minimum {finite[j]:.6g} at s={s[j]:.6g}",
            float(finite[j]),
            float(s[j]),
        )
    if exact.size and exact[-1] >= idx[-1] + 1:
        return float(s[exact[-1]])
    a, b = float(s[idx[-1]]), float(s[idx[-1] + 1])
    fa = float(func(np.array(a)))
    if fa == 0.0:
        return a
    while b - a > rtol * b:
        mid = 0.5 * (a + b)
        fm = float(func(np.array(mid)))
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def horizon_root(n: int, eps: int, m: float, q: float, kappa: float) -> float:
    """Largest positive root s0 of the horizon equation."""
    return largest_positive_root(lambda s: horizon_function(s, n, eps, m, q, kappa))


@dataclass(frozen=True)
class WarpTable:
    """Dense (r, lambda, lambda') samples of the adS-RN warping function."""

    r: np.ndarray
    lam: np.ndarray
    dlam: np.ndarray
    ode_residual: float  # max |mu^2 - F(lambda)| / max(1, F) of the integrated slope mu

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "lambda", "lambda_prime"])
            for row in zip(self.r, self.lam, self.dlam):
                writer.writerow([f"{v:.17g}" for v in row])


def solve_warp_ode(
    n: int,
    eps: int,
    m: float,
    q: float,
    kappa: float,
    r_max: float = 8.0,
    tol: float = 1e-10,
    h0: float = 1e-2,
    s0: float | None = None,
) -> WarpTable:
    """Integrate the adS-RN warping function from the horizon out to r_max.

    The first-order equation lambda' = sqrt(F) is degenerate at r = 0, so the
    integration runs on the equivalent second-order system
    lambda'' = F'(lambda)/2 started from the series lambda(d) = s0 + F'(s0) d^2/4
    at d = 1e-4 s0. Classical RK4 is used, with the step shrunk locally where
    lambda'' / lambda is large and halved globally until the
    integrated slope satisfies mu^2 = F(lambda) to ``tol`` (relative to
    max(1, F)). The stored lambda' is recomputed from the algebraic relation.
    """
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    if s0 is None:
        s0 = horizon_root(n, eps, m, q, kappa)
    ddl0 = 0.5 * float(horizon_function_prime(s0, n, m, q, kappa))
    if ddl0 <= 0:
        raise ValueError("degenerate horizon: F'(s0) <= 0")
    delta = 1e-4 * s0

    nm2 = n - 2
    k2 = kappa**2

    def accel(lam):
        return k2 * lam + m * nm2 * lam ** (1 - n) - q * q * nm2 * lam ** (3 - 2 * n)

    h = h0
    for _ in range(30):
        rs_list = [0.0, delta]
        lam, mu = s0 + 0.5 * ddl0 * delta**2, ddl0 * delta
        ys_list = [(s0, 0.0), (lam, mu)]
        r = delta
        while r < r_max:
            # local time scale sqrt(lambda / lambda'') refines the near-horizon region
            hh = min(h, h * math.sqrt(lam / abs(accel(lam))), r_max - r)
            if r_max - r - hh < 1e-3 * hh:
                hh = r_max - r
            a1 = accel(lam)
            a2 = accel(lam + 0.5 * hh * mu)
            mu2 = mu + 0.5 * hh * a1
            a3 = accel(lam + 0.5 * hh * mu2)
            mu3 = mu + 0.5 * hh * a2
            a4 = accel(lam + hh * mu3)
            lam, mu = (
                lam + hh / 6.0 * (mu + 2 * mu2 + 2 * mu3 + (mu + hh * a3)),
                mu + hh / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4),
            )
            r = r_max if hh == r_max - r else r + hh
            rs_list.append(r)
            ys_list.append((lam, mu))
        rs = np.array(rs_list)
        ys = np.array(ys_list)
        big_f = horizon_function(ys[:, 0], n, eps, m, q, kappa)
        resid = np.abs(ys[:, 1] ** 2 - big_f) / np.maximum(1.0, np.abs(big_f))
        if resid.max() <= tol:
            break
        h *= 0.5
        if h < 1e-7:
            raise ArithmeticError(f"warp ODE step underflow (residual {resid.max():.3g})")
    lam = ys[:, 0]
    if np.any(np.diff(lam) <= 0):
        raise ArithmeticError("warp table is not monotone")
    dlam = np.sqrt(np.maximum(horizon_function(lam, n, eps, m, q, kappa), 0.0))
    dlam[0] = 0.0
    lam[0] = s0
    for arr in (rs, lam, dlam):
        arr.setflags(write=False)
    return WarpTable(rs, lam, dlam, float(resid.max()))


def algebraic_residual(table: WarpTable, n: int, eps: int, m: float, q: float, kappa: float) -> np.ndarray:
    """Per-node |lambda'^2 - F(lambda)| of a stored table."""
    return np.abs(table.dlam**2 - horizon_function(table.lam, n, eps, m, q, kappa))


@dataclass(frozen=True)
class AmbientSpace:
    kind: Kind
    n: int
    fiber_eps: int = 1
    mass: float = 0.0
    charge: float = 0.0
    kappa: float = 1.0
    r_domain: tuple[float, float] = (0.0, math.inf)
    horizon_radius: float = 0.0
    fiber_area: float = 0.0
    warp_table: WarpTable | None = field(default=None, repr=False)

    # warping function and its derivatives ---------------------------------

    def lam(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.EUCLIDEAN:
            return r.copy()
        if self.kind is Kind.SPHERE:
            return np.sin(r)
        if self.kind is Kind.HYPERBOLIC:
            return np.sinh(r)
        return self._hermite(r)

    def dlam(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.EUCLIDEAN:
            return np.ones_like(r)
        if self.kind is Kind.SPHERE:
            return np.cos(r)
        if self.kind is Kind.HYPERBOLIC:
            return np.cosh(r)
        return self.dlam_of_lam(self._hermite(r))

    def ddlam(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind is Kind.EUCLIDEAN:
            return np.zeros_like(r)
        if self.kind is Kind.SPHERE:
            return -np.sin(r)
        if self.kind is Kind.HYPERBOLIC:
            return np.sinh(r)
        return 0.5 * horizon_function_prime(self._hermite(r), self.n, self.mass, self.charge, self.kappa)

    def warp(self, r) -> tuple[np.ndarray, np.ndarray]:
        """(lambda, lambda') in one call; avoids a second table lookup."""
        if self.kind is not Kind.ADSRN:
            return self.lam(r), self.dlam(r)
        lam = self._hermite(np.asarray(r, dtype=float))
        return lam, self.dlam_of_lam(lam)

    def dlam_of_lam(self, lam):
        f = horizon_function(lam, self.n, self.fiber_eps, self.mass, self.charge, self.kappa)
        return np.sqrt(np.maximum(f, 0.0))

    def _hermite(self, r: np.ndarray) -> np.ndarray:
        t = self.warp_table
        self.check_domain(r)
        idx = np.clip(np.searchsorted(t.r, r, side="right") - 1, 0, len(t.r) - 2)
        r0, r1 = t.r[idx], t.r[idx + 1]
        h = r1 - r0
        s = (r - r0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s**2 * (3 - 2 * s)
        h11 = s**2 * (s - 1)
        return h00 * t.lam[idx] + h10 * h * t.dlam[idx] + h01 * t.lam[idx + 1] + h11 * h * t.dlam[idx + 1]

    def check_domain(self, r) -> None:
        r = np.asarray(r)
        a, b = self.r_domain
        if np.any(r < a) or np.any(r > b) or not np.all(np.isfinite(r)):
            raise DomainError(f"radius outside [{a}, {b}] for {self.kind.value} ambient")

    def radius_of_lambda(self, s: float) -> float:
        """Inverse warping function: the r with lambda(r) = s."""
        from scipy.optimize import brentq

        a, b = self.r_domain
        b = min(b, 50.0)
        return brentq(lambda r: float(self.lam(r)) - s, a, b, xtol=1e-15, rtol=1e-15)

    # fiber data ------------------------------------------------------------

    @property
    def horizon_area(self) -> float:
        """|dM| = |Gamma|: area of the inner boundary {a} x N (0 if degenerate)."""
        return self.fiber_area * self.horizon_radius ** (self.n - 1)

    @property
    def horizon_term(self) -> float:
        return self.horizon_radius / self.n * self.horizon_area

    def to_params(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "n": self.n}
        if self.kind is Kind.ADSRN:
            d.update(
                eps=self.fiber_eps,
                mass=self.mass,
                charge=self.charge,
                kappa=self.kappa,
                r_max=self.r_domain[1],
                fiber_area=self.fiber_area,
            )
        if self.kind is Kind.SPHERE and self.r_domain[1] != math.pi:
            d["r_max"] = self.r_domain[1]
        return d


def make_ambient(kind: str | Kind, n: int = 3, **params) -> AmbientSpace:
    """Build an ambient space.

    AdsRN parameters: ``mass``, ``charge``, ``kappa``, ``eps`` (fiber sectional
    curvature, default 1), ``r_max`` (table extent, default 8), ``fiber_area``
    (required unless eps = 1, where it is omega_{n-1}).
    """
    kind = Kind(kind)
    n = int(n)
    if n < 3:
        raise ValueError("ambient dimension n must be >= 3")
    omega = sphere_area(n - 1)
    if kind is Kind.EUCLIDEAN:
        return AmbientSpace(kind, n, fiber_area=omega)
    if kind is Kind.HYPERBOLIC:
        return AmbientSpace(kind, n, fiber_area=omega)
    if kind is Kind.SPHERE:
        r_max = float(params.get("r_max", math.pi))
        if not 0 < r_max <= math.pi:
            raise ValueError("sphere radial domain must lie within (0, pi)")
        return AmbientSpace(kind, n, r_domain=(0.0, r_max), fiber_area=omega)

    eps = int(params.get("eps", 1))
    m = float(params.get("mass", 1.0))
    q = float(params.get("charge", 0.0))
    kappa = float(params.get("kappa", 1.0))
    r_max = float(params.get("r_max", 8.0))
    if eps not in (-1, 0, 1):
        raise ValueError("fiber curvature eps must be -1, 0 or 1")
    if not (0 <= q < m < math.inf) or kappa <= 0:
        raise ValueError("adS-RN parameters need 0 <= q < m and kappa > 0")
    if eps == 1:
        fiber_area = float(params.get("fiber_area", omega))
    else:
        if "fiber_area" not in params:
            raise ValueError("fiber_area is required when eps != 1")
        fiber_area = float(params["fiber_area"])
    s0 = horizon_root(n, eps, m, q, kappa)
    table = solve_warp_ode(n, eps, m, q, kappa, r_max=r_max, s0=s0)
    return AmbientSpace(
        kind,
        n,
        fiber_eps=eps,
        mass=m,
        charge=q,
        kappa=kappa,
        r_domain=(0.0, r_max),
        horizon_radius=s0,
        fiber_area=fiber_area,
        warp_table=table,
    )


def ambient_from_params(params: dict[str, Any]) -> AmbientSpace:
    params = dict(params)
    kind = params.pop("kind")
    n = params.pop("n", 3)
    return make_ambient(kind, n, **params)
