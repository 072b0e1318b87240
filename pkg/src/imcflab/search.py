"""Derivative-free search for small scale-invariant polar moments.

The objective (|Sigma|/omega)^(-(n+1)/(n-1)) int r^2 dSigma is minimized over
profiles rho = 1 + sum_{l >= 1} c_l P_l(cos phi) with a Nelder-Mead simplex.
Mean-convexity is a constraint enforced by a penalty; the best shape is
always a feasible evaluated point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import legder, legval
from scipy.optimize import minimize, minimize_scalar

from .ambient import AmbientSpace, Kind, make_ambient
from .geometry import geometric_report, principal_curvatures
from .shapes import (
    ShapeError,
    fillmore_curve,
    legendre_profile,
    legendre_series,
    parametric_to_polar,
    project_legendre,
)
from .spectral import polar_grid, sphere_area

MAX_MODES = 16
PENALTY = 1e3


def lower_bound(n: int = 3) -> float:
    """Certified floor ((n-1)/n)^2 omega_{n-1} for mean-convex star-shaped shapes."""
    return ((n - 1) / n) ** 2 * sphere_area(n - 1)


def _legendre_H(c: np.ndarray, phi: np.ndarray, n: int) -> np.ndarray:
    """Euclidean mean curvature of rho = sum c_l P_l(cos phi); phi must include both poles.

    Derivatives are exact: with x = cos(phi), rho' = -sin(phi) P'(x) and
    rho'' = sin^2(phi) P''(x) - cos(phi) P'(x).
    """
    x, s = np.cos(phi), np.sin(phi)
    rho = legval(x, c)
    d1 = legval(x, legder(c)) if c.size > 1 else np.zeros_like(x)
    d2 = legval(x, legder(c, 2)) if c.size > 2 else np.zeros_like(x)
    km, kp, _ = principal_curvatures(phi, rho, -s * d1, s**2 * d2 - x * d1, rho, np.ones_like(rho))
    return km + (n - 2) * kp


def dense_min_H(coeffs: Sequence[float], n: int = 3, points: int = 1025) -> float:
    """Minimum mean curvature: uniform scan, then a bounded refinement around the smallest sample."""
    c = np.asarray(coeffs, dtype=float)
    phi = np.linspace(0.0, math.pi, points)
    h = _legendre_H(c, phi, n)
    j = int(np.argmin(h))
    lo, hi = phi[max(j - 1, 0)], phi[min(j + 1, points - 1)]

    def at(t: float) -> float:
        return float(_legendre_H(c, np.array([0.0, t, math.pi]), n)[1])

    res = minimize_scalar(at, bounds=(max(lo, 1e-9), min(hi, math.pi - 1e-9)), method="bounded",
                          options={"xatol": 1e-10})
    return float(min(h[j], res.fun))


@dataclass(frozen=True)
class Evaluation:
    value: float
    min_H: float
    strictly_convex: bool

    @property
    def feasible(self) -> bool:
        return self.min_H > 0

    # min_H combines the grid nodes with a dense closed-form scan, since
    # near-optimal shapes can dip below zero between nodes


def _evaluate(coeffs: Sequence[float], ambient: AmbientSpace, grid_size: int) -> Evaluation:
    if ambient.kind is not Kind.EUCLIDEAN:
        raise ValueError("the polar moment objective is Euclidean")
    profile = legendre_profile(ambient.n, coeffs, grid_size)
    rep = geometric_report(profile, ambient)
    n = ambient.n
    omega = sphere_area(n - 1)
    value = (rep.area / omega) ** (-(n + 1) / (n - 1)) * rep.r2_moment
    min_h = min(rep.min_H, dense_min_H(coeffs, n))
    return Evaluation(value, min_h, rep.strictly_convex)


def pmi_objective(coeffs: Sequence[float], ambient: AmbientSpace | None = None, grid_size: int = 64) -> float:
    """Scale-invariant polar moment of the Legendre profile.

    Raises ShapeError when the radius is not positive. Mean convexity is not
    checked here; see ``PenalizedObjective``.
    """
    ambient = ambient if ambient is not None else make_ambient("euclidean", 3)
    return _evaluate(coeffs, ambient, grid_size).value


class PenalizedObjective:
    """Objective over c_1..c_M with c_0 = 1.

    Infeasible points (min H <= 0 or nonpositive radius) score the value of
    the nearest feasible point evaluated so far plus PENALTY times the
    violation, so no infeasible point can undercut the best feasible one.
    """

    def __init__(self, ambient: AmbientSpace, grid_size: int = 64, penalty: float = PENALTY):
        self.ambient = ambient
        self.grid_size = grid_size
        self.penalty = penalty
        self.feasible_x: list[np.ndarray] = []
        self.feasible_f: list[float] = []
        self.evaluations = 0
        self.best_x: np.ndarray | None = None
        self.best_f = math.inf
        self.best_eval: Evaluation | None = None

    def coeffs(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate(([1.0], np.asarray(x, dtype=float)))

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        x = np.array(x, dtype=float)
        try:
            ev = _evaluate(self.coeffs(x), self.ambient, self.grid_size)
            violation = max(0.0, -ev.min_H)
        except ShapeError:
            ev = None
            # radius not positive: distance to the positivity boundary
            rho = legendre_series(self.coeffs(x), np.cos(polar_grid(self.grid_size).phi))
            violation = 1.0 + max(0.0, -float(np.min(rho)))
        if ev is not None and ev.feasible:
            self.feasible_x.append(x)
            self.feasible_f.append(ev.value)
            if ev.value < self.best_f:
                self.best_f, self.best_x, self.best_eval = ev.value, x, ev
            return ev.value
        return self._anchor(x) + self.penalty * max(violation, 1e-12)

    def _anchor(self, x: np.ndarray) -> float:
        if not self.feasible_x:
            return 4.0 * math.pi * 10.0
        d = [float(np.linalg.norm(x - y)) for y in self.feasible_x]
        return self.feasible_f[int(np.argmin(d))]


@dataclass(frozen=True)
class SearchConfig:
    modes: int = 12
    budget: int = 2000  # objective evaluations per restart
    restarts: int = 2
    seed: int = 0
    start: str | tuple[float, ...] = "sphere"  # "sphere", "fillmore" or explicit c_0..c_M
    grid_size: int = 64
    simplex_scale: float = 0.02
    n: int = 3

    def validate(self) -> None:
        if not 0 <= self.modes <= MAX_MODES:
            raise ValueError(f"modes must be in [0, {MAX_MODES}]")
        if self.budget < 0 or self.restarts < 0:
            raise ValueError("budget and restarts must be nonnegative")
        if self.simplex_scale <= 0:
            raise ValueError("simplex_scale must be positive")
        if isinstance(self.start, str) and self.start not in ("sphere", "fillmore"):
            raise ValueError(f"unknown start {self.start!r}")


@dataclass
class SearchResult:
    best_coeffs: np.ndarray
    best_value: float
    history: list[tuple[int, float]] = field(default_factory=list)
    feasibility: dict = field(default_factory=dict)
    converged: bool = False
    evaluations: int = 0
    start_value: float = math.nan

    def history_to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("iteration", "value"))
            for it, val in self.history:
                w.writerow((it, f"{val:.17g}"))

    def to_dict(self) -> dict:
        return {
            "best_coeffs": [float(c) for c in self.best_coeffs],
            "best_value": self.best_value,
            "start_value": self.start_value,
            "converged": self.converged,
            "evaluations": self.evaluations,
            "iterations": len(self.history),
            "feasibility": self.feasibility,
        }


def fillmore_seed(modes: int = 12, grid_size: int = 256) -> np.ndarray:
    """Legendre coefficients c_0..c_modes of the rotated meridian, scaled to c_0 = 1."""
    coeffs = project_legendre(parametric_to_polar(fillmore_curve(), grid_size=grid_size), modes + 1)
    return coeffs / coeffs[0]


def _start_coeffs(config: SearchConfig) -> np.ndarray:
    if config.start == "sphere":
        c = np.zeros(config.modes + 1)
        c[0] = 1.0
        return c
    if config.start == "fillmore":
        return fillmore_seed(config.modes)
    c = np.asarray(config.start, dtype=float)
    if c.size == 0 or c[0] <= 0:
        raise ValueError("explicit start needs a positive c_0")
    c = c / c[0]
    out = np.zeros(config.modes + 1)
    k = min(c.size, out.size)
    out[:k] = c[:k]
    return out


def _simplex(x0: np.ndarray, scale: float, rng: np.random.Generator) -> np.ndarray:
    dim = x0.size
    steps = scale * (1.0 + 0.5 * rng.random(dim))
    signs = rng.choice((-1.0, 1.0), size=dim)
    sim = np.repeat(x0[None, :], dim + 1, axis=0)
    sim[1:] += np.diag(signs * steps)
    return sim


def minimize_pmi(config: SearchConfig = SearchConfig()) -> SearchResult:
    """Nelder-Mead descent with restarts around the best feasible point.

    The best shape is re-evaluated on the doubled grid; feasibility flags and
    ``fine_value`` come from that evaluation.
    """
    config.validate()
    ambient = make_ambient("euclidean", config.n)
    rng = np.random.default_rng(config.seed)
    obj = PenalizedObjective(ambient, config.grid_size)
    start = _start_coeffs(config)
    obj(start[1:])
    if obj.best_eval is None:
        raise ValueError("the starting shape is not mean convex")
    start_value = obj.best_f
    history: list[tuple[int, float]] = [(0, obj.best_f)]
    converged = config.budget == 0 or config.modes == 0
    if config.modes > 0 and config.budget > 0:
        for _ in range(config.restarts + 1):
            x0 = obj.best_x.copy()

            def record(_xk):
                history.append((len(history), obj.best_f))

            res = minimize(
                obj,
                x0,
                method="Nelder-Mead",
                callback=record,
                options={
                    "maxfev": config.budget,
                    "initial_simplex": _simplex(x0, config.simplex_scale, rng),
                    "xatol": 1e-9,
                    "fatol": 1e-12,
                },
            )
            converged = bool(res.success)
    best = obj.coeffs(obj.best_x)
    fine = _evaluate(best, ambient, 2 * config.grid_size)
    feasibility = {
        "mean_convex": fine.min_H > 0,
        "strictly_convex": fine.strictly_convex,
        "min_H": fine.min_H,
        "star_shaped": True,
        "fine_value": fine.value,
        "grid_size": 2 * config.grid_size,
    }
    return SearchResult(
        best_coeffs=best,
        best_value=obj.best_f,
        history=history,
        feasibility=feasibility,
        converged=converged,
        evaluations=obj.evaluations,
        start_value=start_value,
    )


__all__ = [
    "MAX_MODES",
    "PENALTY",
    "PenalizedObjective",
    "SearchConfig",
    "SearchResult",
    "fillmore_seed",
    "lower_bound",
    "minimize_pmi",
    "pmi_objective",
]
