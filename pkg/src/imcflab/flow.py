"""Inverse mean curvature flow of radial graphs.

A star-shaped graph r = rho(phi, t) moves with normal speed 1/H exactly when
d rho/dt = v / H, v = sqrt(1 + rho'^2 / lambda^2). The equation is advanced
with an explicit Heun (two-stage Runge-Kutta) step; the embedded Euler step
gives the local error estimate that drives the adaptive step size.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ambient import AmbientSpace, Kind
from .geometry import (
    GeometricReport,
    _measures_from_arrays,
    geometric_report,
    principal_curvatures,
)
from .shapes import RadialProfile


class Termination(str, enum.Enum):
    MAX_TIME = "MaxTime"
    SPHERE_CONVERGED = "SphereConverged"
    EQUATOR_REACHED = "EquatorReached"
    MEAN_CONVEXITY_LOST = "MeanConvexityLost"
    STEP_UNDERFLOW = "StepUnderflow"


class FlowError(ArithmeticError):
    def __init__(self, message: str, trace: "FlowTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class NonMeanConvex(FlowError):
    pass


class StepUnderflow(FlowError):
    pass


@dataclass(frozen=True)
class FlowState:
    t: float
    profile: RadialProfile
    dt_last: float
    report: GeometricReport


@dataclass(frozen=True)
class FlowSample:
    t: float
    Q: float
    E: float
    area: float
    deviation: float
    min_H: float
    max_H: float
    weighted_volume: float
    volume: float
    flux_dlam: float  # int_Sigma lambda'/H dSigma
    flux_one: float  # int_Sigma 1/H dSigma
    max_lam: float


@dataclass
class FlowTrace:
    samples: list[FlowSample] = field(default_factory=list)
    profiles: list[RadialProfile] = field(default_factory=list)
    termination: Termination | None = None
    steps: int = 0
    rejected: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    @property
    def final(self) -> FlowSample:
        return self.samples[-1]

    def to_csv(self, path: str | Path) -> None:
        cols = ("t", "Q", "E", "area", "deviation", "min_H")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for s in self.samples:
                writer.writerow([f"{getattr(s, c):.17g}" for c in cols])


@dataclass(frozen=True)
class FlowConfig:
    t_max: float = 2.0
    sample_dt: float = 0.05
    err_tol: float = 1e-8
    max_drho_frac: float = 1e-3
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    tol_sphere: float = 0.0
    h_min: float = 1e-2
    max_steps: int = 2_000_000

    def validate(self) -> None:
        if self.t_max <= 0 or self.sample_dt <= 0:
            raise ValueError("t_max and sample_dt must be positive")
        if self.err_tol <= 0 or self.max_drho_frac <= 0:
            raise ValueError("tolerances must be positive")


def velocity(rho: np.ndarray, profile: RadialProfile, ambient: AmbientSpace):
    """Graph speed v/H and the mean curvature at every node."""
    g = profile.grid
    drho, d2rho = g.regular_derivatives(rho)
    lam, dlam = ambient.warp(rho)
    km, kp, v = principal_curvatures(g.phi, rho, drho, d2rho, lam, dlam)
    H = km + (profile.n - 2) * kp
    return v / H, H, lam


def _with_rho(profile: RadialProfile, rho: np.ndarray) -> RadialProfile:
    return RadialProfile(profile.n, rho, profile.flags)


def make_state(profile: RadialProfile, ambient: AmbientSpace, t: float = 0.0, dt_last: float = 0.0) -> FlowState:
    return FlowState(t, profile, dt_last, geometric_report(profile, ambient))


def _heun(profile: RadialProfile, ambient: AmbientSpace, dt: float):
    rho = profile.rho
    k1, h1, lam = velocity(rho, profile, ambient)
    if np.min(h1) <= 0:
        raise NonMeanConvex(f"min H = {np.min(h1):.3g} <= 0")
    pred = rho + dt * k1
    ambient.check_domain(pred)
    k2, h2, _ = velocity(pred, profile, ambient)
    if np.min(h2) <= 0:
        raise NonMeanConvex(f"min H = {np.min(h2):.3g} <= 0 in stage 2")
    new = rho + 0.5 * dt * (k1 + k2)
    err = 0.5 * dt * np.max(np.abs(k2 - k1))
    return new, err, float(np.min(lam))


def imcf_step(state: FlowState, ambient: AmbientSpace, dt: float) -> FlowState:
    """One explicit Heun step of d rho/dt = v/H."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    new, _, _ = _heun(state.profile, ambient, dt)
    profile = _with_rho(state.profile, new)
    report = geometric_report(profile, ambient)
    if report.min_H <= 0:
        raise NonMeanConvex(f"min H = {report.min_H:.3g} after step")
    return FlowState(state.t + dt, profile, dt, report)


def rescaled_deviation(state: FlowState) -> float:
    """(max - min) / mean of the radius after rescaling by exp(-t/(n-1)).

    The mean is the fiber-measure average. The ratio is scale invariant, so the
    rescaling factor cancels; it is kept for clarity.
    """
    p = state.profile
    scaled = math.exp(-state.t / (p.n - 1)) * p.rho
    w = p.grid.weights * np.sin(p.phi) ** (p.n - 2)
    mean = float(np.sum(w * scaled) / np.sum(w))
    return float(np.ptp(scaled) / mean)


def _sample(state: FlowState, ambient: AmbientSpace) -> FlowSample:
    p, rep = state.profile, state.report
    drho, d2rho = p.derivatives()
    m = _measures_from_arrays(p, ambient, drho, d2rho)
    dev = rescaled_deviation(state) if ambient.kind is Kind.EUCLIDEAN else math.nan
    return FlowSample(
        t=state.t,
        Q=rep.Q,
        E=rep.E,
        area=rep.area,
        deviation=dev,
        min_H=float(m.H.min()),
        max_H=float(m.H.max()),
        weighted_volume=rep.weighted_volume,
        volume=rep.volume,
        flux_dlam=float(np.sum(m.weights * m.dlam / m.H)),
        flux_one=float(np.sum(m.weights / m.H)),
        max_lam=float(m.lam.max()),
    )


def imcf_run(initial: RadialProfile, ambient: AmbientSpace, config: FlowConfig = FlowConfig()) -> FlowTrace:
    """Integrate IMCF until t_max or a stopping criterion.

    Stopping: Euclidean runs stop early once the rescaled deviation drops
    below ``tol_sphere`` (if positive); sphere-ambient runs stop when
    max H < ``h_min`` (the flow reaches an equator in finite time). In the
    sphere ambient, extra samples are recorded as max H decays so the equator
    limits can be extrapolated.
    """
    config.validate()
    state = make_state(initial, ambient)
    if state.report.min_H <= 0:
        raise NonMeanConvex("initial surface is not strictly mean convex")
    if ambient.kind is Kind.ADSRN and np.min(initial.rho) < ambient.r_domain[0] + 1e-3 * ambient.horizon_radius:
        raise FlowError("initial surface must stay at least 1e-3 s0 away from the horizon")
    if ambient.kind is Kind.SPHERE and not state.report.strictly_convex:
        raise FlowError("sphere-ambient flow needs a strictly convex initial surface")
    trace = FlowTrace()
    trace.samples.append(_sample(state, ambient))
    trace.profiles.append(state.profile)

    sphere = ambient.kind is Kind.SPHERE
    dt = config.dt_init
    next_sample = config.sample_dt
    last_sampled_h = trace.final.max_H
    rho = initial.rho
    t = 0.0
    while True:
        if t >= config.t_max - 1e-14:
            trace.termination = Termination.MAX_TIME
            break
        if trace.steps >= config.max_steps:
            trace.termination = Termination.STEP_UNDERFLOW
            raise StepUnderflow("step budget exhausted", trace)
        step = min(dt, next_sample - t, config.t_max - t)
        try:
            new, err, lam_min = _heun(_with_rho(initial, rho), ambient, step)
        except NonMeanConvex:
            new, err, lam_min = None, math.inf, 0.0
        except ValueError:  # left the radial domain
            new, err, lam_min = None, math.inf, 0.0
        scale = float(np.max(rho))
        ok = new is not None and err <= config.err_tol * scale
        if ok and np.max(np.abs(new - rho)) > config.max_drho_frac * lam_min:
            ok = False
            err = max(err, 4.0 * config.err_tol * scale)
        if not ok:
            trace.rejected += 1
            dt = step * (0.5 if not math.isfinite(err) else max(0.2, 0.9 * math.sqrt(config.err_tol * scale / err)))
            if dt < config.dt_min:
                trace.termination = Termination.STEP_UNDERFLOW
                raise StepUnderflow(f"dt {dt:.3g} below {config.dt_min:g} at t={t:.6g}", trace)
            continue
        trace.steps += 1
        t += step
        rho = new
        opt = 2.0 * dt if err == 0 else 0.9 * step * math.sqrt(config.err_tol * scale / err)
        dt = min(max(opt, 0.2 * dt), 2.0 * dt)
        at_sample = abs(t - next_sample) < 1e-12 or t >= config.t_max - 1e-14
        probe = None
        if sphere:
            _, h, _ = velocity(rho, initial, ambient)
            probe = float(np.max(h))
            if probe < config.h_min or probe < 0.9 * last_sampled_h and probe < 0.5:
                at_sample = True
        if not at_sample:
            continue
        if abs(t - next_sample) < 1e-12:
            next_sample += config.sample_dt
        state = FlowState(t, _with_rho(initial, rho), step, geometric_report(_with_rho(initial, rho), ambient))
        sample = _sample(state, ambient)
        trace.samples.append(sample)
        trace.profiles.append(state.profile)
        last_sampled_h = sample.max_H
        if sample.min_H <= 0:
            trace.termination = Termination.MEAN_CONVEXITY_LOST
            raise NonMeanConvex(f"mean convexity lost at t={t:.6g}", trace)
        if sphere and sample.max_H < config.h_min:
            trace.termination = Termination.EQUATOR_REACHED
            break
        if ambient.kind is Kind.EUCLIDEAN and config.tol_sphere > 0 and sample.deviation < config.tol_sphere:
            trace.termination = Termination.SPHERE_CONVERGED
            break
    return trace


def coarea_check(prev: FlowSample, mid: FlowSample, nxt: FlowSample) -> dict[str, float]:
    """Central-difference residuals of the IMCF evolution identities at ``mid``.

    Returns relative residuals of d/dt int lambda' dOmega = int lambda'/H dSigma,
    d/dt Vol = int 1/H dSigma and d/dt |Sigma| = |Sigma|.
    """
    dt = nxt.t - prev.t
    d_wvol = (nxt.weighted_volume - prev.weighted_volume) / dt
    d_vol = (nxt.volume - prev.volume) / dt
    d_area = (nxt.area - prev.area) / dt
    return {
        "weighted_volume": abs(d_wvol - mid.flux_dlam) / abs(mid.flux_dlam),
        "volume": abs(d_vol - mid.flux_one) / abs(mid.flux_one),
        "area": abs(d_area - mid.area) / mid.area,
    }


def extrapolate_to_equator(trace: FlowTrace, names=("area", "Q"), points: int = 6) -> dict[str, float]:
    """Quadratic fit of sampled quantities against max H, evaluated at H = 0."""
    hs = trace.column("max_H")[-points:]
    out = {}
    for name in names:
        ys = trace.column(name)[-points:]
        deg = min(2, len(hs) - 1)
        out[name] = float(np.polyval(np.polyfit(hs, ys, deg), 0.0))
    return out


def equator_center_offset(profile: RadialProfile) -> float:
    """Angle between the pole and the center of the best-fit great sphere.

    Points of S^n on the meridian plane embed as (cos r, sin r cos phi, ...);
    a great sphere through them whose center lies on the symmetry circle
    (cos a, sin a) satisfies cos r cos a + sin r cos phi sin a = 0. The center
    is the least-squares null vector of that 2x2 system.
    """
    r, phi = profile.rho, profile.phi
    w = profile.grid.weights * np.sin(phi) ** (profile.n - 2) * np.sin(r) ** (profile.n - 1)
    a = np.stack([np.cos(r), np.sin(r) * np.cos(phi)], axis=1)
    m = (a * w[:, None]).T @ a
    vals, vecs = np.linalg.eigh(m)
    c = vecs[:, 0]
    return float(math.atan2(abs(c[1]), abs(c[0])))


__all__ = [
    "FlowConfig",
    "FlowError",
    "FlowSample",
    "FlowState",
    "FlowTrace",
    "NonMeanConvex",
    "StepUnderflow",
    "Termination",
    "coarea_check",
    "equator_center_offset",
    "extrapolate_to_equator",
    "imcf_run",
    "imcf_step",
    "make_state",
    "rescaled_deviation",
]
