"""End-to-end acceptance criteria, each at its stated tolerance and runtime budget.

Every criterion records one PASS/FAIL line (printed, and repeated in the
pytest terminal summary) before asserting.
"""

import math
import time

import numpy as np
import pytest

import oracles
from imcflab.ambient import algebraic_residual, horizon_root, make_ambient
from imcflab.flow import FlowConfig, Termination, extrapolate_to_equator, imcf_run
from imcflab.geometry import geometric_report, parametric_curvatures
from imcflab.inequalities import (
    AREA_SQ_EXACT,
    R2_MOMENT_EXACT,
    Status,
    applicable_checks,
    check_corollary_k0,
    check_holder,
    check_theorem_rn,
    run_suite,
    verify_counterexample,
)
from imcflab.search import SearchConfig, lower_bound, minimize_pmi
from imcflab.shapes import fillmore_curve, perturbed_sphere, random_perturbed_spheres, sphere_profile

pytestmark = pytest.mark.acceptance

Q_SPHERE = 2 / 3 * (4 * math.pi) ** -0.5
E_SPHERE = 2 * (4 * math.pi) ** -0.5
E3 = make_ambient("euclidean", 3)
S3 = make_ambient("sphere", 3)
H3 = make_ambient("hyperbolic", 3)


def _verdict(k, log, clauses, elapsed, budget):
    """clauses: list of (label, ok, value text)."""
    clauses = clauses + [("runtime", budget is None or elapsed < budget, f"{elapsed:.2f}s" + (f" < {budget}s" if budget else ""))]
    ok = all(c[1] for c in clauses)
    failed = [c[0] for c in clauses if not c[1]]
    detail = "; ".join(f"{c[0]} {c[2]}" for c in clauses)
    if failed:
        detail += f" [failed: {', '.join(failed)}]"
    log(k, ok, detail)
    return ok, detail


def test_criterion_1_counterexample_constants(acceptance_log):
    t0 = time.perf_counter()
    cx = verify_counterexample(rtol=1e-6)
    elapsed = time.perf_counter() - t0
    err_a = abs(cx.area_sq - AREA_SQ_EXACT) / AREA_SQ_EXACT
    err_m = abs(cx.r2_moment - R2_MOMENT_EXACT) / R2_MOMENT_EXACT
    bound = 1 / (4 * math.pi)
    ok, detail = _verdict(1, acceptance_log, [
        ("|S|^2 rel err", err_a <= 1e-6, f"{err_a:.1e}"),
        ("int r^2 rel err", err_m <= 1e-6, f"{err_m:.1e}"),
        ("ratio < 1/(4pi)", cx.ratio < bound, f"{cx.ratio:.10f} < {bound:.10f}"),
        ("relative margin", cx.relative_margin >= 5e-4, f"{cx.relative_margin:.3e} (absolute gap {bound - cx.ratio:.3e})"),
    ], elapsed, 5)
    assert ok, detail


def test_criterion_2_counterexample_curvature(acceptance_log):
    t0 = time.perf_counter()
    t = np.linspace(0.0, math.pi, 10_000)
    km, kp = parametric_curvatures(fillmore_curve(), t)
    kappas = np.concatenate([km, kp])
    lo, hi = float(kappas.min()), float(kappas.max())
    elapsed = time.perf_counter() - t0
    ok, detail = _verdict(2, acceptance_log, [
        ("min kappa", abs(lo - 1 / 17) <= 1e-6, f"{lo:.12f} vs 1/17"),
        ("max kappa", abs(hi - 1) <= 1e-6, f"{hi:.12f} vs 1"),
    ], elapsed, 5)
    assert ok, detail


def test_criterion_3_equality_rigidity(acceptance_log):
    t0 = time.perf_counter()
    ads = make_ambient("adsrn", 3, mass=1.0, charge=0.5)
    cases = [(E3, R) for R in (0.5, 1.0, 2.0)]
    cases += [(S3, r) for r in (math.pi / 6, math.pi / 4, math.pi / 3)]
    cases += [(H3, r) for r in (0.5, 1.0, 2.0)]
    cases += [(ads, ads.radius_of_lambda(f * ads.horizon_radius)) for f in (1.5, 2.0)]
    worst, count, not_equal = 0.0, 0, []
    for amb, r in cases:
        rep = geometric_report(sphere_profile(3, r, 64), amb)
        for res in applicable_checks(rep, amb):
            count += 1
            worst = max(worst, abs(res.rel_slack))
            if not (res.equality_case and abs(res.rel_slack) <= 1e-7):
                not_equal.append(f"{amb.kind.value}:{r:.4g}:{res.name}")
    elapsed = time.perf_counter() - t0
    ok, detail = _verdict(3, acceptance_log, [
        ("checks", count >= 30, f"{count} over {len(cases)} shapes"),
        ("max |rel_slack|", worst <= 1e-7 and not not_equal, f"{worst:.1e}" + (f" {not_equal}" if not_equal else "")),
    ], elapsed, 10)
    assert ok, detail


@pytest.fixture(scope="module")
def euclidean_runs():
    """20 seeded random mean-convex perturbed spheres flowed to t = 2, plus constant profiles."""
    t0 = time.perf_counter()
    shapes = random_perturbed_spheres(3, 20, np.random.default_rng(2024), E3, grid_size=24)
    cfg = FlowConfig(t_max=2.0, sample_dt=0.05)
    runs = [imcf_run(p, E3, cfg) for p in shapes]
    elapsed = time.perf_counter() - t0
    spheres = [imcf_run(sphere_profile(3, R, 24), E3, cfg) for R in (0.5, 1.0, 3.0)]
    return runs, spheres, elapsed


def _max_increase(values):
    v = np.asarray(values)
    return float(np.max(np.diff(v))) / v[0]


def test_criterion_4_q_monotone(acceptance_log, euclidean_runs):
    runs, _, elapsed = euclidean_runs
    inc = max(_max_increase(tr.column("Q")) for tr in runs)
    finals = [tr.final for tr in runs]
    reached = all(abs(s.t - 2.0) < 1e-12 for s in finals)
    dq = max(abs(s.Q - Q_SPHERE) for s in finals)
    ok, detail = _verdict(4, acceptance_log, [
        ("runs", len(runs) == 20 and reached, f"{len(runs)} to t=2"),
        ("max Q increase / Q(0)", inc <= 1e-6, f"{inc:.1e}"),
        ("max |Q(2) - 0.1880632|", dq <= 1e-3, f"{dq:.1e}"),
    ], elapsed, 120)
    assert ok, detail


def test_criterion_5_e_monotone(acceptance_log, euclidean_runs):
    runs, spheres, _ = euclidean_runs
    t0 = time.perf_counter()
    inc = max(_max_increase(tr.column("E")) for tr in runs)
    e_const = [geometric_report(sphere_profile(3, R, 64), E3).E for R in (0.1, 1.0, 7.0)]
    e_const += [e for tr in spheres for e in tr.column("E")]
    de = max(abs(e - E_SPHERE) for e in e_const)
    ok, detail = _verdict(5, acceptance_log, [
        ("max E increase / E(0)", inc <= 1e-6, f"{inc:.1e}"),
        ("max |E - 2(4pi)^-1/2| on constant profiles", de <= 1e-10, f"{de:.1e} over {len(e_const)} samples"),
    ], time.perf_counter() - t0, None)
    assert ok, detail


def test_criterion_6_area_law(acceptance_log, euclidean_runs):
    runs, spheres, _ = euclidean_runs
    t0 = time.perf_counter()
    dev = 0.0
    for tr in runs + spheres:
        t, area = tr.column("t"), tr.column("area")
        keep = t <= 2.0 + 1e-12
        dev = max(dev, float(np.max(np.abs(area[keep] * np.exp(-t[keep]) / area[0] - 1))))
    ok, detail = _verdict(6, acceptance_log, [
        ("max |area e^-t / area0 - 1|", dev <= 1e-5, f"{dev:.1e} over {len(runs) + len(spheres)} runs"),
    ], time.perf_counter() - t0, None)
    assert ok, detail


def _sinh_error(m):
    a = make_ambient("adsrn", 3, mass=m, charge=0.0, kappa=1.0, r_max=3.5)
    r = np.linspace(0.3, 3.0, 10)
    return float(np.max(np.abs(a.lam(r) - np.sinh(r))))


@pytest.fixture(scope="module")
def criterion_7(acceptance_log):
    t0 = time.perf_counter()
    residual = 0.0
    for n, eps, m, q, k in ((3, 1, 1.0, 0.0, 1.0), (3, 1, 1.0, 0.5, 1.0), (4, 1, 2.0, 0.3, 0.7), (3, 0, 1.0, 0.0, 1.0)):
        extra = {} if eps == 1 else {"fiber_area": 1.0}
        amb = make_ambient("adsrn", n, eps=eps, mass=m, charge=q, kappa=k, **extra)
        residual = max(residual, float(np.max(np.abs(algebraic_residual(amb.warp_table, n, eps, m, q, k)))))
    root = horizon_root(3, 1, 1.0, 0.0, 1.0)
    e2, e3 = _sinh_error(1e-2), _sinh_error(1e-3)
    order = math.log10(e2 / e3)
    clauses = [
        ("warp residual", residual <= 1e-8, f"{residual:.1e}"),
        ("horizon root", abs(root - 1) <= 1e-12, f"|s0 - 1| = {abs(root - 1):.1e}"),
        ("m->0 first order", order >= 0.9, f"observed order {order:.3f} (m = 1e-2 to 1e-3)"),
    ]
    _verdict(7, acceptance_log, clauses, time.perf_counter() - t0, None)
    return {c[0]: c for c in clauses}


def test_criterion_7_warp_residual_and_root(criterion_7):
    for key in ("warp residual", "horizon root"):
        assert criterion_7[key][1], criterion_7[key]


@pytest.mark.xfail(strict=True, reason="|lambda_m(r) - sinh r| scales like m log(1/m) in the horizon coordinate")
def test_criterion_7_small_mass_first_order(criterion_7):
    assert criterion_7["m->0 first order"][1], criterion_7["m->0 first order"]


def test_criterion_8_property_suite(acceptance_log):
    t0 = time.perf_counter()
    ads = make_ambient("adsrn", 3, mass=1.0, charge=0.5)
    violations, errors, total, chain_bad = [], 0, 0, 0
    for seed, amb in enumerate((E3, S3, H3, ads)):
        shapes = random_perturbed_spheres(3, 50, np.random.default_rng(100 + seed), amb, grid_size=64)
        suite = run_suite(shapes, amb)
        errors += len(suite.errors)
        total += len(suite.results)
        violations += [
            (amb.kind.value, r.shape, r.name, r.rel_slack)
            for r in suite.results
            if r.status is not Status.HYPOTHESIS_FAILED and r.rel_slack < -1e-9
        ]
        if amb is E3:
            for p in shapes:
                rep = geometric_report(p, E3)
                rn, hold, cor = check_theorem_rn(rep), check_holder(rep), check_corollary_k0(rep)
                chain_ok = hold.passed and cor.rhs <= rn.rhs**2 / rep.area * (1 + 1e-12)
                chain_ok &= cor.passed or not (rn.passed and hold.passed)
                chain_bad += not chain_ok
    elapsed = time.perf_counter() - t0
    ok, detail = _verdict(8, acceptance_log, [
        ("results", total > 0 and errors == 0, f"{total} over 200 shapes, {errors} errors"),
        ("violations beyond -1e-9", not violations, f"{len(violations)}" + (f" {violations[:3]}" if violations else "")),
        ("Holder and implication chain", chain_bad == 0, f"{chain_bad} failures over 50 shapes"),
    ], elapsed, 120)
    assert ok, detail


def test_criterion_9_sphere_ambient_limit(acceptance_log):
    t0 = time.perf_counter()
    p = perturbed_sphere(3, 0.6, [(2, 0.05), (4, 0.01)], 24)
    convex = geometric_report(p, S3).strictly_convex
    tr = imcf_run(p, S3, FlowConfig(t_max=5.0, sample_dt=0.05))
    lim = extrapolate_to_equator(tr)
    da = abs(lim["area"] - 4 * math.pi) / (4 * math.pi)
    dq = abs(lim["Q"] - Q_SPHERE) / Q_SPHERE
    ok, detail = _verdict(9, acceptance_log, [
        ("strictly convex start", convex, str(convex)),
        ("stop", tr.termination is Termination.EQUATOR_REACHED and tr.final.max_H < 1e-2,
         f"{tr.termination.value} at t={tr.final.t:.3f}, max H {tr.final.max_H:.2e}"),
        ("area rel err", da <= 1e-2, f"{da:.1e}"),
        ("Q rel err", dq <= 1e-2, f"{dq:.1e}"),
    ], time.perf_counter() - t0, None)
    assert ok, detail


def test_criterion_10_search_floor_and_improvement(acceptance_log):
    t0 = time.perf_counter()
    floor = lower_bound(3)
    reported = []
    for seed in range(3):
        res = minimize_pmi(SearchConfig(modes=6, budget=400, restarts=1, seed=seed, start="sphere", simplex_scale=0.1))
        reported += [res.best_value, res.start_value, res.feasibility["fine_value"]] + [v for _, v in res.history]
    seeded = minimize_pmi(SearchConfig(modes=12, budget=1500, restarts=1, seed=0, start="fillmore"))
    reported += [seeded.best_value, seeded.start_value, seeded.feasibility["fine_value"]] + [v for _, v in seeded.history]
    elapsed = time.perf_counter() - t0
    lowest = min(reported)
    ok, detail = _verdict(10, acceptance_log, [
        ("floor 16pi/9", abs(floor - 16 * math.pi / 9) < 1e-15 and lowest >= floor, f"lowest reported {lowest:.6f} >= {floor:.6f}"),
        ("seeded best < 4pi", seeded.best_value < 4 * math.pi and seeded.feasibility["mean_convex"],
         f"{seeded.best_value:.6f} (start {seeded.start_value:.6f}, fine grid {seeded.feasibility['fine_value']:.6f})"),
    ], elapsed, 300)
    assert ok, detail


def test_sphere_constants_match_oracles():
    assert Q_SPHERE == pytest.approx(oracles.EXPECTED["sphere_Q_n3"], rel=1e-15)
    assert E_SPHERE == pytest.approx(oracles.EXPECTED["sphere_E_n3"], rel=1e-15)
