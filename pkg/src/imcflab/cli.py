"""Command-line entry point: report, flow, check, counterexample and search.

Every subcommand reads one YAML run configuration; flags override the
seed, grid size and pass tolerance. Outputs are JSON Lines and CSV with
floats at 17 significant digits, each file written atomically.

Exit codes: 0 success, 1 hard failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .ambient import AmbientSpace, NoHorizonError, ambient_from_params
from .flow import FlowConfig, FlowError, FlowTrace, extrapolate_to_equator, imcf_run
from .geometry import GeometricReport, geometric_report, parametric_report
from .inequalities import (
    CounterexampleError,
    InequalityResult,
    Status,
    applicable_checks,
    verify_counterexample,
)
from .search import SearchConfig, minimize_pmi
from .shapes import (
    ParametricCurve,
    RadialProfile,
    ellipse_curve,
    fillmore_curve,
    legendre_profile,
    parametric_to_polar,
    perturbed_sphere,
    random_perturbed_spheres,
    sphere_profile,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SHAPE_TYPES = ("sphere", "slice", "perturbed", "legendre", "random", "fillmore", "spheroid", "file")
SUITES = ("default", "counterexample")


class ConfigError(ValueError):
    pass


# configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    ambient: dict = field(default_factory=lambda: {"kind": "euclidean", "n": 3})
    shapes: tuple = field(default_factory=lambda: ({"type": "sphere", "R": 1.0},))
    flow: FlowConfig = field(default_factory=FlowConfig)
    suite: str = "default"
    search: SearchConfig = field(default_factory=SearchConfig)
    out: str = "out"
    tol: float = 1e-9
    eq_tol: float = 1e-7
    seed: int = 0
    grid: int = 64

    def validate(self) -> None:
        if self.tol < 0 or self.eq_tol < 0:
            raise ConfigError("tolerances must be nonnegative")
        if self.grid < 16:
            raise ConfigError("grid must be >= 16")
        if self.suite not in SUITES:
            raise ConfigError(f"suite must be one of {SUITES}")
        if "kind" not in self.ambient:
            raise ConfigError("ambient.kind is required")
        for spec in self.shapes:
            if not isinstance(spec, dict) or spec.get("type") not in SHAPE_TYPES:
                raise ConfigError(f"shape type must be one of {SHAPE_TYPES}: {spec!r}")
        try:
            self.flow.validate()
            self.search.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        search = dataclasses.asdict(self.search)
        if not isinstance(search["start"], str):
            search["start"] = [float(c) for c in search["start"]]
        return {
            "ambient": dict(self.ambient),
            "shapes": [dict(s) for s in self.shapes],
            "flow": dataclasses.asdict(self.flow),
            "suite": self.suite,
            "search": search,
            "out": self.out,
            "tol": self.tol,
            "eq_tol": self.eq_tol,
            "seed": self.seed,
            "grid": self.grid,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw: dict[str, Any] = {}
            if "ambient" in data:
                kw["ambient"] = dict(data["ambient"])
            if "shapes" in data:
                kw["shapes"] = tuple(_normalize_shape(s) for s in data["shapes"])
            if "flow" in data:
                kw["flow"] = _sub_config(FlowConfig, data["flow"])
            if "search" in data:
                search = dict(data["search"])
                if isinstance(search.get("start"), list):
                    search["start"] = tuple(float(c) for c in search["start"])
                kw["search"] = _sub_config(SearchConfig, search)
            for name, conv in (("suite", str), ("out", str), ("tol", float), ("eq_tol", float),
                               ("seed", int), ("grid", int)):
                if name in data:
                    kw[name] = conv(data[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(data)

    def with_overrides(self, seed=None, grid=None, tol=None, out=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed, search=dataclasses.replace(cfg.search, seed=seed))
        if grid is not None:
            cfg = dataclasses.replace(cfg, grid=grid, search=dataclasses.replace(cfg.search, grid_size=grid))
        if tol is not None:
            cfg = dataclasses.replace(cfg, tol=tol)
        if out is not None:
            cfg = dataclasses.replace(cfg, out=str(out))
        cfg.validate()
        return cfg


def _sub_config(cls, data):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    types = {f.name: type(getattr(cls(), f.name)) for f in dataclasses.fields(cls)}
    out = {}
    for k, v in data.items():
        t = types[k]
        out[k] = t(v) if t in (int, float) else v
    return cls(**out)


def _normalize_shape(spec) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError(f"shape must be a mapping: {spec!r}")
    spec = dict(spec)
    if "modes" in spec:
        spec["modes"] = [[int(l), float(a)] for l, a in spec["modes"]]
    if "coeffs" in spec:
        spec["coeffs"] = [float(c) for c in spec["coeffs"]]
    return spec


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return RunConfig.from_yaml(text)


# shapes ------------------------------------------------------------------------


def build_shapes(cfg: RunConfig, ambient: AmbientSpace) -> list[tuple[str, RadialProfile | ParametricCurve]]:
    """Expand shape specs into labelled polar profiles or parametric meridians."""
    n, grid = ambient.n, cfg.grid
    rng = np.random.default_rng(cfg.seed)
    out: list[tuple[str, Any]] = []
    for i, spec in enumerate(cfg.shapes):
        kind = spec["type"]
        label = str(spec.get("label", f"{kind}{i}"))
        try:
            if kind == "sphere":
                out.append((label, sphere_profile(n, float(spec.get("R", 1.0)), grid)))
            elif kind == "slice":
                s = float(spec.get("factor", 2.0)) * ambient.horizon_radius
                out.append((label, sphere_profile(n, ambient.radius_of_lambda(s), grid)))
            elif kind == "perturbed":
                modes = [(int(l), float(a)) for l, a in spec.get("modes", [])]
                out.append((label, perturbed_sphere(n, float(spec.get("R", 1.0)), modes, grid)))
            elif kind == "legendre":
                out.append((label, legendre_profile(n, spec["coeffs"], grid)))
            elif kind == "random":
                shapes = random_perturbed_spheres(
                    n, int(spec.get("count", 10)), rng, ambient, grid,
                    max_mode=int(spec.get("max_mode", 4)),
                    amplitude=float(spec.get("amplitude", 0.06)),
                )
                out.extend((f"{label}_{j}", p) for j, p in enumerate(shapes))
            elif kind == "fillmore":
                out.append((label, fillmore_curve()))
            elif kind == "spheroid":
                out.append((label, ellipse_curve(float(spec.get("a", 1.0)), float(spec.get("c", 2.0)))))
            elif kind == "file":
                out.append((label, RadialProfile.from_csv(spec["path"], n)))
        except KeyError as exc:
            raise ConfigError(f"shape {label}: missing field {exc}") from exc
    return out


def _as_profile(obj, grid: int, n: int) -> RadialProfile:
    if isinstance(obj, RadialProfile):
        return obj
    return parametric_to_polar(obj, grid_size=grid, n=n)


def _report(obj, ambient: AmbientSpace) -> GeometricReport:
    if isinstance(obj, ParametricCurve):
        if ambient.kind.value != "euclidean" or ambient.n != 3:
            raise ValueError("parametric meridians are integrated in Euclidean 3-space only")
        return parametric_report(obj)
    return geometric_report(obj, ambient)


# output ------------------------------------------------------------------------


def fmt(x: float) -> str:
    """17 significant digits; non-finite values as in Python's JSON."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return f"{x:.17g}"


def to_json(obj) -> str:
    """JSON with every float at 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (float, np.floating)):
        return fmt(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist())
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return json.dumps(obj.value)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonl(rows: Sequence[dict]) -> str:
    return "".join(to_json(r) + "\n" for r in rows)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _result_rows(results: Sequence[InequalityResult]) -> tuple[str, str]:
    jl = _jsonl([r.to_dict() for r in results])
    table = _csv(
        ("shape", "name", "lhs", "rhs", "rel_slack", "status"),
        [(r.shape, r.name, r.lhs, r.rhs, r.rel_slack, r.status.value) for r in results],
    )
    return jl, table


def _trace_csv(trace: FlowTrace) -> str:
    cols = ("t", "Q", "E", "area", "deviation", "min_H")
    return _csv(cols, [[getattr(s, c) for c in cols] for s in trace.samples])


# commands ----------------------------------------------------------------------


def _ambient(cfg: RunConfig) -> AmbientSpace:
    try:
        return ambient_from_params(cfg.ambient)
    except NoHorizonError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"ambient: {exc}") from exc


def cmd_report(cfg: RunConfig, log=print) -> int:
    ambient = _ambient(cfg)
    out = Path(cfg.out)
    rows, status = [], EXIT_OK
    for label, obj in build_shapes(cfg, ambient):
        try:
            rep = _report(obj, ambient)
        except (ValueError, ArithmeticError) as exc:
            log(f"{label}: {type(exc).__name__}: {exc}")
            status = EXIT_FAIL
            continue
        rows.append({"shape": label, **rep.to_dict()})
        if isinstance(obj, ParametricCurve) and obj.name == "fillmore":
            try:
                cx = verify_counterexample()
            except CounterexampleError as exc:
                log(f"{label}: {exc}")
                status = EXIT_FAIL
            else:
                atomic_write(out / "counterexample.json", to_json(cx.to_dict()) + "\n")
        log(f"{label}: area={fmt(rep.area)} Q={fmt(rep.Q)} E={fmt(rep.E)}")
    atomic_write(out / "reports.jsonl", _jsonl(rows))
    if rows:
        header = list(rows[0])
        atomic_write(out / "reports.csv", _csv(header, [[r[h] for h in header] for r in rows]))
    return status


def cmd_flow(cfg: RunConfig, log=print) -> int:
    ambient = _ambient(cfg)
    out = Path(cfg.out)
    summary, status = [], EXIT_OK
    for label, obj in build_shapes(cfg, ambient):
        profile = _as_profile(obj, cfg.grid, ambient.n)
        row: dict[str, Any] = {"shape": label}
        try:
            trace = imcf_run(profile, ambient, cfg.flow)
        except FlowError as exc:
            log(f"{label}: {type(exc).__name__}: {exc}")
            status = EXIT_FAIL
            trace = exc.trace
            row["error"] = str(exc)
        if trace is None or not trace.samples:
            summary.append(row)
            continue
        atomic_write(out / f"flow_{label}.csv", _trace_csv(trace))
        row.update(
            termination=trace.termination,
            steps=trace.steps,
            rejected=trace.rejected,
            t_final=trace.final.t,
            Q_initial=trace.samples[0].Q,
            Q_final=trace.final.Q,
            E_initial=trace.samples[0].E,
            E_final=trace.final.E,
        )
        if trace.termination is not None and trace.termination.value == "EquatorReached":
            ex = extrapolate_to_equator(trace)
            row.update(area_limit=ex["area"], Q_limit=ex["Q"])
        summary.append(row)
        term = trace.termination.value if trace.termination else "error"
        log(f"{label}: {term} t={fmt(trace.final.t)} Q={fmt(trace.final.Q)}")
    atomic_write(out / "flow_summary.jsonl", _jsonl(summary))
    return status


def cmd_check(cfg: RunConfig, log=print) -> int:
    ambient = _ambient(cfg)
    out = Path(cfg.out)
    results: list[InequalityResult] = []
    errors = []
    if cfg.suite == "counterexample":
        try:
            results.extend(verify_counterexample().results)
        except CounterexampleError as exc:
            errors.append(("fillmore", str(exc)))
    for label, obj in build_shapes(cfg, ambient):
        try:
            rep = _report(obj, ambient)
            results.extend(applicable_checks(rep, ambient, tol=cfg.tol, eq_tol=cfg.eq_tol, shape=label))
        except (ValueError, ArithmeticError) as exc:
            errors.append((label, f"{type(exc).__name__}: {exc}"))
    jl, table = _result_rows(results)
    atomic_write(out / "results.jsonl", jl)
    atomic_write(out / "summary.csv", table)
    if errors:
        atomic_write(out / "errors.jsonl", _jsonl([{"shape": s, "error": e} for s, e in errors]))
    fails = [r for r in results if r.status is Status.FAIL]
    counts = {s.value: sum(r.status is s for r in results) for s in Status}
    log(" ".join(f"{k}={v}" for k, v in counts.items()) + f" errors={len(errors)}")
    for r in fails:
        log(f"FAIL {r.shape} {r.name}: lhs={fmt(r.lhs)} rhs={fmt(r.rhs)} rel_slack={fmt(r.rel_slack)}")
    return EXIT_FAIL if fails or errors else EXIT_OK


def cmd_counterexample(cfg: RunConfig, log=print) -> int:
    out = Path(cfg.out)
    try:
        cx = verify_counterexample()
    except CounterexampleError as exc:
        log(str(exc))
        return EXIT_FAIL
    atomic_write(out / "counterexample.json", to_json(cx.to_dict()) + "\n")
    jl, table = _result_rows(cx.results)
    atomic_write(out / "results.jsonl", jl)
    atomic_write(out / "summary.csv", table)
    log(f"ratio={fmt(cx.ratio)} bound={fmt(cx.ratio_bound)} margin={fmt(cx.relative_margin)}")
    fails = [r for r in cx.results if r.status is Status.FAIL]
    return EXIT_FAIL if fails else EXIT_OK


def cmd_search(cfg: RunConfig, log=print) -> int:
    out = Path(cfg.out)
    try:
        res = minimize_pmi(cfg.search)
    except ValueError as exc:
        log(str(exc))
        return EXIT_FAIL
    atomic_write(out / "search.json", to_json(res.to_dict()) + "\n")
    atomic_write(out / "search_history.csv", _csv(("iteration", "value"), [(i, float(v)) for i, v in res.history]))
    log(f"best={fmt(res.best_value)} start={fmt(res.start_value)} evaluations={res.evaluations}")
    return EXIT_OK if res.feasibility.get("mean_convex", False) else EXIT_FAIL


COMMANDS = {
    "report": cmd_report,
    "flow": cmd_flow,
    "check": cmd_check,
    "counterexample": cmd_counterexample,
    "search": cmd_search,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imcflab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--grid", type=int, help="polar grid size N (N + 1 nodes)")
    parser.add_argument("--tol", type=float, help="relative pass tolerance for inequality checks")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.grid, args.tol, args.out)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
