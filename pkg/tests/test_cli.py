import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

import oracles
from imcflab.cli import RunConfig, build_parser, fmt, load_config, main, to_json
from imcflab.flow import FlowConfig
from imcflab.search import SearchConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(command, config, out, *extra):
    return main([command, "--config", str(CONFIGS / config), "--out", str(out), *extra])


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


def test_report_unit_sphere(tmp_path):
    assert run("report", "unit_sphere.yaml", tmp_path) == 0
    (row,) = read_jsonl(tmp_path / "reports.jsonl")
    assert row["shape"] == "unit_sphere"
    assert row["area"] == pytest.approx(4 * math.pi, rel=1e-13)
    assert (tmp_path / "reports.csv").read_text().splitlines()[0].startswith("shape,area,")


def test_report_counterexample(tmp_path):
    assert run("report", "counterexample.yaml", tmp_path) == 0
    cx = json.loads((tmp_path / "counterexample.json").read_text())
    assert cx["ratio"] == pytest.approx(oracles.EXPECTED["fillmore_ratio"], rel=1e-9)
    assert cx["expected"]["area_sq"] == pytest.approx(oracles.EXPECTED["fillmore_area_sq"], rel=1e-15)


def test_report_spheroid(tmp_path):
    assert run("report", "spheroid.yaml", tmp_path) == 0
    (row,) = read_jsonl(tmp_path / "reports.jsonl")
    assert row["area"] == pytest.approx(oracles.EXPECTED["prolate_area_closed_form"], rel=1e-9)


def test_flow_traces(tmp_path):
    assert run("flow", "flow_perturbed.yaml", tmp_path) == 0
    rows = {r["shape"]: r for r in read_jsonl(tmp_path / "flow_summary.jsonl")}
    assert rows["sphere"]["Q_final"] == pytest.approx(rows["sphere"]["Q_initial"], rel=1e-12)
    assert rows["p2"]["Q_final"] < rows["p2"]["Q_initial"]
    lines = (tmp_path / "flow_p2.csv").read_text().splitlines()
    assert lines[0] == "t,Q,E,area,deviation,min_H"
    q = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(b <= a + 1e-6 * q[0] for a, b in zip(q, q[1:]))


def test_flow_sphere_ambient_reaches_equator(tmp_path):
    assert run("flow", "flow_sphere_ambient.yaml", tmp_path) == 0
    (row,) = read_jsonl(tmp_path / "flow_summary.jsonl")
    assert row["termination"] == "EquatorReached"
    assert row["area_limit"] == pytest.approx(4 * math.pi, rel=1e-2)


def test_check_default_suite(tmp_path):
    assert run("check", "check_default.yaml", tmp_path) == 0
    rows = read_jsonl(tmp_path / "results.jsonl")
    assert rows and all(r["status"] == "pass" for r in rows)
    header = (tmp_path / "summary.csv").read_text().splitlines()[0]
    assert header == "shape,name,lhs,rhs,rel_slack,status"


def test_check_adsrn_suite(tmp_path):
    assert run("check", "check_adsrn.yaml", tmp_path) == 0
    rows = read_jsonl(tmp_path / "results.jsonl")
    slices = [r for r in rows if r["shape"].startswith("slice")]
    assert len(slices) == 2 and all(r["equality_case"] for r in slices)


def test_check_counterexample_suite(tmp_path):
    assert run("check", "counterexample.yaml", tmp_path) == 0
    rows = read_jsonl(tmp_path / "results.jsonl")
    expected = [r for r in rows if r["status"] == "expected_failure"]
    assert {r["name"] for r in expected} == {"polar_moment_isoperimetric", "weighted_area_isoperimetric"}
    assert not [r for r in rows if r["status"] == "fail"]


def test_check_hard_failure_exit(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("ambient: {kind: sphere, n: 3}\nshapes:\n  - {type: sphere, R: 4.0}\n")
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert (tmp_path / "o" / "errors.jsonl").exists()


def test_counterexample_command(tmp_path):
    assert main(["counterexample", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "counterexample.json").read_text())["relative_margin"] > 5e-4


def test_search_budget_zero(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("search: {modes: 4, budget: 0}\n")
    assert main(["search", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "search.json").read_text())
    assert res["best_value"] == pytest.approx(4 * math.pi, rel=1e-13)


def test_search_is_byte_deterministic(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("search: {modes: 6, budget: 120, restarts: 1, start: fillmore}\n")
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}"
        assert main(["search", "--config", str(cfg), "--out", str(out), "--seed", "4"]) == 0
        outs.append(((out / "search.json").read_bytes(), (out / "search_history.csv").read_bytes()))
    assert outs[0] == outs[1]
    assert json.loads(outs[0][0])["best_value"] <= 12.4925 + 1e-6


def test_check_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("check", "check_default.yaml", a, "--seed", "3") == 0
    assert run("check", "check_default.yaml", b, "--seed", "3") == 0
    assert (a / "results.jsonl").read_bytes() == (b / "results.jsonl").read_bytes()


def test_negative_tolerance_is_config_error(tmp_path, capsys):
    assert run("check", "check_default.yaml", tmp_path, "--tol=-1e-9") == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "results.jsonl").exists()


@pytest.mark.parametrize("text", [
    "shapes: [{type: blob}]\n",
    "bogus: 1\n",
    "- a list\n",
    "ambient: {kind: adsrn, n: 3, mass: 1.0, charge: 0.999999}\n",
    "flow: {t_max: -1}\n",
    "grid: 4\n",
    "ambient: {n: 3}\n",
    "[unclosed\n",
])
def test_bad_configs_exit_2(tmp_path, text):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text)
    assert main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["report", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_config_round_trip():
    cfg = RunConfig(
        ambient={"kind": "adsrn", "n": 3, "mass": 2.0, "charge": 1.0},
        shapes=({"type": "perturbed", "R": 1.0, "modes": [[2, 0.1]]}, {"type": "legendre", "coeffs": [1.0, 0.0, 0.1]}),
        flow=FlowConfig(t_max=1.5, sample_dt=0.1),
        search=SearchConfig(modes=5, start=(1.0, 0.0, 0.05)),
        seed=9,
        tol=1e-8,
    )
    again = RunConfig.from_yaml(cfg.to_yaml())
    assert again == cfg
    assert RunConfig.from_yaml(again.to_yaml()).to_yaml() == cfg.to_yaml()
    for path in CONFIGS.glob("*.yaml"):
        c = load_config(path)
        assert RunConfig.from_yaml(c.to_yaml()) == c


def test_overrides():
    cfg = load_config(CONFIGS / "search.yaml").with_overrides(seed=5, grid=32, tol=1e-6, out="x")
    assert cfg.seed == 5 and cfg.search.seed == 5 and cfg.grid == 32 and cfg.search.grid_size == 32
    assert cfg.tol == 1e-6 and cfg.out == "x"


def test_number_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(float("nan")) == "NaN"
    assert to_json({"a": [1, 2.5, True, None]}) == '{"a": [1, 2.5, true, null]}'


def test_atomic_outputs_leave_no_temp_files(tmp_path):
    assert run("report", "unit_sphere.yaml", tmp_path) == 0
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


def test_parser_lists_commands():
    p = build_parser()
    for c in ("report", "flow", "check", "counterexample", "search"):
        assert p.parse_args([c]).command == c
    with pytest.raises(SystemExit):
        p.parse_args(["frobnicate"])


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "imcflab.cli", "report", "--config", str(CONFIGS / "unit_sphere.yaml"),
         "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "unit_sphere: area=12.566370614359" in proc.stdout
