import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from ccrgd.cli import CSV_HEADER, main


def write_config(tmp_path, name="config.json", **overrides):
    cfg = {
        "seed": 42,
        "problem": {"kind": "rastrigin", "n": 4},
        "method": "both",
        "eps": 0.1,
        "xi": "auto",
        "alpha": "1/L",
        "init": {"mode": "near_saddle", "projection": 0.0},
        "max_iters": 800,
        "constants": {"L": 1.0, "M": 1.0, "beta": 0.16, "delta": 0.32},
        "outputs": {"dir": str(tmp_path / "out"), "emit_csv": True,
                    "emit_plots": False},
        "checks": "all",
        "suite": {"num_seeds": 3},
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path, cfg


def test_run_emits_csv_and_summary(tmp_path):
    path, cfg = write_config(tmp_path)
    assert main(["run", str(path)]) == 0
    out = tmp_path / "out"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert set(summary["methods"]) == {"gd", "ccrgd"}
    # the qualitative dichotomy: CCRGD certifies positive curvature, GD stalls
    assert summary["methods"]["ccrgd"]["final_hessian"]["min_eig"] > 0
    assert summary["methods"]["gd"]["final_hessian"]["min_eig"] < 0
    assert summary["methods"]["ccrgd"]["second_order_count"] >= 1
    for method in ("gd", "ccrgd"):
        with open(out / f"{method}_trace.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == CSV_HEADER
        assert len(rows) > 2


def test_run_csv_schema_and_monotone_f(tmp_path):
    path, _ = write_config(tmp_path, method="gd",
                           problem={"kind": "quadratic",
                                    "eigenvalues": [1.0, 0.5]},
                           constants={"L": 1.0, "M": 1.0, "beta": 0.5,
                                      "delta": 1.0},
                           init={"mode": "explicit", "point": [2.0, 1.0]},
                           eps=0.01, xi=0.05)
    assert main(["run", str(path)]) == 0
    with open(tmp_path / "out" / "gd_trace.csv", newline="") as fh:
        text = fh.read()
    assert "\r" not in text
    rows = list(csv.DictReader(text.splitlines()))
    fs = [float(r["f"]) for r in rows]
    assert all(a + 1e-12 * (1 + abs(a)) >= b for a, b in zip(fs, fs[1:]))
    # convex quadratic has no saddle: dist_to_saddle column stays blank
    assert all(r["dist_to_saddle"] == "" for r in rows)


def test_run_thin_stride_blanks_distances(tmp_path):
    path, _ = write_config(tmp_path, method="gd", max_iters=100, outputs={
        "dir": str(tmp_path / "out"), "emit_csv": True, "emit_plots": False,
        "thin_stride": 10})
    assert main(["run", str(path)]) == 0
    with open(tmp_path / "out" / "gd_trace.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    # scalars dense, distances only every 10th row and on the last row
    assert all(r["f"] != "" for r in rows)
    for i, r in enumerate(rows):
        expected = i % 10 == 0 or i == len(rows) - 1
        assert (r["dist_to_init"] != "") == expected, i


def test_run_byte_identical_reruns(tmp_path):
    path, _ = write_config(tmp_path)
    assert main(["run", str(path)]) == 0
    digests1 = {f.name: hashlib.sha256(f.read_bytes()).hexdigest()
                for f in sorted((tmp_path / "out").iterdir())}
    assert main(["run", str(path)]) == 0
    digests2 = {f.name: hashlib.sha256(f.read_bytes()).hexdigest()
                for f in sorted((tmp_path / "out").iterdir())}
    assert digests1 == digests2


def test_bounds_subcommand_schema(tmp_path, capsys):
    path, _ = write_config(tmp_path, eps=0.01, xi=0.0156)
    assert main(["bounds", str(path)]) == 0
    data = json.loads(capsys.readouterr().out)
    for key in ["eps_max", "k_exit_bound", "p_min", "xi_max", "rho_min",
                "k_shell_bound", "eps_no_return", "gamma_no_return"]:
        assert key in data, key


def test_bounds_rejects_eps_above_eps_max(tmp_path, capsys):
    path, _ = write_config(tmp_path, eps=0.31, xi=0.4)
    assert main(["bounds", str(path)]) == 1
    assert "eps_max" in capsys.readouterr().err


def test_bounds_exit_bound_ordering(tmp_path, capsys):
    vals = []
    for eps in (0.01, 0.001):
        path, _ = write_config(tmp_path, name=f"c{eps}.json", eps=eps, xi=0.0156)
        assert main(["bounds", str(path)]) == 0
        vals.append(json.loads(capsys.readouterr().out)["k_exit_bound"])
    assert vals[1] > vals[0]


def test_suite_passes_on_quadratic(tmp_path, capsys):
    path, _ = write_config(
        tmp_path, method="gd",
        problem={"kind": "quadratic", "eigenvalues": [1.0, -1.0]},
        constants={"L": 1.0, "M": 1.0, "beta": 1.0, "delta": 2.0},
        init={"mode": "near_saddle", "projection": 0.5},
        eps=0.01, xi=0.046, max_iters=300,
        checks=["a", "c", "e"], suite={"num_seeds": 5})
    assert main(["suite", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["checks"]["c"]["pass"] == 5
    assert report["checks"]["c"]["fail"] == 0
    assert report["checks"]["e"]["fail"] == 0


def test_suite_empty_checks_exit_zero(tmp_path, capsys):
    path, _ = write_config(tmp_path, checks=[])
    assert main(["suite", str(path)]) == 0


def test_suite_check_i_on_sufficiently_projected_inits(tmp_path, capsys):
    # inits at the (clamped) sufficient projection: measured exit under bound
    path, _ = write_config(
        tmp_path, method="both", eps=0.01, xi=0.0156,
        init={"mode": "near_saddle", "projection": 1.0},
        max_iters=500, checks=["c", "i"], suite={"num_seeds": 10})
    assert main(["suite", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["checks"]["i"]["fail"] == 0
    assert report["checks"]["i"]["pass"] >= 10


def test_suite_exit_code_three_on_failure(tmp_path, capsys, monkeypatch):
    import ccrgd.cli as cli_mod
    from ccrgd.diagnostics import CheckResult, InvariantReport

    def fake_verify(*args, **kwargs):
        return InvariantReport(checks=[CheckResult("c", False, -1.0, 3)])

    monkeypatch.setattr(cli_mod, "verify_invariants", fake_verify)
    path, _ = write_config(tmp_path, method="gd", suite={"num_seeds": 2})
    assert main(["suite", str(path)]) == 3
    report = json.loads(capsys.readouterr().out)
    assert report["checks"]["c"]["fail"] == 2


def test_plot_roundtrip(tmp_path):
    path, _ = write_config(tmp_path, method="ccrgd")
    assert main(["run", str(path)]) == 0
    trace = tmp_path / "out" / "ccrgd_trace.csv"
    svg = tmp_path / "out" / "replot.svg"
    assert main(["plot", str(trace), str(svg), "--eps", "0.1"]) == 0
    content = svg.read_text()
    assert content.lstrip().startswith("<?xml")
    # self-contained: no linked files or images
    assert "file://" not in content
    assert "<image" not in content


def test_run_emit_plots_svg(tmp_path):
    path, _ = write_config(tmp_path, outputs={
        "dir": str(tmp_path / "out"), "emit_csv": True, "emit_plots": True})
    assert main(["run", str(path)]) == 0
    for name in ("gradient_norm.svg", "hessian_eigenvalues.svg",
                 "distance_from_init.svg"):
        assert (tmp_path / "out" / name).exists(), name


def test_validation_errors_name_the_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"seed": 1, "problem": {"kind": "nope"}}))
    assert main(["run", str(path)]) == 1
    assert "problem.kind" in capsys.readouterr().err

    path.write_text(json.dumps({"seed": 1,
                                "problem": {"kind": "rastrigin", "n": 4}}))
    assert main(["run", str(path)]) == 1
    assert "eps" in capsys.readouterr().err


def test_output_dir_env_override(tmp_path, monkeypatch):
    path, _ = write_config(tmp_path, method="gd", max_iters=50)
    override = tmp_path / "elsewhere"
    monkeypatch.setenv("CCRGD_OUTPUT_DIR", str(override))
    assert main(["run", str(path)]) == 0
    assert (override / "summary.json").exists()


def test_estimated_constants_config(tmp_path):
    path, _ = write_config(
        tmp_path, method="ccrgd", constants="estimate",
        estimate={"radius": 1e-3, "samples": 16}, max_iters=500)
    assert main(["run", str(path)]) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert abs(summary["constants"]["L"] - 1.0) < 1e-4
    assert abs(summary["constants"]["beta"] - 0.16) < 1e-4
