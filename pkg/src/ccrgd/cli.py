"""Experiment orchestration from JSON configs.

Subcommands:

* ``run <config.json>``: run the configured method(s) from a shared
  initialization; write one trace CSV per method, a summary JSON, and
  optionally SVG plots (gradient norm, Hessian eigenvalue stems,
  distance-from-initialization with exit / second-order markers).
* ``bounds <config.json>``: print the full bound set as JSON.
* ``suite <config.json>``: run a seed batch, apply the trajectory checks to
  every run, aggregate pass counts; nonzero exit iff an enabled check fails.
* ``plot <trace.csv> <out.svg>``: re-render a trace CSV (gradient norm and
  distance panels; the eigenvalue stem panel needs Hessian data that only
  ``run`` has).

Exit codes: 0 success, 1 validation error, 2 runtime failure (divergence;
partial artifacts are kept), 3 property failure. The environment variable
CCRGD_OUTPUT_DIR overrides the configured output directory.

One 64-bit master seed drives every random draw through purpose-keyed
substreams (data matrix, initialization, sampling), so adding a consumer
never perturbs the others; per-seed runs in a suite use master_seed + index.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bounds_mod
from .diagnostics import detect_phases, verify_invariants
from .errors import InputError, RegimeError
from .optimizer import (OptimizerConfig, TrajectoryRecord, ccrgd_run, gd_run,
                        init_near_saddle)
from .problem import (ObjectiveProblem, SmoothnessConstants, estimate_constants,
                      make_matrix_factorization, make_quadratic, make_rastrigin)
from .spectral import analyze_saddle

SCHEMA_VERSION = 1
CSV_HEADER = ["k", "step_type", "f", "grad_norm", "dist_to_init",
              "dist_to_saddle", "xi_flag"]


class ConfigError(InputError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.17g}"


_SENTINEL = object()


def _get(cfg: dict, field: str, default=_SENTINEL):
    cur = cfg
    for part in field.split("."):
        if not isinstance(cur, dict) or part not in cur:
            if default is not _SENTINEL:
                return default
            raise ConfigError(f"config field '{field}' is missing")
        cur = cur[part]
    return cur


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")


def build_problem(cfg: dict) -> ObjectiveProblem:
    kind = _get(cfg, "problem.kind")
    pb = cfg["problem"]
    if kind == "rastrigin":
        prob = make_rastrigin(int(_get(cfg, "problem.n")))
    elif kind == "matrix_factorization":
        prob = make_matrix_factorization(
            n1=int(_get(cfg, "problem.n1")), n2=int(_get(cfg, "problem.n2")),
            r=int(_get(cfg, "problem.r")), w1=float(pb.get("w1", 0.5)),
            w2=float(pb.get("w2", 0.5)), rho=float(pb.get("rho", 0.5)),
            seed=int(cfg.get("seed", 0)))
    elif kind == "quadratic":
        prob = make_quadratic(_get(cfg, "problem.eigenvalues"),
                              rotate_seed=pb.get("rotate_seed"))
    else:
        raise ConfigError(f"config field 'problem.kind' has unknown value {kind!r}")
    return _apply_constants(prob, cfg)


def _apply_constants(prob: ObjectiveProblem, cfg: dict) -> ObjectiveProblem:
    spec = cfg.get("constants", "analytic")
    if spec == "analytic":
        return prob
    if spec == "estimate":
        if prob.known_saddle is None:
            raise ConfigError("constants='estimate' needs a known saddle to center on")
        est = cfg.get("estimate", {})
        consts = estimate_constants(
            prob, prob.known_saddle, radius=float(est.get("radius", 0.5)),
            samples=int(est.get("samples", 32)), seed=int(cfg.get("seed", 0)))
        return prob.with_constants(consts)
    if isinstance(spec, dict):
        try:
            consts = SmoothnessConstants(
                L=float(spec["L"]), M=float(spec["M"]),
                beta=float(spec["beta"]), delta=float(spec["delta"]))
        except KeyError as exc:
            raise ConfigError(f"config field 'constants.{exc.args[0]}' is missing")
        return prob.with_constants(consts)
    raise ConfigError("config field 'constants' must be 'analytic', 'estimate' "
                      "or an object with L, M, beta, delta")


def resolve_radii(cfg: dict, prob: ObjectiveProblem, strict_xi: bool = False):
    """Resolve (eps, xi), honoring 'auto' via the bound calculators.

    Auto-xi is the theoretical expansion radius xi_max; for plain runs the
    paper-style large eps values can exceed it, in which case xi is widened
    to 1.5*eps (it only drives phase bookkeeping there). strict_xi keeps the
    theoretical value and lets the caller fail when eps does not fit under
    it, which is what the bound calculators need.
    """
    varsigma = float(cfg.get("varsigma", 3.0))
    consts = prob.constants
    xi_spec = cfg.get("xi", "auto")
    eps_spec = _get(cfg, "eps")
    if xi_spec == "auto":
        xi, _ = bounds_mod.expansion_constants(consts, varsigma)
    else:
        xi = float(xi_spec)
    if eps_spec == "auto":
        eps_max = bounds_mod.epsilon_upper_bound(consts, prob.n)
        eps = min(0.9 * eps_max, 0.64 * xi)
    else:
        eps = float(eps_spec)
    if xi_spec == "auto" and not strict_xi:
        xi = max(xi, 1.5 * eps)
    if not eps < xi:
        raise ConfigError(f"config needs eps < xi, got eps={eps}, xi={xi}")
    return eps, xi, varsigma


def make_run_config(cfg: dict, prob: ObjectiveProblem, eps: float) -> OptimizerConfig:
    alpha_spec = cfg.get("alpha", "1/L")
    if alpha_spec != "1/L":
        raise ConfigError("config field 'alpha' only supports '1/L'")
    try:
        _, p_min, _, _ = bounds_mod.projection_thresholds(eps, prob.constants, prob.n)
    except RegimeError:
        p_min = 0.0
    return OptimizerConfig(
        constants=prob.constants, eps=eps,
        max_iters=int(cfg.get("max_iters", 5000)), p_min=p_min)


def build_init(cfg: dict, prob: ObjectiveProblem, eps: float,
               seed_offset: int = 0) -> np.ndarray:
    mode = _get(cfg, "init.mode")
    if mode == "explicit":
        x0 = np.asarray(_get(cfg, "init.point"), dtype=float)
        if x0.shape != (prob.n,):
            raise ConfigError(
                f"config field 'init.point' has length {x0.size}, expected {prob.n}")
        return x0
    if mode != "near_saddle":
        raise ConfigError("config field 'init.mode' must be 'near_saddle' or 'explicit'")
    if prob.known_saddle is None:
        raise ConfigError("init.mode='near_saddle' needs a problem with a known saddle")
    # sqrt(eps) is the conventional degeneracy-grouping tolerance; the
    # recursive refinement inside analyze_saddle keeps it robust
    analysis = analyze_saddle(prob, prob.known_saddle, gap=math.sqrt(eps))
    seed = int(cfg.get("seed", 0)) + seed_offset
    return init_near_saddle(analysis, eps,
                            p=float(_get(cfg, "init.projection")), seed=seed)


def run_method(method: str, prob: ObjectiveProblem, x0, run_cfg: OptimizerConfig):
    if method == "gd":
        return gd_run(prob, x0, run_cfg)
    if method == "ccrgd":
        return ccrgd_run(prob, x0, run_cfg)
    raise ConfigError(f"unknown method {method!r}")


def _methods(cfg: dict):
    m = cfg.get("method", "both")
    if m == "both":
        return ["gd", "ccrgd"]
    if m in ("gd", "ccrgd"):
        return [m]
    raise ConfigError("config field 'method' must be 'gd', 'ccrgd' or 'both'")


def output_dir(cfg: dict) -> Path:
    d = os.environ.get("CCRGD_OUTPUT_DIR") or _get(cfg, "outputs.dir", "out")
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_trace_csv(path: Path, traj: TrajectoryRecord, x0, saddle,
                    stride: int = 1) -> None:
    """CSV schema: k,step_type,f,grad_norm,dist_to_init,dist_to_saddle,xi_flag.

    Scalars are always dense; with stride > 1 the distance columns are only
    filled every stride-th row (and on the final row).
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        steps = traj.step_types
        last = len(traj.values) - 1
        for k in range(len(traj.values)):
            have_pt = k < len(traj.iterates) and (k % stride == 0 or k == last)
            d_init = _fmt(float(np.linalg.norm(traj.iterates[k] - x0))) if have_pt else ""
            d_sad = (_fmt(float(np.linalg.norm(traj.iterates[k] - saddle)))
                     if have_pt and saddle is not None else "")
            w.writerow([
                k, steps[k] if k < len(steps) else "",
                _fmt(float(traj.values[k])), _fmt(float(traj.grad_norms[k])),
                d_init, d_sad,
                int(traj.xi_flags[k]) if k < len(traj.xi_flags) else 0,
            ])


def _hessian_extremes(prob: ObjectiveProblem, x) -> dict:
    lam = np.linalg.eigvalsh(prob.hessian(np.asarray(x, dtype=float)))
    return {"min_eig": float(lam[0]), "max_eig": float(lam[-1]),
            "eigenvalues": [float(v) for v in lam]}


def summarize(prob: ObjectiveProblem, traj: TrajectoryRecord, x0, eps, xi) -> dict:
    out = {
        "termination": traj.termination,
        "iterations": traj.num_steps,
        "second_order_count": traj.second_order_count,
        "final_value": float(traj.values[-1]),
        "final_grad_norm": float(traj.grad_norms[-1]),
        "initial_hessian": _hessian_extremes(prob, traj.iterates[0]),
        "final_hessian": _hessian_extremes(prob, traj.final_iterate()),
        "first_eps_exit": None,
        "first_xi_exit": None,
    }
    if prob.known_saddle is not None:
        phases = detect_phases(traj, prob.known_saddle, eps, xi)
        out["first_eps_exit"] = phases.k_exit
        out["first_xi_exit"] = phases.k_hat_exit
    return out


def cmd_run(cfg: dict) -> int:
    prob = build_problem(cfg)
    eps, xi, _ = resolve_radii(cfg, prob)
    run_cfg = make_run_config(cfg, prob, eps)
    x0 = build_init(cfg, prob, eps)
    out = output_dir(cfg)
    emit_csv = bool(_get(cfg, "outputs.emit_csv", True))
    emit_plots = bool(_get(cfg, "outputs.emit_plots", False))
    stride = int(_get(cfg, "outputs.thin_stride", 1))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "label": prob.label,
        "eps": eps,
        "xi": xi,
        "alpha": 1.0 / prob.constants.L,
        "constants": {"L": prob.constants.L, "M": prob.constants.M,
                      "beta": prob.constants.beta, "delta": prob.constants.delta},
        "methods": {},
    }
    status = 0
    traces = {}
    for method in _methods(cfg):
        traj = run_method(method, prob, x0, run_cfg)
        traces[method] = traj
        summary["methods"][method] = summarize(prob, traj, x0, eps, xi)
        if emit_csv:
            write_trace_csv(out / f"{method}_trace.csv", traj, x0,
                            prob.known_saddle, stride=stride)
        if traj.termination == "diverged":
            status = 2
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if emit_plots:
        emit_run_plots(out, cfg, summary, traces, x0, prob, eps)
    return status


def emit_run_plots(out: Path, cfg, summary, traces, x0, prob, eps) -> None:
    import matplotlib
    matplotlib.use("svg")
    matplotlib.rcParams["svg.hashsalt"] = "ccrgd"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for method, traj in traces.items():
        ax.semilogy(np.maximum(traj.grad_norms, 1e-300), label=method)
    ax.set_xlabel("iteration")
    ax.set_ylabel("gradient norm")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "gradient_norm.svg")
    plt.close(fig)

    fig, axes = plt.subplots(1, len(traces), figsize=(5 * len(traces), 3.2),
                             squeeze=False)
    for ax, (method, _) in zip(axes[0], traces.items()):
        info = summary["methods"][method]
        init_eigs = info["initial_hessian"]["eigenvalues"]
        final_eigs = info["final_hessian"]["eigenvalues"]
        ax.stem(range(len(init_eigs)), init_eigs, linefmt="b-", markerfmt="bo",
                basefmt="k-", label="initial")
        ax.stem(range(len(final_eigs)), final_eigs, linefmt="r--", markerfmt="r^",
                basefmt="k-", label="final")
        ax.set_title(f"{method}: Hessian spectrum")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out / "hessian_eigenvalues.svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for method, traj in traces.items():
        dist = np.linalg.norm(traj.iterates - x0, axis=1)
        line, = ax.plot(dist, label=method)
        info = summary["methods"][method]
        if info["first_eps_exit"] is not None:
            k = info["first_eps_exit"]
            ax.axvline(k, color=line.get_color(), linestyle=":",
                       label=f"{method} first exit")
        so = [k for k, s in enumerate(traj.step_types) if s == "second_order"]
        if so:
            ax.plot(so, dist[so], "k*", markersize=10, label=f"{method} 2nd-order")
    ax.set_xlabel("iteration")
    ax.set_ylabel("distance from initialization")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "distance_from_init.svg")
    plt.close(fig)


def cmd_bounds(cfg: dict) -> int:
    prob = build_problem(cfg)
    eps, xi, varsigma = resolve_radii(cfg, prob, strict_xi=True)
    g = cfg.get("global_rates")
    ginputs = None
    if g is not None:
        ginputs = bounds_mod.GlobalRateInputs(
            diam_u=float(g["diam_u"]), zeta=float(g["zeta"]), R=float(g["R"]),
            gamma=float(g["gamma"]), upsilon=float(g.get("upsilon", 0.0)),
            R0=float(g["R0"]))
    bset = bounds_mod.compute_bound_set(
        prob.constants, prob.n, eps, xi=xi, varsigma=varsigma,
        global_inputs=ginputs)
    print(bset.to_json())
    return 0


def cmd_suite(cfg: dict) -> int:
    prob = build_problem(cfg)
    eps, xi, _ = resolve_radii(cfg, prob)
    run_cfg = make_run_config(cfg, prob, eps)
    num_seeds = int(_get(cfg, "suite.num_seeds"))
    checks = cfg.get("checks", "all")
    if checks != "all" and not checks:
        print(json.dumps({"num_seeds": 0, "checks": {}}, sort_keys=True))
        return 0
    if prob.known_saddle is None:
        raise ConfigError("suite needs a problem with a known saddle")
    counts: dict = {}
    for i in range(num_seeds):
        x0 = build_init(cfg, prob, eps, seed_offset=i)
        for method in _methods(cfg):
            traj = run_method(method, prob, x0, run_cfg)
            report = verify_invariants(traj, prob, prob.known_saddle, eps, xi,
                                       checks=checks)
            for c in report.checks:
                slot = counts.setdefault(c.name, {"pass": 0, "fail": 0, "skip": 0})
                slot["pass" if c.passed else "skip" if c.passed is None
                     else "fail"] += 1
    report = {"num_seeds": num_seeds, "methods": _methods(cfg), "checks": counts}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 3 if any(v["fail"] for v in counts.values()) else 0


def cmd_plot(trace_csv: str, out_svg: str, eps: Optional[float] = None) -> int:
    rows = []
    with open(trace_csv, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ConfigError(
                f"trace CSV header {reader.fieldnames} does not match {CSV_HEADER}")
        rows = list(reader)
    if not rows:
        raise ConfigError("trace CSV is empty")
    import matplotlib
    matplotlib.use("svg")
    matplotlib.rcParams["svg.hashsalt"] = "ccrgd"
    import matplotlib.pyplot as plt

    ks = np.array([int(r["k"]) for r in rows])
    gn = np.array([float(r["grad_norm"]) for r in rows])
    dist = np.array([float(r["dist_to_init"]) if r["dist_to_init"] else np.nan
                     for r in rows])
    so = [int(r["k"]) for r in rows if r["step_type"] == "second_order"]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5.5, 5.5))
    ax1.semilogy(ks, np.maximum(gn, 1e-300))
    ax1.set_ylabel("gradient norm")
    ax2.plot(ks, dist)
    if so:
        ax2.plot(so, dist[so], "k*", markersize=10, label="second-order step")
        ax2.legend()
    d_sad = np.array([float(r["dist_to_saddle"]) if r["dist_to_saddle"] else np.nan
                      for r in rows])
    if eps is not None and np.isfinite(d_sad).any():
        crossing = np.nonzero((d_sad[1:] >= eps) & (d_sad[:-1] <= eps))[0]
        if crossing.size:
            ax2.axvline(int(crossing[0]) + 1, linestyle=":", color="gray")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("distance from initialization")
    fig.tight_layout()
    fig.savefig(out_svg)
    plt.close(fig)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ccrgd",
        description="Saddle-escape experiments, bound calculators and checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "bounds", "suite"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON run configuration")
    p = sub.add_parser("plot")
    p.add_argument("trace_csv")
    p.add_argument("out_svg")
    p.add_argument("--eps", type=float, default=None,
                   help="saddle radius for the exit marker")
    args = parser.parse_args(argv)
    try:
        if args.command == "plot":
            return cmd_plot(args.trace_csv, args.out_svg, args.eps)
        cfg = load_config(args.config)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "bounds":
            return cmd_bounds(cfg)
        return cmd_suite(cfg)
    except (ConfigError, InputError, RegimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
