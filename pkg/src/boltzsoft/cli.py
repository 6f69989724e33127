"""Command-line entry point: ``boltzsoft {simulate, verify, sweep-m, kernel-report}``.

Exit codes: 0 success, 1 verification or fit failure, 2 configuration or
input error, 3 solver divergence, 4 positivity violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, initial_data, io, verify
from .collision import CollisionQuadrature
from .config import RunConfig, load
from .errors import (
    ConfigError,
    DegenerateInputError,
    InputError,
    PositivityViolationError,
    SolverDivergenceError,
)
from .linop import PowerProbe, kernel_k_bound, lattice_km_evaluator, sweep_m, verify_l_bounds
from .norms import relative_entropy_gap
from .solver import time_march

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_POSITIVITY = 0, 1, 2, 3, 4

log = logging.getLogger("boltzsoft")


def _quad(cfg: RunConfig, threads: int) -> CollisionQuadrature:
    return CollisionQuadrature(cfg.grid, cfg.sphere, cfg.kernel, threads, cfg.interpolation)


def _initial(cfg: RunConfig):
    ini = cfg.initial
    fam = ini["family"]
    if fam == "gaussian-bump":
        kw = {"target_norm": ini["target_norm"]} if ini["target_norm"] is not None else {"epsilon": ini["epsilon"]}
        return initial_data.make(fam, cfg.grid, cfg.domain, cfg.weight, **kw)
    if fam == "bimodal":
        return initial_data.make(fam, cfg.grid, cfg.domain, separation=ini["separation"])
    if fam == "random-smooth":
        return initial_data.make(fam, cfg.grid, cfg.domain, seed=ini["seed"], amplitude=ini["amplitude"])
    return initial_data.make(fam, cfg.grid, cfg.domain)


def _status_report(out: Path, status: str, error: Exception | None, cfg: RunConfig, extra=()):
    lines = [f"status: {status}",
             f"error_class: {type(error).__name__ if error else 'none'}",
             f"error_message: {error if error else ''}",
             f"version: {__version__}",
             f"grid.n: {cfg.grid.n}",
             f"grid.extent: {cfg.grid.extent}",
             f"domain.mode: {cfg.domain.mode}",
             f"weight: beta={cfg.weight.beta} p={cfg.weight.p} q={cfg.weight.q} mode={cfg.weight.mode}",
             f"weight.flags: {'; '.join(cfg.weight.flags) if cfg.weight.flags else 'none'}",
             f"initial.family: {cfg.initial['family']}"]
    lines.extend(extra)
    io.write_text(out / "run_report.txt", lines)


def cmd_simulate(cfg: RunConfig, threads: int) -> int:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        f0 = _initial(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    quad = _quad(cfg, threads)
    try:
        res = time_march(f0, cfg.windows, quad, cfg.solver, cfg.weight)
    except SolverDivergenceError as exc:
        if exc.trace is not None:
            _write_trace(out, [exc.trace])
        _status_report(out, "failed", exc, cfg)
        print(f"solver divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except PositivityViolationError as exc:
        _status_report(out, "failed", exc, cfg)
        print(f"positivity violation: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    tr = res.trajectory
    io.write_trajectory(out, tr)
    _write_trace(out, res.traces)
    header = ["window", "t_start"] + list(res.reports[0].FIELDS) + ["entropy_end", "entropy_nonincreasing",
                                                                   "relative_entropy_lhs_max", "relative_entropy_rhs"]
    rhs = relative_entropy_gap(f0)[1]
    lhs_max = max(relative_entropy_gap(tr.at(k), f0)[0] for k in range(tr.n_times))
    rows = []
    for w, rep in enumerate(res.reports):
        mono = res.entropy[w + 1] <= res.entropy[w] or res.entropy[w + 1] - res.entropy[w] <= 0.0
        rows.append([w, res.window_starts[w]] + rep.row() + [res.entropy[w + 1], mono, lhs_max, rhs])
    io.write_csv(out / "norms.csv", header, rows)
    io.write_text(out / "norm_reports.txt",
                  [ln for w, rep in enumerate(res.reports) for ln in [f"[window {w}]"] + rep.to_text().splitlines()])
    _status_report(out, "ok", None, cfg, [f"windows: {cfg.windows}",
                                          f"final_time: {io.fmt(float(tr.times[-1]))}",
                                          f"entropy_nonincreasing: {io.fmt(res.entropy_nonincreasing)}"])
    return EXIT_OK


def _write_trace(out: Path, traces):
    rows = [[t.window, *r] for t in traces for r in t.rows()]
    io.write_csv(out / "iterations.csv", ["window", "iterate", "weighted_norm", "difference", "ratio",
                                          "min_F_over_max_F"], rows)


def cmd_verify(cfg: RunConfig, threads: int) -> int:
    rows, ctx = verify.run(cfg, threads)
    lines = verify.report_lines(rows)
    out = cfg.output_dir
    io.write_text(out / "verify_report.txt", lines)
    if "sweep" in ctx.artifacts:
        s = ctx.artifacts["sweep"]
        io.write_csv(out / "sweep_m.csv", ["m", "sup_norm", "fitted_slope"],
                     [[m, v, s.slope] for m, v in zip(s.m, s.sup_norm)])
    if "bilinear" in ctx.artifacts:
        rws = []
        for tag, n in (("coarse", cfg.verify["coarse_n"]), ("fine", cfg.verify["n"])):
            for i, (rm, rp) in enumerate(ctx.artifacts["bilinear"][tag][0]):
                rws.append([i, n, rm, rp])
        io.write_csv(out / "bilinear_estimates.csv", ["field_id", "n", "ratio_minus", "ratio_plus"], rws)
    print("\n".join(lines))
    return EXIT_OK if verify.all_passed(rows) else EXIT_FAIL


def cmd_sweep_m(cfg: RunConfig, threads: int, m_list=None) -> int:
    sw = cfg.sweep
    ms = m_list if m_list is not None else sw["m_list"]
    probe = PowerProbe.for_exponent(sw["p"], sw["delta"])
    ev = lattice_km_evaluator(_quad(cfg, threads), probe) if sw["evaluator"] == "lattice" else None
    res = sweep_m(ms, cfg.kernel, sw["p"], probe, ev)
    io.write_csv(cfg.output_dir / "sweep_m.csv", ["m", "sup_norm", "fitted_slope"],
                 [[m, v, res.slope] for m, v in zip(res.m, res.sup_norm)])
    ok = res.passed(sw["rel_tol"])
    lines = [f"slope: {io.fmt(res.slope)}", f"target: {io.fmt(res.target)}",
             f"relative_error: {io.fmt(res.relative_error)}",
             f"non_scaling: {io.fmt(res.non_scaling)}", f"status: {'PASS' if ok else 'FAIL'}"]
    io.write_text(cfg.output_dir / "sweep_m.txt", lines)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kernel_report(cfg: RunConfig, threads: int) -> int:
    out = cfg.output_dir
    params = cfg.kernel
    speeds = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    etas = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    rows = []
    for s in speeds:
        for e in etas:
            v = np.array([s, 0.0, 0.0])
            eta = np.array([0.0, e, 0.0])
            rows.append([s, e, float(np.linalg.norm(v - eta)), kernel_k_bound(v, eta, params)])
    io.write_csv(out / "kernel_k_bound.csv", ["v_speed", "eta_speed", "distance", "bound"], rows)
    quad = _quad(cfg, threads)
    rows = []
    for beta in cfg.kernel_report["betas"]:
        rep = verify_l_bounds(cfg.grid, beta, params.m_cutoff, params, quad)
        for name in ("prol1", "prol2", "prol4", "gaussian_tail"):
            hi, lo = getattr(rep, name)
            rows.append([beta, params.m_cutoff, name, hi, lo, rep.spread((hi, lo))])
    io.write_csv(out / "l_bounds.csv", ["beta", "m", "statistic", "max", "min", "spread"], rows)
    print(f"wrote {out / 'kernel_k_bound.csv'} and {out / 'l_bounds.csv'}")
    return EXIT_OK


def _m_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boltzsoft", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "march the mild-form solver and write trajectories and norms"),
                        ("verify", "run the acceptance suite and print the pass/fail report"),
                        ("sweep-m", "fit the log-log slope of |K^m f| over a decreasing m list"),
                        ("kernel-report", "tabulate the kernel bound and its weighted integrals")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, default=None, help="key = value config file")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for batched kernels")
        p.add_argument("--mode", choices=("theorem", "exploratory"), default=None,
                       help="weight admissibility mode (overrides weight.mode)")
        p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
        if name == "sweep-m":
            p.add_argument("--m-list", type=_m_list, default=None, help="comma-separated, strictly decreasing")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load(args.config, args.mode, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.threads)
        if args.command == "verify":
            return cmd_verify(cfg, args.threads)
        if args.command == "sweep-m":
            return cmd_sweep_m(cfg, args.threads, args.m_list)
        return cmd_kernel_report(cfg, args.threads)
    except (InputError, ConfigError, DegenerateInputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverDivergenceError as exc:
        print(f"solver divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except PositivityViolationError as exc:
        print(f"positivity violation: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY


if __name__ == "__main__":
    sys.exit(main())
