"""Command-line driver: validate | run | compare | converge.

Exit codes form a small contract for CI use:

* 0 -- everything requested passed;
* 1 -- configuration could not be parsed or validated;
* 2 -- an axiom check failed (``validate``);
* 3 -- the solver aborted (CFL breach, diverged fixed point).

All outputs are CSV files under ``--out`` (or ``output.dir``): field
snapshots (``i,x[,y],u``), a diagnostics stream with one row per snapshot,
one summary row per enabled check, axiom reports, comparison and Cauchy
tables.  Floats are written with 17 significant digits so files round-trip
exactly; identical configs and seeds produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .axioms import check_axioms
from .config import (
    ConfigError,
    RunConfig,
    build_kernel,
    build_profile,
    parse_config,
    resolve_eps_list,
    solver_config,
)
from .diagnostics import OrderingError, check_comparison, check_contraction, check_monotone_series
from .evolve import SolverAbortError, Trajectory, continuation_in_epsilon, run as run_solver
from .kernels import regularize
from .lattice import Field, sample_profile
from .operator import build_context

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_AXIOM = 2
EXIT_SOLVER = 3


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_snapshot(path: Path, field: Field) -> None:
    grid = field.grid
    centers = grid.cell_centers()
    if grid.dimension == 1:
        header = ("i", "x", "u")
        rows = ((i, centers[i, 0], field.values[i]) for i in range(grid.n_cells))
    else:
        header = ("i", "x", "y", "u")
        rows = ((i, centers[i, 0], centers[i, 1], field.values[i]) for i in range(grid.n_cells))
    _write_csv(path, header, rows)


def _write_trajectory(outdir: Path, tag: str, traj: Trajectory) -> None:
    for k, field in enumerate(traj.fields):
        _write_snapshot(outdir / f"{tag}snapshot_{k:06d}.csv", field)
    _write_csv(
        outdir / f"{tag}diagnostics.csv",
        diagnostics.DiagnosticsRecord.COLUMNS,
        (rec.as_row() for rec in traj.records),
    )


def _write_checks(outdir: Path, tag: str, results) -> None:
    _write_csv(
        outdir / f"{tag}checks.csv",
        ("check", "verdict", "worst_margin", "first_violation", "detail"),
        ((r.name, "pass" if r.passed else "fail", r.worst_margin,
          "" if r.first_violation is None else r.first_violation, r.detail) for r in results),
    )


def _load_config(args) -> tuple[RunConfig, Path]:
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    if args.out is not None:
        cfg = RunConfig(**{**cfg.__dict__, "output_dir": args.out})
    if args.seed is not None:
        cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
    if args.threads is not None:
        cfg = RunConfig(**{**cfg.__dict__, "threads": args.threads})
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    return cfg, outdir


def _witness_str(witness) -> str:
    if not witness:
        return ""
    return ";".join(f"{k}={_fmt(float(v)) if isinstance(v, (int, float)) else v}" for k, v in witness.items())


def cmd_validate(args) -> int:
    cfg, outdir = _load_config(args)
    kernel = build_kernel(cfg)
    reports = check_axioms(kernel, R=cfg.validate.r, epsilon=cfg.validate.epsilon,
                           sample_budget=cfg.validate.budget, seed=cfg.seed)
    _write_csv(
        outdir / "axioms.csv",
        ("axiom", "verdict", "worst_violation", "tolerance", "samples_used", "estimate", "witness"),
        ((r.axiom, r.verdict, r.worst_violation, r.tolerance, r.samples_used,
          "" if r.estimate is None else r.estimate, _witness_str(r.witness)) for r in reports),
    )
    for r in reports:
        print(f"{r.axiom}: {r.verdict} (worst {r.worst_violation:.3e}, tol {r.tolerance:.3e}, "
              f"samples {r.samples_used})")
    return EXIT_OK if all(r.verdict == "pass" for r in reports) else EXIT_AXIOM


def _prepare_run(cfg: RunConfig):
    kernel = build_kernel(cfg)
    sc = solver_config(cfg)
    regk = regularize(kernel, sc.epsilon)
    u0 = sample_profile(build_profile(cfg.profile, cfg.grid), cfg.grid)
    if cfg.profile.mollify is not None:
        from .evolve import mollify_initial

        u0 = mollify_initial(u0, cfg.grid, cfg.profile.mollify)
    R = cfg.solver.r if cfg.solver.r is not None else max(1.0, float(np.max(np.abs(u0.values))))
    ctx = build_context(cfg.grid, regk, R)
    return ctx, u0, sc


def _monotone_checks(cfg: RunConfig, traj: Trajectory):
    s = cfg.diag
    return [
        check_monotone_series(traj, "l1", s.slack_norms),
        check_monotone_series(traj, "l2", s.slack_norms),
        check_monotone_series(traj, "linf", s.slack_norms),
        check_monotone_series(traj, "tv", s.slack_tv),
        check_monotone_series(traj, "bv", s.slack_tv + 2 * s.slack_norms),
    ]


def cmd_run(args) -> int:
    cfg, outdir = _load_config(args)
    ctx, u0, sc = _prepare_run(cfg)
    try:
        traj = run_solver(ctx, u0, sc)
    except SolverAbortError as exc:
        if exc.trajectory is not None:
            _write_trajectory(outdir, "", exc.trajectory)
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_trajectory(outdir, "", traj)
    results = _monotone_checks(cfg, traj)
    _write_checks(outdir, "", results)
    for r in results:
        print(f"{r.name}: {'pass' if r.passed else 'fail'} (worst margin {r.worst_margin:.3e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


def _contraction_slack(cfg: RunConfig, traj: Trajectory) -> float:
    if cfg.diag.slack_contraction is not None:
        return cfg.diag.slack_contraction
    steps = len(traj.dts)
    return 2.0 * cfg.solver.picard_tol * max(steps, 1)


def cmd_compare(args) -> int:
    cfg, outdir = _load_config(args)
    if cfg.profile_b is None:
        print("compare needs a profile_b.* section", file=sys.stderr)
        return EXIT_CONFIG
    kernel = build_kernel(cfg)
    sc = solver_config(cfg)
    regk = regularize(kernel, sc.epsilon)
    u0 = sample_profile(build_profile(cfg.profile, cfg.grid), cfg.grid)
    v0 = sample_profile(build_profile(cfg.profile_b, cfg.grid), cfg.grid)
    R = cfg.solver.r
    if R is None:
        R = max(1.0, float(np.max(np.abs(u0.values))), float(np.max(np.abs(v0.values))))
    ctx = build_context(cfg.grid, regk, R)
    try:
        traj_u = run_solver(ctx, u0, sc)
        traj_v = run_solver(ctx, v0, sc)
    except SolverAbortError as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    slack = _contraction_slack(cfg, traj_u)
    results = [check_contraction(traj_u, traj_v, slack)]
    ordered = bool(np.all(u0.values <= v0.values)) or bool(np.all(v0.values <= u0.values))
    if ordered:
        lo, hi = (traj_u, traj_v) if np.all(u0.values <= v0.values) else (traj_v, traj_u)
        comp_slack = cfg.diag.slack_comparison if cfg.diag.slack_comparison is not None else slack
        try:
            results.append(check_comparison(lo, hi, comp_slack))
        except OrderingError as exc:  # pragma: no cover - guarded above
            print(f"comparison skipped: {exc}", file=sys.stderr)
    else:
        print("initial profiles are not ordered; comparison skipped, contraction still checked")

    hn = cfg.grid.cell_volume
    _write_csv(
        outdir / "compare.csv",
        ("t", "l1_distance", "min_gap"),
        ((t, float(np.abs(fu.values - fv.values).sum() * hn),
          float((fv.values - fu.values).min()))
         for t, fu, fv in zip(traj_u.times, traj_u.fields, traj_v.fields)),
    )
    _write_checks(outdir, "compare_", results)
    for r in results:
        print(f"{r.name}: {'pass' if r.passed else 'fail'} (worst margin {r.worst_margin:.3e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


def cmd_converge(args) -> int:
    cfg, outdir = _load_config(args)
    kernel = build_kernel(cfg)
    sc = solver_config(cfg)
    u0 = sample_profile(build_profile(cfg.profile, cfg.grid), cfg.grid)
    eps_list = resolve_eps_list(cfg)
    try:
        _, table = continuation_in_epsilon(cfg.grid, kernel, u0, eps_list, sc, R=cfg.solver.r)
    except SolverAbortError as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write_csv(outdir / "cauchy.csv", ("eps_coarse", "eps_fine", "l1_distance"), table)
    for row in table:
        print(f"d(eps={row[0]:g} -> {row[1]:g}) = {row[2]:.6e}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jumpdiff",
        description="Nonlocal diffusion with solution-dependent jump kernels on a periodic lattice.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, descr in (
        ("validate", cmd_validate, "check the configured kernel against the admissibility conditions"),
        ("run", cmd_run, "integrate the configured problem and write snapshots/diagnostics"),
        ("compare", cmd_compare, "run two initial conditions; check contraction and comparison"),
        ("converge", cmd_converge, "run a decreasing sequence of regularization radii"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--config", required=True, help="path to the key=value configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, default=None, help="seed override (overrides run.seed)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count; 1 forces fully deterministic mode (the numpy "
                            "backend is deterministic for any value)")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
