"""Command-line entry point: ``pinchflow {simulate,analyze,verify,sweep,plot}``.

Exit codes
----------
0  success (inconclusive claims only warn)
1  unexpected internal error
2  configuration or usage error
3  run ended boundary_contaminated
4  run ended with gradient blow-up
5  run hit max_steps
6  at least one verified claim failed
7  run directory is missing data the command needs
8  sweep finished but at least one cell did not exit 0
"""

from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from pinchflow.analysis import check_main_profile, fit_profile
from pinchflow.asymptotics import CLAIMS, run_claims, summary_table
from pinchflow.config import (
    RunConfig,
    identity_text,
    load_config,
    parse_value,
    serialize_config,
    shipped_config,
)
from pinchflow.errors import (
    ConfigError,
    FitError,
    InvalidWindowError,
    ResolutionError,
    RunDataError,
)
from pinchflow.frames import GridProfile
from pinchflow.plots import emit_plot_scripts
from pinchflow.solver import (
    RunRecord,
    cylinder_profile,
    generic_pinch_profile,
    make_grid,
    run_to_pinch,
)
from pinchflow.store import (
    dump_json,
    read_fit_series,
    read_run,
    write_fit_series,
    write_reports,
    write_run,
    write_table,
)

log = logging.getLogger("pinchflow")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_BOUNDARY = 3
EXIT_GRADIENT = 4
EXIT_MAX_STEPS = 5
EXIT_CLAIM_FAILURE = 6
EXIT_RUN_DATA = 7
EXIT_SWEEP_PARTIAL = 8

STATUS_EXIT = {
    "pinched": EXIT_OK,
    "boundary_contaminated": EXIT_BOUNDARY,
    "gradient_blowup": EXIT_GRADIENT,
    "max_steps": EXIT_MAX_STEPS,
}


# -- pipeline ----------------------------------------------------------------


def initial_profile(cfg: RunConfig) -> GridProfile:
    radii = make_grid(cfg.solver)
    init = cfg.initial
    if init.family == "cylinder":
        values = cylinder_profile(radii, init.c0)
    else:
        values = generic_pinch_profile(radii, init.c0, init.c2, init.width)
    return GridProfile(radii, values)


def simulate(cfg: RunConfig) -> RunRecord:
    return run_to_pinch(cfg.solver, cfg.geometry, initial_profile(cfg), identity_text(cfg))


def cmd_simulate(cfg: RunConfig, out_dir) -> int:
    rec = simulate(cfg)
    write_run(rec, cfg, out_dir)
    log.info("status %s after %d steps; run written to %s", rec.status, rec.steps, out_dir)
    return STATUS_EXIT[rec.status]


def analyze_run(rec: RunRecord, cfg: RunConfig) -> tuple:
    """Fit every rescaled snapshot whose window is defined; returns (fits, main rows)."""
    fits, main_rows = [], []
    for v in rec.rescaled_snapshots():
        try:
            fits.append(fit_profile(v, cfg.window))
        except (FitError, InvalidWindowError):
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            chk = check_main_profile(v)
        main_rows.append((chk.tau, chk.sup_deviation, chk.mean_deviation,
                          chk.window, chk.achieved_fraction))
    return fits, main_rows


def cmd_analyze(run_dir) -> int:
    run_dir = Path(run_dir)
    rec, cfg = read_run(run_dir)
    if rec.status != "pinched" or rec.t_star != rec.t_star:
        raise RunDataError(f"{run_dir}: run did not pinch (status {rec.status}); nothing to fit")
    fits, main_rows = analyze_run(rec, cfg)
    if not fits:
        raise RunDataError(f"{run_dir}: no snapshot has a usable fit window")
    write_fit_series(run_dir / "series" / "fit_series.csv", fits)
    write_table(run_dir / "series" / "main_profile.csv",
                 ("tau", "sup_dev", "mean_dev", "window", "fraction"), main_rows)
    log.info("fitted %d snapshots", len(fits))
    return EXIT_OK


def cmd_verify(run_dir, claims=CLAIMS) -> int:
    run_dir = Path(run_dir)
    rec, _ = read_run(run_dir)
    if rec.t_star != rec.t_star:
        raise RunDataError(f"{run_dir}: run has no blow-up time (status {rec.status})")
    fit_path = run_dir / "series" / "fit_series.csv"
    series = read_fit_series(fit_path) if fit_path.is_file() else None
    reports = run_claims(rec, claims, series)
    summary = summary_table(reports)
    write_reports(run_dir, reports, summary)
    sys.stdout.write(summary)
    if any(r.verdict == "fail" for r in reports):
        return EXIT_CLAIM_FAILURE
    for r in reports:
        if r.verdict == "inconclusive":
            log.warning("claim %s is inconclusive: %s", r.claim, "; ".join(r.flags) or "unresolved")
    return EXIT_OK


def cmd_plot(run_dir) -> int:
    for path in emit_plot_scripts(run_dir):
        log.info("wrote %s", path)
    return EXIT_OK


# -- sweeps ------------------------------------------------------------------


def parse_grid(items) -> dict:
    """``["initial.c2=0.05,0.08", ...]`` -> ordered ``{key: [values]}`` without duplicates."""
    grid: dict = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"grid entry {item!r} must look like key=v1,v2")
        key, _, vals = item.partition("=")
        key = key.strip()
        if key == "output.dir":
            raise ConfigError("output.dir cannot be swept", field=key)
        parsed = [parse_value(key, v) for v in vals.split(",") if v.strip()]
        if not parsed:
            raise ConfigError(f"grid entry for {key} has no values", field=key)
        bucket = grid.setdefault(key, [])
        for val in parsed:
            if val not in bucket:
                bucket.append(val)
    if not grid:
        raise ConfigError("sweep grid is empty")
    return grid


def _sweep_cell(cfg_text: str, run_dir: str) -> tuple:
    # module-level so worker processes can import it
    from pinchflow.config import parse_config

    try:
        code = cmd_simulate(parse_config(cfg_text), run_dir)
        return code, None
    except Exception as exc:  # recorded per cell, the sweep carries on
        return EXIT_UNEXPECTED, f"{type(exc).__name__}: {exc}"


def cmd_sweep(base: RunConfig, grid: dict, out_dir, jobs: int = 1) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    cells = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        params = dict(zip(keys, combo))
        name = f"cell_{i:04d}"
        try:
            cfg = base.replace(**params, **{"output.dir": str(out_dir / name)})
            text, error = serialize_config(cfg), None
        except ConfigError as exc:
            text, error = None, str(exc)
        cells.append({"index": i, "dir": name, "params": params, "text": text, "error": error})
    todo = [c for c in cells if c["text"] is not None]
    args = [(c["text"], str(out_dir / c["dir"])) for c in todo]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, *zip(*args)))
    else:
        results = [_sweep_cell(*a) for a in args]
    for cell, (code, error) in zip(todo, results):
        cell["exit_code"], cell["error"] = code, error
    for cell in cells:
        cell.setdefault("exit_code", EXIT_CONFIG)
        cell.pop("text")
    dump_json({"grid": grid, "cells": cells}, out_dir / "sweep.json")
    failed = [c for c in cells if c["exit_code"] != EXIT_OK]
    log.info("sweep: %d cells, %d not ok", len(cells), len(failed))
    return EXIT_SWEEP_PARTIAL if failed else EXIT_OK


# -- argument handling -------------------------------------------------------


def _resolve_out(args, cfg: RunConfig | None) -> Path:
    env = os.environ.get("PINCHFLOW_OUT")
    if env:
        return Path(env)
    if args.out:
        return Path(args.out)
    if cfg is None:
        raise ConfigError("no output directory: pass --out or set PINCHFLOW_OUT")
    return Path(cfg.output_dir)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else load_config(shipped_config("default"))
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer", field="seed")
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _run_dir(args) -> Path:
    if getattr(args, "run_dir", None):
        return Path(args.run_dir)
    return _resolve_out(args, _load(args) if args.config else None)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (default: shipped default)")
    common.add_argument("--out", help="output or run directory (PINCHFLOW_OUT overrides)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed stored with the run")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="pinchflow",
        description="Simulate and check rotationally symmetric mean curvature flow pinches.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Exit codes", 1)[1].strip("-\n "),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the solver and write a run directory")
    for name, text in (("analyze", "fit rescaled snapshots of a run"),
                       ("plot", "emit plotting scripts for an analyzed run")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("run_dir", nargs="?")
    p = sub.add_parser("verify", parents=[common], help="check the asymptotic claims on a run")
    p.add_argument("run_dir", nargs="?")
    p.add_argument("--claims", default=",".join(CLAIMS),
                   help=f"comma-separated subset of {','.join(CLAIMS)}")
    p = sub.add_parser("sweep", parents=[common], help="run a parameter grid")
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                   help="parameter values; repeat for a cartesian product")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            cfg = _load(args)
            return cmd_simulate(cfg, _resolve_out(args, cfg))
        if args.command == "sweep":
            cfg = _load(args)
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            return cmd_sweep(cfg, parse_grid(args.grid), _resolve_out(args, cfg), args.jobs)
        run_dir = _run_dir(args)
        if args.command == "analyze":
            return cmd_analyze(run_dir)
        if args.command == "plot":
            return cmd_plot(run_dir)
        claims = [c.strip() for c in args.claims.split(",") if c.strip()]
        unknown = [c for c in claims if c not in CLAIMS]
        if unknown or not claims:
            raise ConfigError(f"unknown claims: {', '.join(unknown) or '(none given)'}")
        return cmd_verify(run_dir, claims)
    except ConfigError as exc:
        print(f"pinchflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunDataError, ResolutionError) as exc:
        print(f"pinchflow: run data error: {exc}", file=sys.stderr)
        return EXIT_RUN_DATA
    except Exception as exc:
        log.debug("unexpected failure", exc_info=True)
        print(f"pinchflow: unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
