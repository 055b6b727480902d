"""Command line: ``resexplore {solve,frontier,simulate,ensemble,validate} --config FILE``.

Every subcommand writes CSV tables (plus ``.meta.json`` sidecars) into the
output directory.  Failures print one JSON object on stderr and exit with
status 2 for usage or configuration errors, 1 for anything else.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path as FsPath

import numpy as np

from . import diagnostics, export, solver
from .config import MIDPOINT, RunConfig, load_config
from .ensemble import conditional_growth_check, exhaustion_jump_check, martingale_test, run_ensemble
from .errors import ParseError, ResExploreError
from .simulate import sample_path, simulate_path

__all__ = ["main", "cmd_solve", "cmd_frontier", "cmd_simulate", "cmd_ensemble", "cmd_validate"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _grid(cfg: RunConfig):
    return solver.default_grid(cfg.model, x_max=cfg.grid.x_max, x_step=cfg.grid.x_step, r_step=cfg.grid.r_step)


def _solve(cfg: RunConfig):
    return solver.solve(cfg.model, _grid(cfg))


def initial_state(cfg: RunConfig, surface) -> tuple:
    """(x0, R0) with ``midpoint`` resolved against the solved surface."""
    x0 = cfg.simulation.x0
    r0 = cfg.simulation.R0
    if r0 == MIDPOINT:
        r0 = 0.5 * (float(surface.frontier.r_star_at(x0)) + surface.grid.r_max)
    return float(x0), float(r0)


def _out_dir(cfg: RunConfig, out) -> FsPath:
    d = FsPath(out if out is not None else cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_solve(cfg: RunConfig, out=None) -> dict:
    surface = _solve(cfg)
    d = _out_dir(cfg, out)
    meta = export.metadata("surface", cfg.model, surface.grid)
    export.write_table(d / "surface.csv", export.SURFACE_COLUMNS, export.surface_rows(surface), meta)
    meta = export.metadata("frontier", cfg.model, surface.grid, r0=surface.frontier.r0)
    export.write_table(d / "frontier.csv", export.FRONTIER_COLUMNS, export.frontier_rows(surface), meta)
    return {"command": "solve", "r0": surface.frontier.r0, "n_x": len(surface.grid.x_nodes),
            "n_r": len(surface.grid.r_nodes), "files": ["surface.csv", "frontier.csv"]}


def cmd_frontier(cfg: RunConfig, out=None) -> dict:
    surface = _solve(cfg)
    d = _out_dir(cfg, out)
    meta = export.metadata("frontier", cfg.model, surface.grid, r0=surface.frontier.r0)
    export.write_table(d / "frontier.csv", export.FRONTIER_COLUMNS, export.frontier_rows(surface), meta)
    fr = surface.frontier
    return {"command": "frontier", "r0": fr.r0, "p0": float(fr.p_star[0]),
            "r_star_at_x_max": float(fr.r_star[-1]), "files": ["frontier.csv"]}


def cmd_simulate(cfg: RunConfig, out=None) -> dict:
    surface = _solve(cfg)
    x0, r0 = initial_state(cfg, surface)
    sim = cfg.simulation
    path = simulate_path(x0, r0, surface, sim.base_seed, sim.horizon, stream_id=0)
    times = np.linspace(0.0, sim.horizon, sim.n_times)
    series = sample_path(path, times)
    d = _out_dir(cfg, out)
    extra = {"seed": sim.base_seed, "stream_id": 0, "x0": x0, "R0": r0, "horizon": sim.horizon}
    export.write_table(d / "events.csv", export.EVENT_COLUMNS, export.event_rows(path),
                       export.metadata("events", cfg.model, surface.grid, **extra))
    export.write_table(d / "series.csv", export.SERIES_COLUMNS, export.series_rows(series),
                       export.metadata("series", cfg.model, surface.grid, **extra))
    return {"command": "simulate", "events": len(path.events), "exhausted": path.exhausted,
            "exhaustion_time": path.exhaustion_time, "files": ["events.csv", "series.csv"]}


def cmd_ensemble(cfg: RunConfig, out=None, workers=None) -> dict:
    surface = _solve(cfg)
    x0, r0 = initial_state(cfg, surface)
    sim = cfg.simulation
    ens = run_ensemble(x0, r0, surface, sim.n_paths, sim.horizon, sim.base_seed,
                       n_times=sim.n_times, workers=workers or sim.workers)
    d = _out_dir(cfg, out)
    # the worker count is deliberately absent: it must not change the files
    meta = export.metadata("stats", cfg.model, surface.grid, base_seed=sim.base_seed, n_paths=sim.n_paths,
                           x0=x0, R0=r0, horizon=sim.horizon, p0=ens.p0)
    export.write_table(d / "stats.csv", export.STATS_COLUMNS, export.stats_rows(ens.stats), meta)
    mt = martingale_test(ens)
    jumps = exhaustion_jump_check(ens)
    summary = {"command": "ensemble", "n_paths": sim.n_paths, "p0": ens.p0,
               "martingale_max_abs_z": float(np.max(np.abs(mt.z))),
               "exhaustion_up_fraction": jumps.terminal_up_fraction, "files": ["stats.csv"]}
    try:
        gr = conditional_growth_check(ens, 0.2)
        summary["conditional_slope"] = gr.slope
    except ResExploreError:
        summary["conditional_slope"] = None
    return summary


def validation_checks(surface) -> list:
    """(name, passed, detail) for every structural check on a solved surface."""
    p = surface.params
    fr = surface.frontier
    checks = []
    if len(fr.x_nodes) > 1:
        rel = abs(fr.r_star[1] / fr.r0 - 1.0)
        checks.append(("frontier_anchor", rel <= 1e-3, f"|R*(x1)/R*(0) - 1| = {rel:.3g}"))
        steps = np.diff(fr.r_star)
        checks.append(("frontier_decreasing", bool(np.all(steps < 0)), f"max step {steps.max():.3g}"))
    low, high = diagnostics.frontier_bound_gaps(surface)
    checks.append(("frontier_bounds", low >= 0 and high >= 0, f"R*-Rbar >= {low:.3g}, Rcheck-R* >= {high:.3g}"))
    sw = diagnostics.sandwich_violation(surface)
    checks.append(("value_sandwich", sw == 0.0, f"max breach {sw:.3g}"))
    cv = diagnostics.concavity_violation(surface)
    checks.append(("concave_in_R", cv <= 1e-10, f"max positive second difference {cv:.3g}"))
    v = surface.v
    mono = bool(np.all(np.diff(v, axis=1) >= 0) and np.all(np.diff(v, axis=0) >= -1e-12 * v[1:]))
    checks.append(("value_monotone", mono, "V nondecreasing in R and x"))
    rep = diagnostics.hjb_residuals(surface)
    for name, tol in (("max_consumption_residual", 1e-2), ("max_exploration_residual", 1e-3),
                      ("smooth_pasting_gap", 1e-2), ("max_classic_residual", 1e-2)):
        val = getattr(rep, name)
        checks.append((name, val <= tol, f"{val:.3g} (tolerance {tol:g})"))
    return checks


def cmd_validate(cfg: RunConfig, out=None) -> dict:
    surface = _solve(cfg)
    checks = validation_checks(surface)
    d = _out_dir(cfg, out)
    report = {"params": cfg.model.as_dict(),
              "checks": [{"name": n, "passed": bool(ok), "detail": det} for n, ok, det in checks]}
    with open(d / "validate.json", "w", encoding="utf-8", newline="") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"command": "validate", "passed": all(ok for _, ok, _ in checks), "checks": checks}


_COMMANDS = {"solve": cmd_solve, "frontier": cmd_frontier, "simulate": cmd_simulate,
             "ensemble": cmd_ensemble, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (INI)")
    common.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, default=None, help="override simulation.base_seed")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    ap = _Parser(prog="resexplore", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "ensemble":
            sp.add_argument("--workers", type=int, default=None, help="worker processes")
    return ap


def _error(kind: str, exc: Exception, code: int) -> int:
    payload = {"error": kind, "message": str(exc)}
    if isinstance(exc, ParseError):
        payload["line"] = exc.line
        payload["field"] = exc.field
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _show(result: dict) -> None:
    if result["command"] == "validate":
        for name, ok, detail in result["checks"]:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return
    for k, v in result.items():
        if isinstance(v, float) and not math.isfinite(v):
            v = str(v)
        print(f"{k}: {v}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise UsageError("--seed must be non-negative")
            cfg = cfg.with_seed(args.seed)
        kwargs = {"out": args.out}
        if args.command == "ensemble":
            if args.workers is not None and args.workers < 1:
                raise UsageError("--workers must be at least 1")
            kwargs["workers"] = args.workers
        result = _COMMANDS[args.command](cfg, **kwargs)
    except UsageError as exc:
        return _error("UsageError", exc, 2)
    except ParseError as exc:
        return _error("ParseError", exc, 2)
    except FileNotFoundError as exc:
        return _error("FileNotFoundError", exc, 2)
    except (ResExploreError, ValueError) as exc:
        return _error(type(exc).__name__, exc, 1)
    if not args.quiet:
        _show(result)
    if args.command == "validate" and not result["passed"]:
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
