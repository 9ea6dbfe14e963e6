"""Command-line interface: ``nlramsey {solve,optimize,check,compare-local,schema}``.

Exit codes: 0 success, 1 invalid scenario, 2 solver failure, 3 failed check.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .adjoint import optimize
from .checks import run_checks
from .config import SHIPPED, ConfigError, build, config_hash, parse_scenario, schema_reference, shipped_text
from .forward import SolverError, check_boundedness_condition, solve_forward, solve_picard, sup_norm_bound
from .grid import integrate_array

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3


def _read_config(source: str):
    path = Path(source)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    elif source in SHIPPED:
        text = shipped_text(source)
    else:
        raise ConfigError([f"no scenario file {source!r} (shipped scenarios: {', '.join(SHIPPED)})"])
    return parse_scenario(text)


def _manifest(cfg, args, solver: str, started: float) -> dict:
    return {
        "command": args.command,
        "config_hash": config_hash(cfg),
        "solver": solver,
        "seed": args.seed,
        "version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - started, 6),
    }


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _boundedness_label(cfg, setup, traj) -> str:
    """'theory-certified' when the sufficient condition holds (1D only) and the run stays under the bound."""
    sc = setup.scenario
    if sc.grid.dim != 1:
        return "empirical"
    theta = cfg.values["check"]["theta"] or 4.0 * sc.production.lipschitz**2
    if not check_boundedness_condition(sc, setup.admissible, theta):
        return "empirical"
    bound = sup_norm_bound(sc, float(np.max(setup.admissible.c_max.values)))
    if float(np.max(np.abs(traj.states))) > bound:
        return "certified-but-exceeded"
    return "theory-certified"


def cmd_solve(cfg, args, started):
    setup = build(cfg)
    sc = setup.scenario
    control = np.zeros((sc.time.steps,) + sc.grid.shape) if args.zero_control else \
        np.broadcast_to(0.5 * setup.admissible.c_max.values, (sc.time.steps,) + sc.grid.shape)
    if args.solver == "picard":
        sol = cfg.values["solver"]
        sub = sol["picard_subinterval"] or None
        traj, report = solve_picard(sc, control, sub, sol["picard_tol"], sol["picard_max_iter"])
        print(f"picard: iterations per subinterval {report.iterations}, max contraction factor {report.max_factor:.4g}")
    else:
        traj = solve_forward(sc, control)
    out = _out_dir(args)
    io.write_trajectory(traj, out / "trajectory.csv")
    io.write_diagnostics(traj, out / "diagnostics.csv")
    man = _manifest(cfg, args, args.solver, started)
    man["boundedness"] = _boundedness_label(cfg, setup, traj)
    io.write_manifest(out / "manifest.json", man)
    print(f"boundedness: {man['boundedness']}")
    print(f"solve: wrote {out}/trajectory.csv, diagnostics.csv, manifest.json; "
          f"max growth fraction {np.max(traj.diagnostics['max_fraction']):.6g}")
    return EXIT_OK


def cmd_optimize(cfg, args, started):
    setup = build(cfg)
    oc = setup.optimize
    if args.max_outer is not None:
        from dataclasses import replace
        oc = replace(oc, max_outer=args.max_outer)
    result = optimize(setup.scenario, setup.objective, setup.admissible, oc)
    out = _out_dir(args)
    sc = setup.scenario
    io.write_trajectory(result.trajectory, out / "trajectory.csv")
    io.write_diagnostics(result.trajectory, out / "diagnostics.csv")
    io.write_control(sc.grid, sc.time.dt, result.control, out / "control.csv")
    io.write_history(result.objective_history, out / "objective_history.csv")
    man = _manifest(cfg, args, "imex", started)
    man.update(status=result.status, iterations=result.iterations, kkt_residual=result.kkt_residual)
    io.write_manifest(out / "manifest.json", man)
    print(f"optimize: {result.status} after {result.iterations} iterations, "
          f"J = {result.objective_history[-1]:.10g}, projected-gradient norm {result.kkt_residual:.3e}")
    return EXIT_OK


def cmd_check(cfg, args, started):
    setup = build(cfg)
    samples = args.samples or cfg.values["check"]["samples"]
    results = run_checks(setup, args.seed, samples)
    for r in results:
        print(r.line())
    if args.out:
        man = _manifest(cfg, args, "imex", started)
        man["checks"] = {r.name: r.passed for r in results}
        io.write_manifest(_out_dir(args) / "manifest.json", man)
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_compare_local(cfg, args, started):
    local_cfg = cfg.with_overrides(model__beta=0.0, model__mu=cfg.values["model"]["eps"])
    setups = build(cfg), build(local_cfg)
    sc = setups[0].scenario
    control = np.broadcast_to(0.5 * setups[0].admissible.c_max.values, (sc.time.steps,) + sc.grid.shape)
    nonlocal_run, local_run = (solve_forward(s.scenario, control) for s in setups)
    diff = nonlocal_run.states - local_run.states
    grid = sc.grid
    l2 = [np.sqrt(integrate_array(grid, d**2)) for d in diff]
    columns = [sc.time.nodes, l2, np.abs(diff).reshape(len(diff), -1).max(axis=1),
               nonlocal_run.diagnostics["l2"], local_run.diagnostics["l2"]]
    out = _out_dir(args)
    io.write_table(out / "compare_local.csv", ["t", "l2_diff", "max_abs_diff", "l2_nonlocal", "l2_local"], columns)
    io.write_manifest(out / "manifest.json", _manifest(cfg, args, "imex", started))
    print(f"compare-local: terminal L2 difference {l2[-1]:.6g}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "optimize": cmd_optimize, "check": cmd_check, "compare-local": cmd_compare_local}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlramsey", description="Nonlocal spatial Ramsey model solver")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help=f"scenario file, or a shipped scenario name ({', '.join(SHIPPED)})")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("solve", "integrate the state equation and write trajectory + diagnostics CSVs")
    p.add_argument("--solver", choices=("imex", "picard"), default="imex")
    p.add_argument("--zero-control", action="store_true", help="consume nothing instead of c_max / 2")
    p = add("optimize", "compute the optimal consumption path by projected gradient descent")
    p.add_argument("--max-outer", type=int, default=None)
    p = add("check", "run the invariant suite and print PASS/FAIL per property")
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(out=None)
    add("compare-local", "compare against the purely local model (beta = 0, mu = eps)")
    sub.add_parser("schema", help="print every scenario key with its default and meaning")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.command == "schema":
        print(schema_reference())
        return EXIT_OK
    started = time.perf_counter()
    try:
        cfg = _read_config(args.config)
        return COMMANDS[args.command](cfg, args, started)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
