"""Command line: ``netpoint run|certify|sweep``.

Exit codes
----------
0  success (run converged, certificate passed, sweep completed)
1  unexpected internal error
2  usage error
3  scenario parse error (not valid YAML)
4  scenario schema error (unknown / missing / mistyped key)
5  scenario invariant violation
6  I/O error
7  simulation diverged
8  run completed without reaching convergence
9  certificate failed
"""
import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import certify
from .engine import run
from .errors import (
    DivergenceError,
    InputError,
    ScenarioInvariantError,
    ScenarioParseError,
    ScenarioSchemaError,
)
from .scenario import INTEGRATORS, load_scenario
from .topology import Topology

log = logging.getLogger("netpoint")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SCHEMA = 4
EXIT_INVARIANT = 5
EXIT_IO = 6
EXIT_DIVERGED = 7
EXIT_NOT_CONVERGED = 8
EXIT_CERT_FAILED = 9

OUTPUT_DIR_ENV = "NETPOINT_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "netpoint-out"
SWEEP_PARAMETERS = ("dt", "k12", "k21", "seed", "target-angle")


def _fmt(x):
    return format(float(x), ".17g")


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def scenario_digest(path):
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def apply_overrides(scenario, seed=None, dt=None, t_final=None, eps=None, integrator=None):
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if dt is not None:
        changes["dt"] = dt
    if t_final is not None:
        changes["t_final"] = t_final
    if eps is not None:
        changes["convergence_eps"] = eps
    if integrator is not None:
        changes["integrator"] = integrator
    try:
        return scenario.replace(**changes) if changes else scenario
    except InputError as exc:
        raise ScenarioInvariantError(f"override rejected: {exc}") from exc


def apply_parameter(scenario, parameter, value):
    """Return a copy of ``scenario`` with one sweep parameter set to ``value``."""
    if parameter == "dt":
        return scenario.replace(dt=float(value))
    if parameter == "seed":
        if float(value) != int(value):
            raise InputError(f"seed must be an integer, got {value!r}")
        return scenario.replace(seed=int(value))
    if parameter in ("k12", "k21"):
        t = scenario.topology
        gains = {"k12": t.k12, "k21": t.k21, parameter: float(value)}
        topo = Topology(n=t.n, nsa_adjacency=t.nsa_adjacency, sa_input=t.sa_input, **gains)
        return scenario.replace(topology=topo)
    if parameter == "target-angle":
        # target moves on the circle about the SA midpoint through the original target
        p = scenario.positions
        mid = 0.5 * (p[0] + p[1])
        radius = float(np.linalg.norm(scenario.target - mid))
        target = mid + radius * np.array([math.cos(value), math.sin(value)])
        return scenario.replace(target=target)
    raise InputError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")


def write_trace_csv(trace, path):
    n = trace.est_err.shape[1]
    header = ["t"] + [f"est_err_{i}" for i in range(1, n + 1)] + [f"point_err_{i}" for i in range(1, n + 1)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, e, p in zip(trace.times, trace.est_err, trace.point_err):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in e] + [_fmt(v) for v in p])


def build_summary(scenario, trace, digest, wall_clock):
    return {
        "scenario": {"name": scenario.name, "digest": digest, "n_agents": scenario.n},
        "certificate": trace.certificate.to_dict(),
        "converged_at": trace.converged_at,
        "final_max_est_err": trace.final_max_est_err,
        "final_max_point_err": trace.final_max_point_err,
        "wall_clock_seconds": wall_clock,
        "config": {
            "dt_seconds": scenario.dt,
            "t_final_seconds": scenario.t_final,
            "convergence_eps": scenario.convergence_eps,
            "convergence_hold_steps": scenario.convergence_hold,
            "seed": scenario.seed,
            "integrator": scenario.integrator,
            "pointing_error_units": "radians",
        },
    }


def execute(scenario, output_dir, digest):
    """Run one scenario, write trace.csv / summary.json / certificate.json.

    Returns ``(exit_code, summary)``; the summary is None on divergence.
    """
    started = time.perf_counter()
    trace = run(scenario)
    wall = time.perf_counter() - started
    summary = build_summary(scenario, trace, digest, wall)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    (out / "summary.json").write_text(dump_json(summary), encoding="utf-8")
    (out / "certificate.json").write_text(dump_json(summary["certificate"]), encoding="utf-8")
    code = EXIT_OK if trace.converged_at is not None else EXIT_NOT_CONVERGED
    return code, summary


def _load(path):
    return load_scenario(path), scenario_digest(path)


def _guard(fn):
    """Translate library errors into documented exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ScenarioParseError as exc:
            log.error("parse error: %s", exc)
            return EXIT_PARSE
        except ScenarioSchemaError as exc:
            log.error("schema error: %s", exc)
            return EXIT_SCHEMA
        except (ScenarioInvariantError, InputError) as exc:
            log.error("invalid scenario: %s", exc)
            return EXIT_INVARIANT
        except DivergenceError as exc:
            log.error("simulation diverged: %s", exc)
            return EXIT_DIVERGED
        except OSError as exc:
            log.error("I/O error: %s", exc)
            return EXIT_IO
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_guard
def cmd_run(scenario_path, output_dir=None, **overrides):
    scenario, digest = _load(scenario_path)
    scenario = apply_overrides(scenario, **overrides)
    output_dir = output_dir or os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)
    code, summary = execute(scenario, output_dir, digest)
    if code == EXIT_OK:
        log.info("converged at t=%.6gs; outputs in %s", summary["converged_at"], output_dir)
    else:
        log.warning("no convergence by t=%gs (final max est err %.3g, point err %.3g)",
                    scenario.t_final, summary["final_max_est_err"], summary["final_max_point_err"])
    return code


@_guard
def cmd_certify(scenario_path, stream=None):
    scenario, _ = _load(scenario_path)
    cert = certify(scenario)
    (stream or sys.stdout).write(dump_json(cert.to_dict()))
    for reason in cert.reasons:
        log.warning("%s", reason)
    return EXIT_OK if cert.overall else EXIT_CERT_FAILED


_SWEEP_COLUMNS = [
    "index", "parameter", "value", "status", "converged_at", "final_max_est_err",
    "final_max_point_err", "localizable", "certified", "sin_bearing_gap", "final_state", "error",
]


def _sweep_cell(args):
    index, scenario, parameter, value, cell_dir, digest = args
    row = dict.fromkeys(_SWEEP_COLUMNS, "")
    row.update(index=index, parameter=parameter, value=_fmt(value))
    try:
        cell = apply_parameter(scenario, parameter, value)
        started = time.perf_counter()
        trace = run(cell)
        summary = build_summary(cell, trace, digest, time.perf_counter() - started)
        Path(cell_dir).mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, Path(cell_dir) / "trace.csv")
        (Path(cell_dir) / "summary.json").write_text(dump_json(summary), encoding="utf-8")
        row.update(
            status="converged" if trace.converged_at is not None else "not-converged",
            converged_at="" if trace.converged_at is None else _fmt(trace.converged_at),
            final_max_est_err=_fmt(trace.final_max_est_err),
            final_max_point_err=_fmt(trace.final_max_point_err),
            localizable=trace.certificate.localizable,
            certified=trace.certificate.overall,
            sin_bearing_gap=_fmt(trace.certificate.sin_bearing_gap),
            final_state=" ".join(_fmt(v) for v in trace.final_state.flat()),
        )
    except DivergenceError as exc:
        row.update(status="diverged", error=str(exc))
    except (InputError, ScenarioInvariantError) as exc:
        row.update(status="invalid", error=str(exc))
    except OSError as exc:
        row.update(status="io-error", error=str(exc))
    return row


def run_sweep(scenario, parameter, values, output_dir, digest="", jobs=1):
    """Run ``scenario`` once per value; returns one row dict per value, in order."""
    if parameter not in SWEEP_PARAMETERS:
        raise InputError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    tasks = [
        (i, scenario, parameter, v, str(Path(output_dir) / f"cell_{i:03d}"), digest)
        for i, v in enumerate(values)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, tasks))
    return [_sweep_cell(t) for t in tasks]


def write_sweep_csv(rows, stream):
    writer = csv.DictWriter(stream, fieldnames=_SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


@_guard
def cmd_sweep(scenario_path, parameter, values, output_dir=None, jobs=1, stream=None, **overrides):
    scenario, digest = _load(scenario_path)
    scenario = apply_overrides(scenario, **overrides)
    values = list(values)
    if not values:
        log.info("empty sweep range; nothing to do")
        return EXIT_OK
    output_dir = Path(output_dir or os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))
    output_dir.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(scenario, parameter, values, output_dir, digest, jobs)
    with open(output_dir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        write_sweep_csv(rows, fh)
    write_sweep_csv(rows, stream or sys.stdout)
    failed = sum(r["status"] not in ("converged", "not-converged") for r in rows)
    if failed:
        log.warning("%d of %d sweep cells failed", failed, len(rows))
    return EXIT_OK


def _values(args):
    if args.range is not None:
        start, stop, count = args.range
        count = int(count)
        return list(np.linspace(start, stop, count)) if count > 0 else []
    if args.values is None or args.values.strip() == "":
        return []
    return [float(v) for v in args.values.split(",") if v.strip()]


def _add_overrides(p):
    p.add_argument("--seed", type=int, help="override the heading seed")
    p.add_argument("--dt", type=float, help="override the integration step (seconds)")
    p.add_argument("--t-final", type=float, dest="t_final", help="override the horizon (seconds)")
    p.add_argument("--eps", type=float, help="override the convergence threshold")
    p.add_argument("--integrator", choices=INTEGRATORS, help="integration scheme")


def build_parser():
    parser = argparse.ArgumentParser(prog="netpoint", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate a scenario and export traces")
    p.add_argument("scenario")
    p.add_argument("--output-dir", help=f"defaults to ${OUTPUT_DIR_ENV} or ./{DEFAULT_OUTPUT_DIR}")
    _add_overrides(p)

    p = sub.add_parser("certify", parents=[common], help="print the stability certificate")
    p.add_argument("scenario")

    p = sub.add_parser("sweep", parents=[common], help="run a scenario across one parameter")
    p.add_argument("scenario")
    p.add_argument("parameter", choices=SWEEP_PARAMETERS)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--values", help="comma separated values")
    grp.add_argument("--range", nargs=3, type=float, metavar=("START", "STOP", "COUNT"),
                     help="COUNT evenly spaced values from START to STOP inclusive")
    p.add_argument("--output-dir", help=f"defaults to ${OUTPUT_DIR_ENV} or ./{DEFAULT_OUTPUT_DIR}")
    p.add_argument("--jobs", type=int, default=1)
    _add_overrides(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    overrides = {}
    if args.command in ("run", "sweep"):
        overrides = dict(seed=args.seed, dt=args.dt, t_final=args.t_final,
                         eps=args.eps, integrator=args.integrator)
    try:
        if args.command == "run":
            return cmd_run(args.scenario, args.output_dir, **overrides)
        if args.command == "certify":
            return cmd_certify(args.scenario)
        return cmd_sweep(args.scenario, args.parameter, _values(args), args.output_dir,
                         jobs=args.jobs, **overrides)
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
