"""Command-line interface.

Subcommands: f1, evolve, fockprep, landscape, sweep, validate.
Exit codes: 0 success, 2 scenario/schema error, 3 numerical-tolerance
failure, 4 convergence failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np
import yaml

from .errors import (
    ConvergenceFailure,
    NoBarrier,
    NoSignChange,
    PositivityLoss,
    SchemaError,
    StepTooLarge,
    TruncationTooSmall,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_CONVERGENCE = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionrabi",
        description="Trapped-ion spin-boson simulator beyond the Lamb-Dicke regime",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("f1", help="evaluate the nonlinear coupling f1, table it, or find zeros")
    p.add_argument("--eta", type=float, help="Lamb-Dicke parameter")
    p.add_argument("--n", type=int, help="single Fock index to evaluate")
    p.add_argument("--table", action="store_true", help="emit CSV table (columns n,f1)")
    p.add_argument("--n-max", type=int, default=60, help="table extent (default 60)")
    p.add_argument("--find-zero", type=int, metavar="N",
                   help="find the smallest eta with f1(N, eta)=0")
    p.add_argument("--bracket", type=float, nargs=2, default=(1e-3, 1.0),
                   help="eta search bracket for --find-zero (default 1e-3 1.0)")
    p.add_argument("--out-file", help="write table here instead of stdout")

    p = sub.add_parser("evolve", help="run a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", help=f"output directory (default ${'{'}IONRABI_OUTDIR{'}'} or ./runs)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--check-convergence", action="store_true",
                   help="rerun at n_max+20 and require observable changes < 1e-6")

    p = sub.add_parser("fockprep", help="dissipative Fock-state preparation")
    p.add_argument("--target", type=int, required=True, metavar="N")
    p.add_argument("--eta", type=float, help="override the auto blockade eta")
    p.add_argument("--nbar", type=float, default=1.0, help="initial thermal occupation")
    p.add_argument("--g-khz", type=float, default=45.24,
                   help="coupling g in 2*pi*kHz (default 45.24)")
    p.add_argument("--gamma-ratio", type=float, default=2.0)
    p.add_argument("--duration", type=float, default=100.0, help="cycles of 2*pi/g")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out")

    p = sub.add_parser("landscape", help="log10|f1| heat-map table over (n, eta)")
    p.add_argument("--config", help="landscape config file (alternative to flags)")
    p.add_argument("--n-min", type=int, default=0)
    p.add_argument("--n-max", type=int)
    p.add_argument("--eta-min", type=float)
    p.add_argument("--eta-max", type=float)
    p.add_argument("--grid", type=int, help="number of eta points")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="run a scenario template over parameter axes")
    p.add_argument("--template", required=True)
    p.add_argument("--axis", action="append", required=True,
                   help="key.path=start:stop:count or key.path=[v1,v2,...] (repeatable)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("validate", help="truncation convergence + vibrational-RWA cross-check")
    p.add_argument("--scenario", required=True)
    p.add_argument("--t-cycles", type=float, default=3.0,
                   help="cross-check span in cycles of 2*pi/g (default 3)")
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--out")
    return parser


def _plotdata_name(result_dir: str, kind: str) -> str:
    return os.path.join(result_dir, f"plot_{kind}.dat")


def _cmd_f1(args) -> int:
    from .fock import barrier_eta, f1_diagonal, f1_scalar

    if args.find_zero is not None:
        eta = barrier_eta(args.find_zero, tuple(args.bracket))
        print(f"barrier_eta({args.find_zero}) = {eta:.12f}")
        print(f"f1({args.find_zero}, eta) = {f1_scalar(args.find_zero, eta):.3e}")
        return EXIT_OK
    if args.eta is None:
        print("f1: --eta is required unless --find-zero is used", file=sys.stderr)
        return EXIT_SCHEMA
    if args.table:
        values = f1_diagonal(args.n_max, args.eta)
        lines = ["n,f1"] + [f"{n},{v:.17e}" for n, v in enumerate(values)]
        text = "\n".join(lines) + "\n"
        if args.out_file:
            with open(args.out_file, "w") as fh:
                fh.write(text)
            print(f"wrote {args.out_file}")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.n is None:
        print("f1: provide --n or --table or --find-zero", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"f1({args.n}, {args.eta}) = {f1_scalar(args.n, args.eta):.17e}")
    return EXIT_OK


def _cmd_evolve(args) -> int:
    from .runner import run
    from .scenario import parse_scenario

    scenario = parse_scenario(args.scenario)
    result = run(scenario, out_dir=args.out, threads=args.threads,
                 check_convergence=args.check_convergence)
    print(f"{result.name}: wrote {result.csv_path} ({result.wall_time_s:.2f}s, "
          f"convergence {result.convergence})")
    return EXIT_OK


def _cmd_fockprep(args) -> int:
    from .protocols import FockPrepPlan, run_fock_prep
    from .runner import output_dir, write_trajectory_csv
    from .scenario import KHZ

    plan = FockPrepPlan(
        target_n=args.target,
        eta=args.eta,
        g=args.g_khz * KHZ,
        gamma_ratio=args.gamma_ratio,
        initial_nbar=args.nbar,
        duration=args.duration,
        n_points=args.points,
    )
    result = run_fock_prep(plan)
    base = os.path.join(output_dir(args.out), f"fockprep-n{args.target}")
    os.makedirs(base, exist_ok=True)
    csv_path = os.path.join(base, "trajectory.csv")
    write_trajectory_csv(csv_path, result.trajectory,
                         ["sigma_z", "fidelity", "n_mean", "phonons"])
    report = {
        "target_n": args.target,
        "eta_used": result.eta_used,
        "p_target_final": result.p_target,
        "initial_above_target": result.initial_above_target,
        "max_above_target": result.max_above_target,
        "g_rad_per_s": plan.g,
        "gamma_ratio": plan.gamma_ratio,
        "duration_cycles": plan.duration,
        "trace_drift": result.trajectory.meta["trace_drift"],
    }
    with open(os.path.join(base, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"fockprep target {args.target}: eta={result.eta_used:.6f} "
          f"P_target={result.p_target:.6f} -> {csv_path}")
    return EXIT_OK


def _parse_landscape_config(path):
    from .errors import SchemaError

    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a mapping")
    allowed = {"schema_version", "name", "landscape"}
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"{path}: unknown key(s) {sorted(unknown)}")
    if doc.get("schema_version") != 1:
        raise SchemaError(f"{path}: schema_version must be 1")
    section = doc.get("landscape")
    if not isinstance(section, dict):
        raise SchemaError(f"{path}: missing landscape section")
    keys = {"n_min", "n_max", "eta_min", "eta_max", "eta_points"}
    unknown = set(section) - keys
    if unknown:
        raise SchemaError(f"{path}.landscape: unknown key(s) {sorted(unknown)}")
    missing = {"n_max", "eta_min", "eta_max", "eta_points"} - set(section)
    if missing:
        raise SchemaError(f"{path}.landscape: missing key(s) {sorted(missing)}")
    return (doc.get("name", "landscape"), section.get("n_min", 0), section["n_max"],
            section["eta_min"], section["eta_max"], section["eta_points"])


def _cmd_landscape(args) -> int:
    from .runner import output_dir, run_landscape

    if args.config:
        name, n_min, n_max, eta_min, eta_max, grid = _parse_landscape_config(args.config)
    else:
        if args.n_max is None or args.eta_min is None or args.eta_max is None or args.grid is None:
            print("landscape: need --n-max --eta-min --eta-max --grid (or --config)",
                  file=sys.stderr)
            return EXIT_SCHEMA
        name, n_min, n_max = "landscape", args.n_min, args.n_max
        eta_min, eta_max, grid = args.eta_min, args.eta_max, args.grid
    base = os.path.join(output_dir(args.out), name)
    os.makedirs(base, exist_ok=True)
    out_path = os.path.join(base, "landscape.csv")
    n_values = np.arange(n_min, n_max + 1)
    eta_values = np.linspace(eta_min, eta_max, grid)
    run_landscape(n_values, eta_values, out_path, threads=args.threads)
    print(f"wrote {out_path} ({len(n_values)} x {len(eta_values)})")
    return EXIT_OK


def _parse_axis(text: str):
    if "=" not in text:
        raise SchemaError(f"axis {text!r} must look like key.path=start:stop:count")
    path, spec = text.split("=", 1)
    spec = spec.strip()
    if spec.startswith("["):
        values = yaml.safe_load(spec)
        if not isinstance(values, list) or not values:
            raise SchemaError(f"axis {text!r}: expected a non-empty list")
        return path.strip(), [float(v) for v in values]
    parts = spec.split(":")
    if len(parts) != 3:
        raise SchemaError(f"axis {text!r}: expected start:stop:count")
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise SchemaError(f"axis {text!r}: count must be >= 1")
    return path.strip(), list(np.linspace(start, stop, count))


def _cmd_sweep(args) -> int:
    from .runner import sweep
    from .scenario import parse_scenario

    template = parse_scenario(args.template)
    axes = [_parse_axis(a) for a in args.axis]
    results = sweep(template, axes, out_dir=args.out, threads=args.threads)
    total = 1
    for _, values in axes:
        total *= len(values)
    print(f"sweep {template.name}: {len(results)}/{total} points succeeded")
    return EXIT_OK if len(results) == total else EXIT_NUMERICAL


def _cmd_validate(args) -> int:
    from .dynamics import rwa_crosscheck
    from .models import DEFAULT_NU, ModelSpec, sideband_detunings
    from .runner import check_truncation_convergence, output_dir
    from .scenario import parse_scenario

    scenario = parse_scenario(args.scenario)
    spec = scenario.model_spec()
    report = {"scenario": scenario.name}

    converged, delta, n_max = check_truncation_convergence(scenario)
    report["truncation"] = {"n_max": n_max, "max_delta": delta, "converged": converged}
    print(f"truncation convergence (n_max {n_max} -> {n_max + 20}): "
          f"max delta {delta:.3e} -> {'pass' if converged else 'FAIL'}")

    crosscheck_state = "skipped"
    rwa_ok = True
    if spec.kind == "TwoTone":
        tt = spec
    elif spec.kind in ("QRM", "NonlinearQRM") and spec.eta > 0:
        delta_r, delta_b = sideband_detunings(spec.omega0_R, spec.omega_R)
        tt = ModelSpec(kind="TwoTone", eta=spec.eta, Omega=2.0 * spec.g / spec.eta,
                       nu=DEFAULT_NU, delta_r=delta_r, delta_b=delta_b)
    else:
        tt = None
        print("rwa cross-check: skipped (needs a nonlinear QRM-family or TwoTone model)")
    if tt is not None:
        T = args.t_cycles * 2.0 * math.pi / tt.g
        rep = rwa_crosscheck(tt, T=T, tolerance=args.tolerance)
        rwa_ok = rep.valid
        crosscheck_state = "pass" if rep.valid else "fail"
        report["rwa_crosscheck"] = {
            "max_deviation": rep.max_deviation,
            "tolerance": rep.tolerance,
            "omega_over_nu": rep.omega_over_nu,
            "valid": rep.valid,
        }
        print(f"rwa cross-check over {args.t_cycles} cycles: max deviation "
              f"{rep.max_deviation:.4f} (tolerance {rep.tolerance}) -> {crosscheck_state}")

    base = os.path.join(output_dir(args.out), scenario.name)
    os.makedirs(base, exist_ok=True)
    with open(os.path.join(base, "validation.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not converged:
        return EXIT_CONVERGENCE
    if not rwa_ok:
        return EXIT_NUMERICAL
    return EXIT_OK


_COMMANDS = {
    "f1": _cmd_f1,
    "evolve": _cmd_evolve,
    "fockprep": _cmd_fockprep,
    "landscape": _cmd_landscape,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (StepTooLarge, PositivityLoss, TruncationTooSmall, NoSignChange, NoBarrier) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
