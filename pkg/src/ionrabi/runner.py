"""Scenario execution: deterministic CSV/JSON outputs, parameter sweeps, and
plot-data emission.

Determinism contract: all integrators are fixed-step, nothing uses RNG, and
values are serialized with 17 significant digits, so rerunning a scenario on
the same platform (same BLAS) reproduces the committed files byte for byte,
independent of the sweep parallelism.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from copy import deepcopy
from dataclasses import dataclass

import numpy as np

from . import __version__
from .dynamics import (
    LindbladSpec,
    coherent_required_n_max,
    coherent_state,
    evolve_lindblad,
    evolve_unitary,
    evolve_unitary_td,
    fock_state,
    thermal_state,
)
from .errors import ConvergenceFailure
from .fock import HilbertSpace, f1_diagonal, qubit_ops
from .models import TwoToneGenerator, build_hamiltonian, default_n_max
from .protocols import f1_landscape
from .scenario import Scenario, scenario_from_dict

__all__ = [
    "RunResult",
    "run",
    "sweep",
    "simulate_scenario",
    "check_truncation_convergence",
    "write_trajectory_csv",
    "write_landscape_csv",
    "emit_plotdata",
    "output_dir",
    "OUTDIR_ENV",
]

OUTDIR_ENV = "IONRABI_OUTDIR"
CONVERGENCE_TOL = 1e-6
_FMT = "%.17e"


def output_dir(explicit=None) -> str:
    """Resolve the output directory: explicit flag, else $IONRABI_OUTDIR, else ./runs."""
    return str(explicit or os.environ.get(OUTDIR_ENV) or "runs")


@dataclass
class RunResult:
    name: str
    csv_path: str
    metadata_path: str
    wall_time_s: float
    convergence: str  # 'skipped' | 'pass'


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _initial_state(scenario: Scenario, space: HilbertSpace):
    init = scenario.initial
    qubit = init["qubit"]
    if init["kind"] == "fock":
        return fock_state(space, init["n"], qubit)
    if init["kind"] == "coherent":
        return coherent_state(space, init["alpha"], qubit)
    return thermal_state(space, init["nbar"], qubit)


def _state_n_requirement(scenario: Scenario) -> tuple[int, float]:
    """(minimum n_max holding the initial state, coherent-equivalent radius)."""
    init = scenario.initial
    if init["kind"] == "fock":
        return max(init["n"], 1), math.sqrt(init["n"])
    if init["kind"] == "coherent":
        alpha = abs(init["alpha"])
        return coherent_required_n_max(alpha), alpha
    nbar = init["nbar"]
    if nbar == 0:
        return 1, 0.0
    ratio = nbar / (nbar + 1.0)
    return math.ceil(math.log(1e-10) / math.log(ratio)) + 1, math.sqrt(nbar)


def _barrier_index(eta: float, scan_to: int = 200) -> int | None:
    if eta <= 0:
        return None
    f1 = f1_diagonal(scan_to, eta)
    small = np.nonzero(np.abs(f1[1:]) < 1e-2)[0]
    return int(small[0] + 1) if small.size else None


def auto_n_max(scenario: Scenario) -> int:
    """Truncation default when the scenario does not pin one."""
    if scenario.truncation is not None:
        return scenario.truncation
    spec = scenario.model_spec()
    n_state, alpha = _state_n_requirement(scenario)
    n_barrier = None
    omega_R = None
    if spec.kind in ("NonlinearJC", "NonlinearAntiJC", "NonlinearQRM", "TwoTone"):
        n_barrier = _barrier_index(spec.eta)
    if spec.kind in ("QRM", "NonlinearQRM"):
        omega_R = spec.omega_R or None
    elif spec.kind == "TwoTone":
        omega_R = spec.simulated()[1] or None
    return max(n_state, default_n_max(g=spec.g, omega_R=omega_R,
                                      alpha=alpha, n_barrier=n_barrier))


def simulate_scenario(scenario: Scenario, n_max: int | None = None):
    """Run the scenario at the given (or auto) truncation; returns (Trajectory, n_max)."""
    if n_max is None:
        n_max = auto_n_max(scenario)
    spec = scenario.model_spec()
    space = HilbertSpace(n_max)
    state0 = _initial_state(scenario, space)
    g = spec.g
    cycle = 2.0 * math.pi / g
    times = np.linspace(0.0, scenario.times["t_end"] * cycle, scenario.times["n_points"])
    snap_idx = sorted({int(np.argmin(np.abs(times - ts * cycle)))
                       for ts in scenario.outputs["snapshot_times"]})

    if scenario.lindblad is not None:
        H = build_hamiltonian(spec, space)
        _, _, sm, _ = qubit_ops(space)
        lb = LindbladSpec([(scenario.lindblad["gamma_ratio"] * g, sm)])
        traj = evolve_lindblad(H, lb, state0.to_density(), times, g=g,
                               snapshot_indices=snap_idx)
    elif spec.kind == "TwoTone":
        gen = TwoToneGenerator(spec, space)
        traj = evolve_unitary_td(gen, state0, times, g=g, snapshot_indices=snap_idx)
    else:
        H = build_hamiltonian(spec, space)
        traj = evolve_unitary(H, state0, times, g=g, snapshot_indices=snap_idx)
    return traj, n_max


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_trajectory_csv(path, traj, observables):
    """One row per time point; t in cycles of 2*pi/g, 17 significant digits."""
    columns = [("t", traj.cycles)]
    for obs in observables:
        if obs == "phonons":
            for n in range(traj.phonons.shape[1]):
                columns.append((f"P_{n}", traj.phonons[:, n]))
        else:
            columns.append((obs, getattr(traj, obs)))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in columns])
        for i in range(len(traj.times)):
            writer.writerow([_FMT % col[i] for _, col in columns])


def _metadata(scenario: Scenario, n_max: int, traj) -> dict:
    return {
        "scenario": scenario.to_dict(),
        "n_max": n_max,
        "dim_total": 2 * (n_max + 1),
        "g_rad_per_s": scenario.model_spec().g,
        "time_unit": "cycles of 2*pi/g",
        "frequency_unit_config": "2*pi*kHz",
        "integrator": {k: v for k, v in traj.meta.items()},
        "package_version": __version__,
        "determinism": "fixed-step integrators, no RNG; byte-identical reruns "
                       "on the same platform and BLAS configuration",
    }


def write_metadata(path, scenario, n_max, traj):
    with open(path, "w") as fh:
        json.dump(_metadata(scenario, n_max, traj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(scenario: Scenario, out_dir=None, threads: int = 1,
        check_convergence: bool = False) -> RunResult:
    """Execute one scenario and write trajectory.csv + metadata.json.

    A single trajectory is inherently sequential; `threads` lets the optional
    truncation-convergence companion run execute alongside the base run.
    """
    base = os.path.join(output_dir(out_dir), scenario.name)
    os.makedirs(base, exist_ok=True)
    started = time.perf_counter()
    n_max = auto_n_max(scenario)
    if check_convergence and threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut = pool.submit(simulate_scenario, scenario, n_max + 20)
            traj, _ = simulate_scenario(scenario, n_max)
            bumped, _ = fut.result()
    else:
        traj, _ = simulate_scenario(scenario, n_max)
        bumped = simulate_scenario(scenario, n_max + 20)[0] if check_convergence else None
    verdict = "skipped"
    if bumped is not None:
        delta = _trajectory_delta(traj, bumped)
        if delta >= CONVERGENCE_TOL:
            raise ConvergenceFailure(
                f"{scenario.name}: observables changed by {delta:.3e} >= "
                f"{CONVERGENCE_TOL} when n_max {n_max} -> {n_max + 20}"
            )
        verdict = "pass"
    csv_path = os.path.join(base, "trajectory.csv")
    meta_path = os.path.join(base, "metadata.json")
    write_trajectory_csv(csv_path, traj, scenario.outputs["observables"])
    write_metadata(meta_path, scenario, n_max, traj)
    return RunResult(scenario.name, csv_path, meta_path,
                     time.perf_counter() - started, verdict)


def _trajectory_delta(a, b) -> float:
    """Largest change of any recorded observable between two truncations."""
    delta = max(
        float(np.abs(a.sigma_z - b.sigma_z).max()),
        float(np.abs(a.fidelity - b.fidelity).max()),
        float(np.abs(a.n_mean - b.n_mean).max()),
    )
    na, nb = a.phonons.shape[1], b.phonons.shape[1]
    common = min(na, nb)
    delta = max(delta, float(np.abs(a.phonons[:, :common] - b.phonons[:, :common]).max()))
    for traj, n in ((a, na), (b, nb)):
        if n > common:
            delta = max(delta, float(np.abs(traj.phonons[:, common:]).max()))
    return delta


def check_truncation_convergence(scenario: Scenario, bump: int = 20,
                                 tol: float = CONVERGENCE_TOL):
    """(converged, max_delta, n_max): rerun at n_max+bump and compare."""
    n_max = auto_n_max(scenario)
    traj, _ = simulate_scenario(scenario, n_max)
    bumped, _ = simulate_scenario(scenario, n_max + bump)
    delta = _trajectory_delta(traj, bumped)
    return delta < tol, delta, n_max


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _set_key_path(doc: dict, path: str, value):
    keys = path.split(".")
    node = doc
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise KeyError(f"axis key path {path!r} not found in scenario")
        node = node[key]
    node[keys[-1]] = value


def _point_tag(axes_values: dict) -> str:
    parts = [f"{path.replace('.', '_')}={value:.6g}" for path, value in axes_values.items()]
    return ",".join(parts)


def sweep(template: Scenario, axes: list, out_dir=None, threads: int = 1) -> list:
    """Run the template over the cartesian grid of (key_path, values) axes.

    Writes each point into its own directory plus an index.json mapping grid
    points to result paths; failed points are preserved in the index with
    their error.  Outputs are independent of `threads`.
    """
    grid = [{}]
    for path, values in axes:
        grid = [dict(point, **{path: v}) for point in grid for v in values]
    base = os.path.join(output_dir(out_dir), template.name)
    os.makedirs(base, exist_ok=True)

    def one(point):
        doc = deepcopy(template.to_dict())
        for path, value in point.items():
            _set_key_path(doc, path, float(value))
        tag = _point_tag(point)
        doc["name"] = f"{template.name}/{tag}"
        sc = scenario_from_dict(doc, source=f"sweep:{tag}")
        return run(sc, out_dir=out_dir)

    results = []
    index = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [(point, pool.submit(one, point)) for point in grid]
        for point, fut in futures:
            entry = {"point": point}
            try:
                res = fut.result()
                entry.update(status="ok", name=res.name, csv=res.csv_path,
                             metadata=res.metadata_path)
                results.append(res)
            except Exception as exc:  # preserved in the failure manifest
                entry.update(status="failed", error=f"{type(exc).__name__}: {exc}")
            index.append(entry)
    with open(os.path.join(base, "index.json"), "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results


# ---------------------------------------------------------------------------
# landscape + plot data
# ---------------------------------------------------------------------------

def write_landscape_csv(path, n_values, eta_values, matrix):
    """Rows n, columns eta: header 'n,<eta1>,<eta2>,...' then one row per n."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n"] + ["%.17g" % e for e in eta_values])
        for i, n in enumerate(n_values):
            writer.writerow([str(int(n))] + [_FMT % v for v in matrix[i]])


def run_landscape(n_values, eta_values, out_path, threads: int = 1):
    matrix = f1_landscape(n_values, eta_values, threads=threads)
    write_landscape_csv(out_path, n_values, eta_values, matrix)
    return matrix


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def emit_plotdata(csv_path, kind: str, out_path, columns=None):
    """Re-emit result CSVs as gnuplot-ready whitespace data files.

    kinds: 'timeseries' (t + scalar columns), 'bars' (final phonon
    distribution), 'heatmap' (landscape matrix, gnuplot nonuniform format).
    Original digit strings are passed through untouched.
    """
    header, rows = _read_csv(csv_path)
    if kind == "timeseries":
        wanted = columns or [c for c in header if c != "t" and not c.startswith("P_")]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValueError(f"{csv_path}: missing column(s) {missing}")
        idx = [header.index("t")] + [header.index(c) for c in wanted]
        with open(out_path, "w") as fh:
            fh.write("# t " + " ".join(wanted) + "\n")
            for row in rows:
                fh.write(" ".join(row[i] for i in idx) + "\n")
    elif kind == "bars":
        pcols = [(int(c[2:]), i) for i, c in enumerate(header) if c.startswith("P_")]
        if not pcols:
            raise ValueError(f"{csv_path}: no phonon columns P_n present")
        last = rows[-1]
        with open(out_path, "w") as fh:
            fh.write("# n P_n\n")
            for n, i in sorted(pcols):
                fh.write(f"{n} {last[i]}\n")
    elif kind == "heatmap":
        if header[0] != "n":
            raise ValueError(f"{csv_path}: not a landscape CSV (first column must be 'n')")
        with open(out_path, "w") as fh:
            fh.write(f"{len(header) - 1} " + " ".join(header[1:]) + "\n")
            for row in rows:
                fh.write(" ".join(row) + "\n")
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return out_path
