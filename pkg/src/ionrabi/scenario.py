"""Scenario files: a strict, versioned YAML schema describing one simulation.

Conventions (matching the trapped-ion literature):
  - every frequency-like field (g, Omega, nu, delta_r, delta_b, omega_R,
    omega0_R) is given in units of 2*pi*kHz, i.e. the file value 11.31 means
    an angular frequency 2*pi * 11.31 kHz;
  - phases are radians, eta and alpha are dimensionless;
  - times.t_end and outputs.snapshot_times are in cycles of 2*pi/g.

Unknown keys are rejected everywhere (strict mode) and errors carry the
offending key path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import yaml

from .errors import SchemaError
from .models import MODEL_KINDS, ModelSpec

__all__ = ["Scenario", "parse_scenario", "scenario_from_dict", "KHZ", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1
KHZ = 2.0 * math.pi * 1e3  # config value 1.0 == 2*pi kHz, in rad/s

OBSERVABLES = ("sigma_z", "fidelity", "n_mean", "phonons")

_MODEL_FIELDS = {
    "JC": ({"kind", "g"}, {"kind", "g"}),
    "AntiJC": ({"kind", "g"}, {"kind", "g"}),
    "NonlinearJC": ({"kind", "g", "eta"}, {"kind", "g", "eta"}),
    "NonlinearAntiJC": ({"kind", "g", "eta"}, {"kind", "g", "eta"}),
    "QRM": ({"kind", "g", "omega_R", "omega0_R"}, {"kind", "g", "omega_R", "omega0_R"}),
    "NonlinearQRM": ({"kind", "g", "eta", "omega_R", "omega0_R"},
                     {"kind", "g", "eta", "omega_R", "omega0_R"}),
    "TwoTone": ({"kind", "eta", "Omega", "nu", "delta_r", "delta_b"},
                {"kind", "eta", "Omega", "nu", "delta_r", "delta_b", "g", "phi_r", "phi_b"}),
}

_FREQ_FIELDS = ("g", "Omega", "nu", "delta_r", "delta_b", "omega_R", "omega0_R")


def _fail(path: str, message: str):
    raise SchemaError(f"{path}: {message}")


def _need_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _need_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _need_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    return value


def _check_keys(section: dict, allowed: set, required: set, path: str):
    unknown = set(section) - allowed
    if unknown:
        _fail(path, f"unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}")
    missing = required - set(section)
    if missing:
        _fail(path, f"missing required key(s) {sorted(missing)}")


@dataclass
class Scenario:
    """Validated scenario, holding config-unit values (2*pi*kHz, cycles)."""

    name: str
    model: dict
    initial: dict
    times: dict
    outputs: dict = field(default_factory=lambda: {
        "observables": list(OBSERVABLES), "snapshot_times": []})
    lindblad: dict | None = None
    truncation: int | None = None
    schema_version: int = SCHEMA_VERSION

    def model_spec(self) -> ModelSpec:
        """ModelSpec with frequencies converted from 2*pi*kHz to rad/s."""
        kw = {}
        for key, value in self.model.items():
            if key in _FREQ_FIELDS:
                kw[key] = value * KHZ
            else:
                kw[key] = value
        return ModelSpec(**kw)

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "name": self.name,
            "model": dict(self.model),
            "initial": dict(self.initial),
            "times": dict(self.times),
            "outputs": {"observables": list(self.outputs["observables"]),
                        "snapshot_times": list(self.outputs["snapshot_times"])},
        }
        if self.lindblad is not None:
            out["lindblad"] = dict(self.lindblad)
        if self.truncation is not None:
            out["truncation"] = self.truncation
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_yaml())


def scenario_from_dict(doc: dict, source: str = "<dict>") -> Scenario:
    doc = _need_mapping(doc, source)
    _check_keys(doc, {"schema_version", "name", "model", "initial", "times",
                      "outputs", "lindblad", "truncation"},
                {"schema_version", "name", "model", "initial", "times"}, source)

    version = _need_int(doc["schema_version"], f"{source}.schema_version")
    if version != SCHEMA_VERSION:
        _fail(f"{source}.schema_version",
              f"unsupported version {version}; this build reads version {SCHEMA_VERSION}")

    if not isinstance(doc["name"], str) or not doc["name"]:
        _fail(f"{source}.name", "expected a non-empty string")

    model = _need_mapping(doc["model"], f"{source}.model")
    kind = model.get("kind")
    if kind not in MODEL_KINDS:
        _fail(f"{source}.model.kind", f"expected one of {MODEL_KINDS}, got {kind!r}")
    required, allowed = _MODEL_FIELDS[kind]
    _check_keys(model, allowed, required, f"{source}.model")
    clean_model = {"kind": kind}
    for key in sorted(set(model) - {"kind"}):
        clean_model[key] = _need_number(model[key], f"{source}.model.{key}")

    initial = _need_mapping(doc["initial"], f"{source}.initial")
    ikind = initial.get("kind")
    if ikind not in ("fock", "coherent", "thermal"):
        _fail(f"{source}.initial.kind",
              f"expected fock|coherent|thermal, got {ikind!r}")
    param = {"fock": "n", "coherent": "alpha", "thermal": "nbar"}[ikind]
    _check_keys(initial, {"kind", param, "qubit"}, {"kind", param}, f"{source}.initial")
    clean_initial = {"kind": ikind}
    if ikind == "fock":
        n = _need_int(initial["n"], f"{source}.initial.n")
        if n < 0:
            _fail(f"{source}.initial.n", "must be >= 0")
        clean_initial["n"] = n
    elif ikind == "coherent":
        clean_initial["alpha"] = _need_number(initial["alpha"], f"{source}.initial.alpha")
    else:
        nbar = _need_number(initial["nbar"], f"{source}.initial.nbar")
        if nbar < 0:
            _fail(f"{source}.initial.nbar", "must be >= 0")
        clean_initial["nbar"] = nbar
    qubit = initial.get("qubit", "down")
    if qubit not in ("down", "up"):
        _fail(f"{source}.initial.qubit", f"expected down|up, got {qubit!r}")
    clean_initial["qubit"] = qubit

    times = _need_mapping(doc["times"], f"{source}.times")
    _check_keys(times, {"t_end", "n_points"}, {"t_end", "n_points"}, f"{source}.times")
    t_end = _need_number(times["t_end"], f"{source}.times.t_end")
    if t_end <= 0:
        _fail(f"{source}.times.t_end", "must be > 0")
    n_points = _need_int(times["n_points"], f"{source}.times.n_points")
    if n_points < 2:
        _fail(f"{source}.times.n_points", "must be >= 2")
    clean_times = {"t_end": t_end, "n_points": n_points}

    outputs = doc.get("outputs", {})
    outputs = _need_mapping(outputs, f"{source}.outputs") if outputs else {}
    _check_keys(outputs, {"observables", "snapshot_times"}, set(), f"{source}.outputs")
    observables = outputs.get("observables", list(OBSERVABLES))
    if not isinstance(observables, list) or not observables:
        _fail(f"{source}.outputs.observables", "expected a non-empty list")
    for obs in observables:
        if obs not in OBSERVABLES:
            _fail(f"{source}.outputs.observables",
                  f"unknown observable {obs!r}; allowed: {OBSERVABLES}")
    snapshot_times = outputs.get("snapshot_times", [])
    if not isinstance(snapshot_times, list):
        _fail(f"{source}.outputs.snapshot_times", "expected a list of times (cycles)")
    snapshot_times = [_need_number(v, f"{source}.outputs.snapshot_times[{i}]")
                      for i, v in enumerate(snapshot_times)]
    clean_outputs = {"observables": list(observables), "snapshot_times": snapshot_times}

    lindblad = doc.get("lindblad")
    clean_lindblad = None
    if lindblad is not None:
        lindblad = _need_mapping(lindblad, f"{source}.lindblad")
        _check_keys(lindblad, {"gamma_ratio"}, {"gamma_ratio"}, f"{source}.lindblad")
        ratio = _need_number(lindblad["gamma_ratio"], f"{source}.lindblad.gamma_ratio")
        if ratio < 0:
            _fail(f"{source}.lindblad.gamma_ratio", "must be >= 0")
        if kind == "TwoTone":
            _fail(f"{source}.lindblad", "dissipative evolution of the time-dependent "
                  "two-tone drive is not supported")
        clean_lindblad = {"gamma_ratio": ratio}

    truncation = doc.get("truncation")
    if truncation is not None:
        truncation = _need_int(truncation, f"{source}.truncation")
        if truncation < 1:
            _fail(f"{source}.truncation", "must be >= 1")

    scenario = Scenario(
        name=doc["name"],
        model=clean_model,
        initial=clean_initial,
        times=clean_times,
        outputs=clean_outputs,
        lindblad=clean_lindblad,
        truncation=truncation,
        schema_version=version,
    )
    scenario.model_spec()  # surface model-level validation errors at parse time
    return scenario


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc}") from exc
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: not valid YAML: {exc}") from exc
    if doc is None:
        raise SchemaError(f"{path}: empty scenario file")
    try:
        return scenario_from_dict(doc, source=str(path))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{path}: {exc}") from exc
