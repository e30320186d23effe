"""Run-configuration files: strict JSON schema, defaults, and builders.

A configuration is a JSON object; unknown keys are rejected anywhere in the
tree and all violations are collected into one error.  The reference unit
convention is CGS throughout.
"""

import csv
import json
import os

import numpy as np

from . import waveforms as wf
from .errors import ConfigError, ValidationError
from .materials import ShellMaterial

_SCHEMA = {
    "geometry": {"radius", "length"},
    "fluid": {"density", "viscosity"},
    "wall": {"youngs_modulus", "poisson_ratio", "thickness", "density",
             "viscous_modulus", "viscous_poisson"},
    "mesh": {"n_z", "n_r", "wall_elements"},
    "time": {"t_final", "n_steps"},
    "waveform": {"inlet", "outlet"},
    "initial_data": {"kind", "eta_amplitude", "v_amplitude"},
    "solver": {"fluid_tol", "structure_tol", "method"},
    "output": {"directory", "cadence", "fields", "ledger"},
}
_TOP_KEYS = set(_SCHEMA) | {"mode", "contact_threshold_factor",
                            "compatibility_tol", "debug_audit"}
_WAVE_KEYS = {
    "constant": {"kind", "value"},
    "sine": {"kind", "amplitude", "frequency", "phase"},
    "pulse": {"kind", "amplitude", "duration"},
    "csv": {"kind", "path"},
}
_MODES = {"viscoelastic", "elastic", "rigid"}

_DEFAULTS = {
    "mode": "viscoelastic",
    "contact_threshold_factor": 1e-6,
    "compatibility_tol": 1e-10,
    "debug_audit": False,
    "initial_data": {"kind": "zero"},
    "solver": {"fluid_tol": 1e-10, "structure_tol": 1e-12,
               "method": "direct"},
    "output": {"directory": "wallflow-out", "cadence": 10,
               "fields": "none", "ledger": "csv"},
}


def _require_number(problems, obj, section, key, positive=False,
                    nonnegative=False):
    if key not in obj:
        problems.append(f"{section}.{key} is required")
        return None
    val = obj[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        problems.append(f"{section}.{key} must be a number")
        return None
    if positive and not val > 0:
        problems.append(f"{section}.{key} must be positive")
    if nonnegative and val < 0:
        problems.append(f"{section}.{key} must be nonnegative")
    return val


def _check_unknown(problems, obj, allowed, section):
    for key in obj:
        if key not in allowed:
            problems.append(f"unknown key {section}.{key}")


def validate_config(raw):
    """Validate and normalize a raw configuration dict.

    Returns a new dict with defaults filled in; raises :class:`ConfigError`
    listing every violation at once.
    """
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_unknown(problems, raw, _TOP_KEYS, "<top>")

    cfg = {}
    for section in ("geometry", "fluid", "wall", "mesh", "time", "waveform"):
        sub = raw.get(section)
        if not isinstance(sub, dict):
            problems.append(f"section '{section}' is required")
            sub = {}
        else:
            _check_unknown(problems, sub, _SCHEMA[section], section)
        cfg[section] = dict(sub)

    _require_number(problems, cfg["geometry"], "geometry", "radius", positive=True)
    _require_number(problems, cfg["geometry"], "geometry", "length", positive=True)
    _require_number(problems, cfg["fluid"], "fluid", "density", positive=True)
    _require_number(problems, cfg["fluid"], "fluid", "viscosity", positive=True)

    wall = cfg["wall"]
    wall.setdefault("viscous_modulus", 0.0)
    wall.setdefault("viscous_poisson", 0.0)
    _require_number(problems, wall, "wall", "youngs_modulus", positive=True)
    _require_number(problems, wall, "wall", "thickness", positive=True)
    _require_number(problems, wall, "wall", "density", positive=True)
    _require_number(problems, wall, "wall", "viscous_modulus", nonnegative=True)
    for key in ("poisson_ratio", "viscous_poisson"):
        val = _require_number(problems, wall, "wall", key)
        if val is not None and not 0.0 <= val < 1.0:
            problems.append(f"wall.{key} = {val} must lie in [0, 1)")

    for key in ("n_z", "n_r", "wall_elements"):
        val = cfg["mesh"].get(key)
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            problems.append(f"mesh.{key} must be a positive integer")
    _require_number(problems, cfg["time"], "time", "t_final", positive=True)
    nsteps = cfg["time"].get("n_steps")
    if not isinstance(nsteps, int) or isinstance(nsteps, bool) or nsteps < 1:
        problems.append("time.n_steps must be a positive integer")

    mode = raw.get("mode", _DEFAULTS["mode"])
    if mode not in _MODES:
        problems.append(f"mode must be one of {sorted(_MODES)}, got {mode!r}")
    if mode == "elastic" and wall.get("viscous_modulus", 0.0) not in (0, 0.0):
        problems.append("mode 'elastic' contradicts wall.viscous_modulus > 0; "
                        "set it to 0 or use mode 'viscoelastic'")
    cfg["mode"] = mode

    for side in ("inlet", "outlet"):
        spec = cfg["waveform"].get(side)
        if not isinstance(spec, dict):
            problems.append(f"waveform.{side} is required")
            continue
        kind = spec.get("kind")
        if kind not in _WAVE_KEYS:
            problems.append(f"waveform.{side}.kind must be one of "
                            f"{sorted(_WAVE_KEYS)}, got {kind!r}")
            continue
        _check_unknown(problems, spec, _WAVE_KEYS[kind], f"waveform.{side}")
        if kind == "constant":
            _require_number(problems, spec, f"waveform.{side}", "value")
        elif kind == "sine":
            _require_number(problems, spec, f"waveform.{side}", "amplitude")
            _require_number(problems, spec, f"waveform.{side}", "frequency")
        elif kind == "pulse":
            _require_number(problems, spec, f"waveform.{side}", "amplitude")
            _require_number(problems, spec, f"waveform.{side}", "duration",
                            positive=True)
        elif kind == "csv" and not isinstance(spec.get("path"), str):
            problems.append(f"waveform.{side}.path must be a string")

    init = dict(raw.get("initial_data", _DEFAULTS["initial_data"]))
    _check_unknown(problems, init, _SCHEMA["initial_data"], "initial_data")
    if init.get("kind") not in ("zero", "bump"):
        problems.append("initial_data.kind must be 'zero' or 'bump'")
    if init.get("kind") == "bump":
        init.setdefault("eta_amplitude", 0.0)
        init.setdefault("v_amplitude", 0.0)
        _require_number(problems, init, "initial_data", "eta_amplitude")
        _require_number(problems, init, "initial_data", "v_amplitude")
    if mode == "rigid" and init.get("kind") != "zero":
        problems.append("rigid mode requires zero initial data")
    cfg["initial_data"] = init

    solver = {**_DEFAULTS["solver"], **raw.get("solver", {})}
    _check_unknown(problems, solver, _SCHEMA["solver"], "solver")
    _require_number(problems, solver, "solver", "fluid_tol", positive=True)
    _require_number(problems, solver, "solver", "structure_tol", positive=True)
    if solver.get("method") not in ("direct", "gmres"):
        problems.append("solver.method must be 'direct' or 'gmres'")
    cfg["solver"] = solver

    output = {**_DEFAULTS["output"], **raw.get("output", {})}
    _check_unknown(problems, output, _SCHEMA["output"], "output")
    if output["fields"] not in ("none", "csv", "vtk", "both"):
        problems.append("output.fields must be none|csv|vtk|both")
    if output["ledger"] not in ("none", "csv", "jsonl", "both"):
        problems.append("output.ledger must be none|csv|jsonl|both")
    if not isinstance(output["cadence"], int) or output["cadence"] < 1:
        problems.append("output.cadence must be a positive integer")
    cfg["output"] = output

    for key in ("contact_threshold_factor", "compatibility_tol"):
        val = raw.get(key, _DEFAULTS[key])
        if not isinstance(val, (int, float)) or val <= 0:
            problems.append(f"{key} must be a positive number")
        cfg[key] = val
    cfg["debug_audit"] = bool(raw.get("debug_audit", False))

    if not problems and cfg["mesh"].get("wall_elements") != cfg["mesh"].get("n_z"):
        problems.append("mesh.wall_elements must equal mesh.n_z so interface "
                        "nodes coincide")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path):
    """Parse and validate a configuration file, returning the config dict.

    The dict keeps the file's directory under the key ``_base_dir`` so
    relative waveform paths resolve against the file location.
    """
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    cfg = validate_config(raw)
    cfg["_base_dir"] = os.path.dirname(os.path.abspath(path))
    return cfg


def build_material(cfg):
    wall, geo = cfg["wall"], cfg["geometry"]
    return ShellMaterial(
        youngs_modulus=wall["youngs_modulus"],
        poisson_ratio=wall["poisson_ratio"],
        thickness=wall["thickness"],
        radius=geo["radius"],
        length=geo["length"],
        density=wall["density"],
        viscous_modulus=wall["viscous_modulus"],
        viscous_poisson=wall["viscous_poisson"],
    ).validate()


def _read_waveform_csv(path):
    times, values = [], []
    try:
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    t, v = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    # tolerate a single header line, nothing else
                    if not times:
                        continue
                    raise ValidationError(
                        f"{path}: malformed waveform row {row!r}") from None
                times.append(t)
                values.append(v)
    except OSError as exc:
        raise ValidationError(f"cannot read waveform csv {path}: {exc}") from exc
    if not times:
        raise ValidationError(f"waveform csv {path} holds no samples")
    return np.array(times), np.array(values)


def ingest_waveform(spec, base_dir="."):
    """Build a waveform object from its config spec."""
    kind = spec["kind"]
    if kind == "constant":
        return wf.Constant(spec["value"])
    if kind == "sine":
        return wf.Sine(spec["amplitude"], spec["frequency"],
                       spec.get("phase", 0.0))
    if kind == "pulse":
        return wf.HalfCosinePulse(spec["amplitude"], spec["duration"])
    if kind == "csv":
        path = spec["path"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return wf.Sampled(*_read_waveform_csv(path))
    raise ConfigError(f"unknown waveform kind {kind!r}")
