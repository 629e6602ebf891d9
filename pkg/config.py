"""
Experiment configuration.

Configs are INI files with the sections [experiment], [frequency], [weight], [psi],
[cocycle], [numerics] and [output]. Every key has a default in DEFAULTS; anything not
listed there is rejected with the line it appears on.

Precedence, lowest first: DEFAULTS, environment (QPKAM_*, optionally from .env),
the config file, command-line flags.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import asdict, dataclass

from errors import ConfigError

COMMANDS = ("psi-scan", "conditions", "reduce", "rotation", "lyapunov", "counterexample")

# section -> key -> (default, meaning)
DEFAULTS: dict[str, dict[str, tuple[str, str]]] = {
    "experiment": {
        "command": ("reduce", "one of " + ", ".join(COMMANDS)),
        "name": ("", "free label copied into the report"),
        "seed": ("0", "seed for randomized checks (grids, perturbations)"),
    },
    "frequency": {
        "omega": ("golden", "preset name, explicit components '1, 1.618', or liouville:a1,a2,..."),
    },
    "weight": {
        "spec": ("analytic", "analytic | gevrey:<alpha> | table:<path>"),
    },
    "psi": {
        "kmax": ("1000", "enumeration bound for Ψ"),
        "preset": ("", "exp-power:<beta> or power:<tau>; conditions command only"),
    },
    "cocycle": {
        "matrix": ("0 1 -1 0", "constant part A, row-major"),
        "perturbation": ("", "inline terms 'k1 k2 : C11 C12 C21 C22 [| S11 S12 S21 S22]' separated by ';'"),
        "perturbation_file": ("", "fourier-matrix-series file; replaces the inline perturbation"),
        "radius": ("0.2", "radius r of the weighted norm"),
        "perturbation_norm": ("", "rescale F to this |F|_r; empty keeps F as given"),
        "rho": ("0.7", "mean rotation of the counterexample"),
        "eps": ("1e-3", "size |u - ρ|_r of the counterexample"),
        "count": ("3", "number of resonant modes in the counterexample"),
    },
    "numerics": {
        "max_steps": ("6", "KAM step budget"),
        "residual_tol": ("1e-6", "bound on the final conjugacy residual"),
        "stop_tol": ("0.0", "stop once |F_ν| <= stop_tol·ε₀"),
        "rotation_horizon": ("200", "horizon of the advisory ρ estimate in reduce; 0 disables it"),
        "horizons": ("1000 2000 5000 10000", "horizons of the rotation command"),
        "step": ("0.01", "RK4 step"),
        "lyapunov_horizon": ("10000", "horizon of each Lyapunov exponent"),
        "deltas": ("0.001 0.005 0.01", "sup-distances of the Lyapunov perturbations"),
        "v0": ("1", "lower end of the condition integrals"),
        "vmax": ("1e6", "upper end of the condition integrals"),
        "subadditivity_samples": ("2000", "pairs sampled by the subadditivity check"),
        "n_jobs": ("1", "joblib workers"),
        "lattice_budget": ("50000000", "largest lattice enumeration allowed"),
    },
    "output": {
        "dir": ("runs", "output directory"),
        "log_level": ("INFO", "logging level"),
    },
}

ENVIRONMENT = {
    "QPKAM_LOG_LEVEL": ("output", "log_level"),
    "QPKAM_N_JOBS": ("numerics", "n_jobs"),
    "QPKAM_LATTICE_BUDGET": ("numerics", "lattice_budget"),
    "QPKAM_OUT_DIR": ("output", "dir"),
}

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    name: str
    seed: int
    omega: str
    weight: str
    kmax: int
    psi_preset: str
    matrix: tuple[float, ...]
    perturbation: str
    perturbation_file: str
    radius: float
    perturbation_norm: float | None
    rho: float
    eps: float
    count: int
    max_steps: int
    residual_tol: float
    stop_tol: float
    rotation_horizon: float
    horizons: tuple[float, ...]
    step: float
    lyapunov_horizon: float
    deltas: tuple[float, ...]
    v0: float
    vmax: float
    subadditivity_samples: int
    n_jobs: int
    lattice_budget: int
    out_dir: str
    log_level: str
    source: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1).strip()
            lines[(section, "")] = number
            continue
        key = _KEY_RE.match(line)
        if key and section is not None:
            lines.setdefault((section, key.group(1).strip().lower()), number)
    return lines


def read_config_text(text: str, source: str = "<string>") -> dict[str, dict[str, tuple[str, int | None]]]:
    """Raw {section: {key: (value, line)}} after checking sections and keys against DEFAULTS."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(f"{source}: {exc}", line=line) from exc

    lines = _key_lines(text)
    raw: dict[str, dict[str, tuple[str, int | None]]] = {}
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"{source}: unknown section [{section}]", line=lines.get((section, "")), key=section)
        for key, value in parser.items(section):
            if key not in DEFAULTS[section]:
                raise ConfigError(
                    f"{source}: unknown key '{key}' in [{section}]", line=lines.get((section, key)), key=f"{section}.{key}"
                )
            raw.setdefault(section, {})[key] = (value.strip(), lines.get((section, key)))
    return raw


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _optional_float(text: str) -> float | None:
    return float(text) if text.strip() else None


# field -> (section, key, converter)
_FIELDS = {
    "command": ("experiment", "command", str),
    "name": ("experiment", "name", str),
    "seed": ("experiment", "seed", int),
    "omega": ("frequency", "omega", str),
    "weight": ("weight", "spec", str),
    "kmax": ("psi", "kmax", int),
    "psi_preset": ("psi", "preset", str),
    "matrix": ("cocycle", "matrix", _floats),
    "perturbation": ("cocycle", "perturbation", str),
    "perturbation_file": ("cocycle", "perturbation_file", str),
    "radius": ("cocycle", "radius", float),
    "perturbation_norm": ("cocycle", "perturbation_norm", _optional_float),
    "rho": ("cocycle", "rho", float),
    "eps": ("cocycle", "eps", float),
    "count": ("cocycle", "count", int),
    "max_steps": ("numerics", "max_steps", int),
    "residual_tol": ("numerics", "residual_tol", float),
    "stop_tol": ("numerics", "stop_tol", float),
    "rotation_horizon": ("numerics", "rotation_horizon", float),
    "horizons": ("numerics", "horizons", _floats),
    "step": ("numerics", "step", float),
    "lyapunov_horizon": ("numerics", "lyapunov_horizon", float),
    "deltas": ("numerics", "deltas", _floats),
    "v0": ("numerics", "v0", float),
    "vmax": ("numerics", "vmax", float),
    "subadditivity_samples": ("numerics", "subadditivity_samples", int),
    "n_jobs": ("numerics", "n_jobs", int),
    "lattice_budget": ("numerics", "lattice_budget", int),
    "out_dir": ("output", "dir", str),
    "log_level": ("output", "log_level", str),
}


def _validate(values: dict, where: dict) -> None:
    def fail(field_name: str, message: str):
        section, key, _ = _FIELDS[field_name]
        raise ConfigError(message, line=where.get(field_name), key=f"{section}.{key}")

    if values["command"] not in COMMANDS:
        fail("command", f"unknown command '{values['command']}'")
    if len(values["matrix"]) != 4:
        fail("matrix", "matrix needs 4 entries")
    for name in ("kmax", "count", "max_steps", "subadditivity_samples", "n_jobs", "lattice_budget"):
        if values[name] < 1 and not (name == "n_jobs" and values[name] == -1):
            fail(name, f"{name} must be >= 1")
    for name in ("radius", "step", "residual_tol", "lyapunov_horizon"):
        if not values[name] > 0:
            fail(name, f"{name} must be positive")
    for name in ("eps", "stop_tol", "rotation_horizon"):
        if values[name] < 0:
            fail(name, f"{name} must be >= 0")
    if not 1.0 <= values["v0"] < values["vmax"]:
        fail("vmax", "need 1 <= v0 < vmax")
    if any(t <= 0 for t in values["horizons"]):
        fail("horizons", "horizons must be positive")
    if values["log_level"].upper() not in LOG_LEVELS:
        fail("log_level", f"log level must be one of {', '.join(LOG_LEVELS)}")


def load_config(
    path: str | None = None,
    overrides: dict[str, str] | None = None,
    environ=None,
    text: str | None = None,
) -> ExperimentConfig:
    """
    Resolve a config. `overrides` maps field names (command, seed, out_dir, log_level, ...)
    to strings and wins over everything else.
    """
    environ = os.environ if environ is None else environ
    resolved = {section: {key: (default, None) for key, (default, _) in keys.items()} for section, keys in DEFAULTS.items()}

    for variable, (section, key) in ENVIRONMENT.items():
        if environ.get(variable):
            resolved[section][key] = (environ[variable], None)

    if path is not None and text is None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    if text is not None:
        for section, items in read_config_text(text, source=path or "<string>").items():
            resolved[section].update(items)

    for field_name, value in (overrides or {}).items():
        if value is None:
            continue
        if field_name not in _FIELDS:
            raise ConfigError(f"unknown override '{field_name}'", key=field_name)
        section, key, _ = _FIELDS[field_name]
        resolved[section][key] = (str(value), None)

    values, where = {}, {}
    for field_name, (section, key, convert) in _FIELDS.items():
        raw, line = resolved[section][key]
        where[field_name] = line
        try:
            values[field_name] = convert(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value '{raw}' for {section}.{key}", line=line, key=f"{section}.{key}") from exc
    values["log_level"] = values["log_level"].upper()
    _validate(values, where)
    return ExperimentConfig(**values, source=path)
