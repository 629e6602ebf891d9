"""
JSON and CSV shapes of a reducibility report.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pandas as pd

from fourier import dumps

from .driver import ReducibilityReport

# Per-step columns written to steps.csv, in order
STEP_COLUMNS = [
    "nu",
    "alpha",
    "alpha_next",
    "eps",
    "N",
    "psi_N",
    "sigma",
    "r",
    "modes",
    "F_norm",
    "G_norm",
    "X_norm",
    "X_bound",
    "unsolved_norm",
    "R_norm",
    "R_bound",
    "F_next_norm",
    "eps_next",
    "Y_minus_I",
    "Y_bound",
    "trace_next",
    "contraction",
]


def _matrix(a) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.real(np.asarray(a))]


def report_to_dict(report: ReducibilityReport) -> dict:
    return {
        "converged": report.converged,
        "alpha0": report.alpha0,
        "eps0": report.eps0,
        "P0": _matrix(report.P0),
        "A_inf": _matrix(report.A_inf),
        "residual_norm": report.residual_norm,
        "residual": report.residual.to_dict() if report.residual else None,
        "bound_checks": [check.to_dict() for check in report.bound_checks],
        "schedule": report.schedule.to_dict() if report.schedule else None,
        "steps": report.steps,
        "rotation": report.rotation,
        "Y": {"modes": len(report.Y), "max_order": report.Y.max_order, "tail_bound": report.Y.tail_bound},
        "error": report.error,
    }


def steps_frame(report: ReducibilityReport) -> pd.DataFrame:
    rows = [{name: step.get(name) for name in STEP_COLUMNS} for step in report.steps]
    frame = pd.DataFrame(rows, columns=STEP_COLUMNS)
    frame["guard_ok"] = [step.get("guard", {}).get("ok") for step in report.steps]
    return frame


def write_report(report: ReducibilityReport, out_dir: str, config: dict | None = None) -> dict:
    """report.json, steps.csv and Y.series under out_dir; returns the JSON payload."""
    os.makedirs(out_dir, exist_ok=True)
    payload = {"command": "reduce", "config": config or {}, "result": report_to_dict(report)}
    write_json(payload, os.path.join(out_dir, "report.json"))
    steps_frame(report).to_csv(os.path.join(out_dir, "steps.csv"), index=False, float_format="%.17g")
    with open(os.path.join(out_dir, "Y.series"), "w", encoding="utf-8") as fh:
        fh.write(dumps(report.Y))
    return payload


def _default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(payload: dict, path: str) -> None:
    """Deterministic JSON: sorted keys, fixed indent; non-finite floats written as null."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_finite(payload), fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")


def _finite(obj):
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj
