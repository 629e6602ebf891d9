"""
Command-line driver.

  python cli.py reduce --config resources/experiments/golden_reduce.ini --out runs/golden

Each run writes report.json (deterministic: same config, same bytes), the command's CSV
series, fourier-format series files where a command produces them, and run_info.json with
the timestamps. Failures still write report.json, with an error block, and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from arithmetics import check_rotation_condition, estimate_psi, kmax_within_budget, psi_preset
from config import COMMANDS, ExperimentConfig, load_config
from counterexample import build_counterexample, certify_nonsolvability, find_resonances
from errors import ConfigError, QpkamError
from fourier import NormContext, add_constant, dumps
from kam import reduce, report_to_dict, steps_frame, write_json
from mat2 import elliptic_rotation_number, op_norm
from presets import build_cocycle, resolve_frequency
from rotation import CocycleSpec, lyapunov_exponent, lyapunov_regularity, rotation_scan
from weights import classify_conditions, parse_weight, verify_subadditivity

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


@dataclass
class Outcome:
    """What a command hands back: the JSON result, CSV frames and series files."""

    result: dict
    frames: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    ok: bool = True
    error: dict | None = None


def _psi(cfg: ExperimentConfig, freq):
    return estimate_psi(freq, cfg.kmax, budget=cfg.lattice_budget, n_jobs=cfg.n_jobs)


# —— Commands ——

def cmd_psi_scan(cfg: ExperimentConfig) -> Outcome:
    freq = resolve_frequency(cfg.omega)
    psi = _psi(cfg, freq)
    result = {
        "omega": list(freq.omega),
        "kmax": psi.kmax,
        "psi_kmax": psi.value(psi.kmax),
        "witness_kmax": list(psi.witness(psi.kmax)),
        "tail_slope": psi.tail_slope,
    }
    return Outcome(result, frames={"psi.csv": psi.to_frame()})


def cmd_conditions(cfg: ExperimentConfig) -> Outcome:
    weight = parse_weight(cfg.weight)
    if cfg.psi_preset:
        psi = psi_preset(cfg.psi_preset)
        source = cfg.psi_preset
    else:
        psi = _psi(cfg, resolve_frequency(cfg.omega))
        source = f"enumerated:{cfg.kmax}"
    report = classify_conditions(weight, psi, cfg.v0, cfg.vmax)
    sub = verify_subadditivity(weight, min(cfg.vmax, 1e4), cfg.subadditivity_samples)

    rows = []
    for series in (report.lambda_br_integral_tail, report.br_equivalent_tail, report.russmann_ratio, report.quasi_analytic_tail):
        for j, value in enumerate(series.contributions):
            rows.append({
                "condition": series.name,
                "lo": series.edges[j],
                "hi": series.edges[j + 1],
                "contribution": value,
                "partial": series.partials[j],
                "tail": series.tails[j],
            })
    result = {"weight": weight.label, "psi": source, "conditions": report.to_dict(), "subadditivity": asdict(sub)}
    return Outcome(result, frames={"conditions.csv": pd.DataFrame(rows)})


def cmd_reduce(cfg: ExperimentConfig) -> Outcome:
    freq = resolve_frequency(cfg.omega)
    weight = parse_weight(cfg.weight)
    psi = psi_preset(cfg.psi_preset) if cfg.psi_preset else _psi(cfg, freq)
    cocycle = build_cocycle(cfg, freq, weight)
    report = reduce(
        cocycle,
        psi,
        weight,
        max_steps=cfg.max_steps,
        residual_tol=cfg.residual_tol,
        stop_tol=cfg.stop_tol,
        rotation_horizon=cfg.rotation_horizon or None,
    )
    error = None
    if not report.converged:
        error = report.error or {
            "type": "NotConverged",
            "message": "bound checks failed",
            "failed": [check.name for check in report.bound_checks if not check.ok],
        }
    return Outcome(
        report_to_dict(report),
        frames={"steps.csv": steps_frame(report)},
        series={"Y.series": report.Y},
        ok=report.converged,
        error=error,
    )


def cmd_rotation(cfg: ExperimentConfig) -> Outcome:
    freq = resolve_frequency(cfg.omega)
    cocycle = build_cocycle(cfg, freq)
    estimates = rotation_scan(cocycle, cfg.horizons, cfg.step, n_jobs=cfg.n_jobs)
    final = estimates[-1]
    # advisory check; Kmax capped by the lattice budget in dimension d
    kmax = min(cfg.kmax, kmax_within_budget(freq.d, cfg.lattice_budget))
    if kmax < cfg.kmax:
        logger.info("rotation condition checked up to K=%d (d=%d, budget %d)", kmax, freq.d, cfg.lattice_budget)
    psi = estimate_psi(freq, kmax, budget=cfg.lattice_budget, n_jobs=cfg.n_jobs)
    condition = check_rotation_condition(final.value, freq, psi, psi.kmax)
    result = {
        "estimates": [e.to_dict() for e in estimates],
        "final": final.to_dict(),
        "constant_part_rotation": elliptic_rotation_number(cocycle.A),
        "perturbation_sup_bound": cocycle.sup_bound - op_norm(cocycle.A),
        "psi_kmax": psi.kmax,
        "rotation_condition": asdict(condition),
    }
    frame = pd.DataFrame([e.to_dict() for e in estimates])
    return Outcome(result, frames={"rotation.csv": frame})


def _unit_traceless(rng: np.random.Generator) -> np.ndarray:
    a, b, c = rng.standard_normal(3)
    E = np.array([[a, b], [c, -a]])
    return E / op_norm(E)


def cmd_lyapunov(cfg: ExperimentConfig) -> Outcome:
    freq = resolve_frequency(cfg.omega)
    weight = parse_weight(cfg.weight)
    cocycle = build_cocycle(cfg, freq, weight)
    report = reduce(cocycle, _psi(cfg, freq), weight, max_steps=cfg.max_steps, residual_tol=cfg.residual_tol)
    Y = report.Y if report.converged else None
    if Y is None:
        logger.warning("cocycle not reduced; Lyapunov bounds are reported without the sharper Y-bound")

    base = lyapunov_exponent(freq, cocycle, cfg.lyapunov_horizon, cfg.step)
    rng = np.random.default_rng(cfg.seed)
    records = []
    for delta in cfg.deltas:
        moved = CocycleSpec(freq=freq, A=cocycle.A + delta * _unit_traceless(rng), F=cocycle.F, r=cocycle.r)
        record = lyapunov_regularity(
            cocycle, moved, cfg.lyapunov_horizon, cfg.step, Y=Y, seed=cfg.seed, base=base
        )
        records.append(record.to_dict())
    result = {
        "reduced": report.converged,
        "base": base,
        "records": records,
        "all_ok": all(r["ok"] for r in records),
    }
    return Outcome(result, frames={"lyapunov.csv": pd.DataFrame(records)})


def cmd_counterexample(cfg: ExperimentConfig) -> Outcome:
    freq = resolve_frequency(cfg.omega)
    weight = parse_weight(cfg.weight)
    psi = _psi(cfg, freq)
    chain = find_resonances(freq, weight, psi, cfg.count)
    u, cocycle = build_counterexample(chain, cfg.rho, cfg.eps)
    evidence = certify_nonsolvability(u, freq, chain, eps=cfg.eps, seed=cfg.seed)

    report = reduce(cocycle, psi, weight, max_steps=cfg.max_steps, residual_tol=cfg.residual_tol, rotation_horizon=None)
    evidence.kam_failure = report.error or {"converged": report.converged}
    if report.converged:
        logger.warning("the counterexample cocycle was reduced; the chain is too short to obstruct at this scale")

    deviation = NormContext(weight, chain.r).norm(add_constant(u, -cfg.rho * np.eye(2)))
    result = {
        "chain": chain.to_dict(),
        "evidence": evidence.to_dict(),
        "u_minus_rho_norm": deviation,
        "eps": cfg.eps,
    }
    return Outcome(result, frames={"coefficients.csv": pd.DataFrame(evidence.coefficients)}, series={"u.series": u})


COMMAND_TABLE = {
    "psi-scan": cmd_psi_scan,
    "conditions": cmd_conditions,
    "reduce": cmd_reduce,
    "rotation": cmd_rotation,
    "lyapunov": cmd_lyapunov,
    "counterexample": cmd_counterexample,
}


# —— Running ——

def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> int:
    """Run one resolved config; returns the exit status."""
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    logger.info("running %s → %s", cfg.command, out_dir)

    payload = {"command": cfg.command, "config": cfg.to_dict(), "status": "ok", "result": None, "error": None}
    try:
        outcome = COMMAND_TABLE[cfg.command](cfg)
    except QpkamError as exc:
        logger.error("%s failed: %s", cfg.command, exc)
        payload.update(status="error", error=exc.to_dict())
    else:
        payload["result"] = outcome.result
        if not outcome.ok:
            payload.update(status="error", error=outcome.error)
        for name, frame in outcome.frames.items():
            frame.to_csv(os.path.join(out_dir, name), index=False, float_format="%.17g")
        for name, series in outcome.series.items():
            with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
                fh.write(dumps(series))

    write_json(payload, os.path.join(out_dir, "report.json"))
    info = {
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "elapsed_seconds": time.perf_counter() - clock,
        "status": payload["status"],
    }
    with open(os.path.join(out_dir, "run_info.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2)
    return EXIT_OK if payload["status"] == "ok" else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Reducibility experiments for quasi-periodic sl(2,R) cocycles")
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="overrides [experiment] command")
    parser.add_argument("--config", help="experiment config (INI)")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--seed", type=int, help="seed for randomized checks")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    return parser


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    overrides = {
        "command": args.command,
        "out_dir": args.out,
        "seed": None if args.seed is None else str(args.seed),
        "log_level": args.log_level,
    }
    try:
        cfg = load_config(args.config, overrides=overrides)
    except ConfigError as exc:
        print(json.dumps({"error": exc.to_dict()}, indent=2), file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=cfg.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
