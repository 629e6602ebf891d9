"""
Run several experiment configs concurrently, one output directory per config.

  python scripts/run_batch.py resources/experiments/*.ini --out runs/batch --n-jobs 4

Each config runs in its own worker; a failing experiment does not stop the others.
Writes batch_summary.csv (config, command, status, output directory) under --out.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import pandas as pd
from dotenv import load_dotenv
from joblib import Parallel, delayed

# Add repo root
REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, REPO_ROOT)

from cli import EXIT_CONFIG, run_experiment  # noqa: E402
from config import load_config  # noqa: E402
from errors import ConfigError  # noqa: E402

logger = logging.getLogger("run_batch")


def run_one(path: str, out_root: str, seed: int | None) -> dict:
    name = os.path.splitext(os.path.basename(path))[0]
    out_dir = os.path.join(out_root, name)
    try:
        cfg = load_config(path, overrides={"out_dir": out_dir, "seed": None if seed is None else str(seed)})
    except ConfigError as exc:
        return {"config": path, "command": None, "status": EXIT_CONFIG, "out_dir": None, "error": str(exc)}
    logging.basicConfig(level=cfg.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    status = run_experiment(cfg)
    return {"config": path, "command": cfg.command, "status": status, "out_dir": out_dir, "error": None}


def main(argv=None) -> int:
    load_dotenv()
    parser = argparse.ArgumentParser(description="Run experiment configs concurrently")
    parser.add_argument("configs", nargs="+", help="INI config files")
    parser.add_argument("--out", default=os.path.join(REPO_ROOT, "runs", "batch"), help="root output directory")
    parser.add_argument("--n-jobs", type=int, default=int(os.environ.get("QPKAM_N_JOBS", "1")), help="concurrent experiments")
    parser.add_argument("--seed", type=int, help="seed passed to every experiment")
    args = parser.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    rows = Parallel(n_jobs=args.n_jobs)(delayed(run_one)(path, args.out, args.seed) for path in args.configs)
    summary = pd.DataFrame(rows)
    summary.to_csv(os.path.join(args.out, "batch_summary.csv"), index=False)
    failed = summary[summary["status"] != 0]
    print(f"{len(summary) - len(failed)}/{len(summary)} experiments succeeded; summary in {args.out}")
    return 0 if failed.empty else 1


if __name__ == "__main__":
    sys.exit(main())
