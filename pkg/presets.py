"""
Named presets and the config-to-object plumbing: frequencies from resources/frequencies.json,
perturbations from inline trig polynomials or series files, and the cocycle itself.
"""

from __future__ import annotations

import glob
import json
import logging
import os
from functools import lru_cache

import numpy as np

from arithmetics import Frequency
from config import ExperimentConfig
from counterexample import liouville_frequency
from errors import ConfigError, InputError
from fourier import FourierMatrixSeries, from_modes, load, scale, weighted_norm
from rotation import CocycleSpec
from weights import WeightSpec, parse_weight

logger = logging.getLogger(__name__)

RESOURCES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "resources")
EXPERIMENTS_DIR = os.path.join(RESOURCES_DIR, "experiments")


@lru_cache(maxsize=1)
def load_frequency_presets() -> dict:
    """{name: {"omega": [...], "description": ...}} from resources/frequencies.json."""
    path = os.path.join(RESOURCES_DIR, "frequencies.json")
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def resolve_frequency(text: str) -> Frequency:
    """Preset name, liouville:<a1,a2,...> or explicit components separated by commas/spaces."""
    text = text.strip()
    presets = load_frequency_presets()
    if text in presets:
        return Frequency(tuple(float(x) for x in presets[text]["omega"]), name=text)
    if text.startswith("liouville:"):
        quotients = text.split(":", 1)[1].replace(",", " ").split()
        try:
            return liouville_frequency([int(a) for a in quotients])
        except ValueError as exc:
            raise ConfigError(f"bad partial quotients in '{text}'", key="frequency.omega") from exc
    try:
        components = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(
            f"frequency must be one of {sorted(presets)}, liouville:<quotients> or numbers, got '{text}'",
            key="frequency.omega",
        ) from exc
    return Frequency(components)


def parse_perturbation(text: str, d: int) -> FourierMatrixSeries:
    """
    Terms `k1 .. kd : C11 C12 C21 C22 [| S11 S12 S21 S22]` separated by ';', each meaning
    C·cos(2πk·θ) + S·sin(2πk·θ). k = 0 adds the constant C.
    """
    modes: dict[tuple[int, ...], np.ndarray] = {}
    for term in filter(None, (t.strip() for t in text.split(";"))):
        index, sep, body = term.partition(":")
        if not sep:
            raise InputError(f"perturbation term '{term}' has no ':'")
        try:
            k = tuple(int(c) for c in index.replace(",", " ").split())
            cos_part, _, sin_part = body.partition("|")
            C = np.array([float(x) for x in cos_part.replace(",", " ").split()])
            S = np.array([float(x) for x in sin_part.replace(",", " ").split()]) if sin_part.strip() else np.zeros(4)
        except ValueError as exc:
            raise InputError(f"cannot read perturbation term '{term}'") from exc
        if len(k) != d or C.size != 4 or S.size != 4:
            raise InputError(f"perturbation term '{term}' needs {d} indices and 4 entries per matrix")
        C, S = C.reshape(2, 2), S.reshape(2, 2)
        if not any(k):
            coefficient = C.astype(complex)
        else:
            if not _leads_positive(k):
                k, S = tuple(-c for c in k), -S
            coefficient = 0.5 * (C - 1j * S)
        modes[k] = modes.get(k, np.zeros((2, 2), dtype=complex)) + coefficient
    return from_modes(d, modes, real_symmetric=True)


def _leads_positive(k: tuple[int, ...]) -> bool:
    return next(c for c in k if c) > 0


def build_cocycle(cfg: ExperimentConfig, freq: Frequency, weight: WeightSpec | None = None) -> CocycleSpec:
    """A from cfg.matrix, F from the file or the inline terms, rescaled to perturbation_norm if set."""
    A = np.asarray(cfg.matrix, dtype=float).reshape(2, 2)
    if cfg.perturbation_file:
        F = load(cfg.perturbation_file)
        if F.d != freq.d:
            raise InputError(f"{cfg.perturbation_file} has d={F.d}, frequency has d={freq.d}")
    elif cfg.perturbation:
        F = parse_perturbation(cfg.perturbation, freq.d)
    else:
        F = FourierMatrixSeries.zero(freq.d)

    if cfg.perturbation_norm is not None and len(F):
        weight = weight or parse_weight(cfg.weight)
        current = weighted_norm(F, weight, cfg.radius)
        F = scale(F, cfg.perturbation_norm / current)
        logger.info("perturbation rescaled from |F|_r=%.6g to %.6g", current, cfg.perturbation_norm)
    return CocycleSpec(freq=freq, A=A, F=F, r=cfg.radius)


def experiment_files() -> list[str]:
    """Bundled example configs."""
    return sorted(glob.glob(os.path.join(EXPERIMENTS_DIR, "*.ini")))
