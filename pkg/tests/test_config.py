"""
Tests for config and presets: key checking with line numbers, precedence, validation,
frequency presets, the inline perturbation grammar and the bundled experiments.
"""

import math

import numpy as np
import pytest

from config import load_config, read_config_text
from errors import ConfigError, InputError
from fourier import evaluate, weighted_norm
from presets import build_cocycle, experiment_files, parse_perturbation, resolve_frequency
from weights import WeightSpec


def test_defaults_resolve():
    """An empty config is the golden reduction with the documented defaults."""
    cfg = load_config(text="", environ={})
    assert cfg.command == "reduce"
    assert cfg.omega == "golden"
    assert cfg.kmax == 1000
    assert cfg.matrix == (0.0, 1.0, -1.0, 0.0)
    assert cfg.max_steps == 6
    assert cfg.perturbation_norm is None
    assert cfg.horizons == (1000.0, 2000.0, 5000.0, 10000.0)


def test_unknown_key_reports_line_and_key():
    """Keys outside the table are rejected where they appear."""
    text = "[experiment]\ncommand = reduce\n\n[cocycle]\nradius = 0.2\ncolour = red\n"
    with pytest.raises(ConfigError) as exc:
        read_config_text(text)
    assert exc.value.line == 6
    assert exc.value.key == "cocycle.colour"


def test_unknown_section_is_rejected():
    """Only the known sections are allowed."""
    with pytest.raises(ConfigError) as exc:
        load_config(text="[output]\ndir = x\n[extras]\nthing = 1\n", environ={})
    assert exc.value.line == 3


def test_precedence():
    """defaults < environment < file < overrides."""
    environ = {"QPKAM_LOG_LEVEL": "ERROR", "QPKAM_N_JOBS": "2"}
    cfg = load_config(text="[output]\nlog_level = debug\n", environ=environ, overrides={"seed": "5"})
    assert cfg.log_level == "DEBUG"
    assert cfg.n_jobs == 2
    assert cfg.seed == 5
    cfg = load_config(text="[output]\nlog_level = debug\n", environ=environ, overrides={"log_level": "warning"})
    assert cfg.log_level == "WARNING"


def test_bad_values_point_at_their_line():
    """Conversion and validation errors carry section.key and the line."""
    with pytest.raises(ConfigError) as exc:
        load_config(text="[psi]\nkmax = many\n", environ={})
    assert (exc.value.key, exc.value.line) == ("psi.kmax", 2)
    with pytest.raises(ConfigError) as exc:
        load_config(text="[cocycle]\n\nmatrix = 1 2 3\n", environ={})
    assert (exc.value.key, exc.value.line) == ("cocycle.matrix", 3)
    with pytest.raises(ConfigError):
        load_config(text="[experiment]\ncommand = solve\n", environ={})
    with pytest.raises(ConfigError):
        load_config(text="[numerics]\nv0 = 10\nvmax = 5\n", environ={})
    with pytest.raises(ConfigError):
        load_config(overrides={"colour": "red"}, environ={})


def test_missing_file_is_a_config_error(tmp_path):
    """Unreadable paths fail as configuration errors."""
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"), environ={})


def test_bundled_experiments_load():
    """Every shipped experiment resolves."""
    paths = experiment_files()
    assert len(paths) >= 6
    commands = {load_config(path, environ={}).command for path in paths}
    assert {"psi-scan", "conditions", "reduce", "rotation", "lyapunov", "counterexample"} <= commands


def test_resolve_frequency():
    """Preset names, Liouville quotients and explicit components."""
    assert resolve_frequency("golden").omega == (1.0, (1 + math.sqrt(5)) / 2)
    assert resolve_frequency("spiral-3d").d == 3
    assert resolve_frequency("liouville:7,20,100000000").omega[1] == pytest.approx(1 / 7.05, abs=1e-6)
    assert resolve_frequency("1, 1.5").omega == (1.0, 1.5)
    with pytest.raises(ConfigError):
        resolve_frequency("platinum")
    with pytest.raises(ConfigError):
        resolve_frequency("liouville:7,x")


def test_inline_perturbation_is_cos_plus_sin():
    """'k : C | S' means C cos(2πk·θ) + S sin(2πk·θ)."""
    F = parse_perturbation("1 0 : 0.3 0.5 0.2 -0.3 ; 0 1 : 0 0 0 0 | 0.2 0 0 -0.2", 2)
    theta = np.array([0.1, 0.3])
    C = np.array([[0.3, 0.5], [0.2, -0.3]])
    S = np.array([[0.2, 0.0], [0.0, -0.2]])
    expected = C * math.cos(2 * math.pi * 0.1) + S * math.sin(2 * math.pi * 0.3)
    assert np.allclose(evaluate(F, theta), expected)


def test_inline_perturbation_flips_negative_leading_index():
    """−k with (C, S) is the same term as k with (C, −S)."""
    a = parse_perturbation("-1 2 : 0.1 0 0 -0.1 | 0 0.2 0.3 0", 2)
    b = parse_perturbation("1 -2 : 0.1 0 0 -0.1 | 0 -0.2 -0.3 0", 2)
    assert np.allclose(a.values, b.values)
    assert np.array_equal(a.keys, b.keys)


def test_inline_perturbation_errors():
    """Terms need ':' and exactly d indices and four entries."""
    for text in ("1 0 0.3 0.5 0.2 -0.3", "1 : 1 2 3 4", "1 0 : 1 2 3", "1 0 : a b c d"):
        with pytest.raises(InputError):
            parse_perturbation(text, 2)


def test_build_cocycle_rescales_perturbation():
    """perturbation_norm fixes |F|_r."""
    text = "[cocycle]\nperturbation = 1 0 : 0.3 0.5 0.2 -0.3\nradius = 0.2\nperturbation_norm = 1e-3\n"
    cfg = load_config(text=text, environ={})
    c = build_cocycle(cfg, resolve_frequency(cfg.omega))
    assert weighted_norm(c.F, WeightSpec.analytic(), 0.2) == pytest.approx(1e-3)
    assert np.allclose(c.A, [[0.0, 1.0], [-1.0, 0.0]])
