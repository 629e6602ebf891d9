"""
Tests for arithmetics: lattice enumeration, Ψ and its extension, the inverse,
analytic presets and the rotation condition.
"""

import itertools
import math

import numpy as np
import pandas as pd
import pytest

from arithmetics import (
    ExpPowerPsi,
    Frequency,
    PowerPsi,
    TWO_PI,
    canonical_mask,
    check_rotation_condition,
    estimate_psi,
    kmax_within_budget,
    lattice_count,
    lattice_shell,
    psi_inverse,
    psi_preset,
    write_psi_csv,
)
from errors import DomainError, InputError, ResonantFrequencyError, ResourceBudgetError


@pytest.fixture(scope="module")
def golden_psi():
    return estimate_psi(Frequency.golden(), 50)


def test_first_values_for_golden_frequency(golden_psi):
    """Ψ(1) = 1/2π and Ψ(2) = 1/(2π(φ − 1))."""
    assert golden_psi.value(1) == pytest.approx(0.159155, abs=1e-6)
    assert golden_psi.value(2) == pytest.approx(0.257518, abs=1e-6)
    assert golden_psi.witness(2) == (1, -1)


def test_fibonacci_witnesses(golden_psi):
    """Ψ jumps at Fibonacci orders with witnesses (F_{n+1}, −F_n)."""
    assert golden_psi.witness(13) == (8, -5)
    assert golden_psi.witness(34) == (21, -13)
    assert golden_psi.value(12) == golden_psi.value(8)
    assert golden_psi.value(13) > golden_psi.value(12)


def test_table_matches_brute_force():
    """1/(2πΨ(K)) is the minimum of |k·ω| over 0 < |k| <= K, checked by plain enumeration."""
    freq = Frequency.of(1.0, math.sqrt(2.0), math.sqrt(3.0))
    psi = estimate_psi(freq, 8)
    best = math.inf
    for K in range(1, 9):
        for k in itertools.product(range(-K, K + 1), repeat=3):
            if sum(abs(c) for c in k) == K:
                best = min(best, abs(np.dot(k, freq.vector)))
        assert psi.value(K) == pytest.approx(1.0 / (TWO_PI * best), rel=1e-12)


def test_table_is_non_decreasing(golden_psi):
    """Ψ is a running maximum."""
    assert np.all(np.diff(golden_psi.table) >= 0)


def test_shell_sizes():
    """Shells partition the ball; canonical_mask keeps one of each ±k."""
    for d, K in ((1, 5), (2, 7), (3, 4)):
        total = sum(len(lattice_shell(d, s)) for s in range(1, K + 1))
        assert total == lattice_count(d, K)
        shell = lattice_shell(d, K)
        assert canonical_mask(shell).sum() * 2 == len(shell)


def test_resonant_frequency_raises_with_witness():
    """ω = (1, 1/2) is resonant at k = (1, −2)."""
    freq = Frequency.of(1.0, 0.5)
    estimate_psi(freq, 2)
    with pytest.raises(ResonantFrequencyError) as exc:
        estimate_psi(freq, 3)
    assert exc.value.witness == (1, -2)


def test_budget_is_enforced():
    """The enumeration refuses to start beyond the lattice budget."""
    with pytest.raises(ResourceBudgetError) as exc:
        estimate_psi(Frequency.golden(), 1000, budget=100)
    assert exc.value.needed == lattice_count(2, 1000)


@pytest.mark.parametrize("d, budget", [(1, 10), (2, 5000), (3, 20000), (3, 50_000_000), (4, 10**6)])
def test_kmax_within_budget(d, budget):
    """The largest enumerable order: its lattice fits the budget, the next one does not."""
    K = kmax_within_budget(d, budget)
    assert lattice_count(d, K) <= budget < lattice_count(d, K + 1)


def test_kmax_within_budget_edges():
    """A budget below the first shell gives 0; spiral-3d at the default budget stays far below 1000."""
    assert kmax_within_budget(3, 5) == 0
    assert kmax_within_budget(3, 20000) == 24
    assert kmax_within_budget(3, 50_000_000) < 1000
    with pytest.raises(InputError):
        kmax_within_budget(0, 100)


def test_kmax_domain():
    """Kmax must be positive; table lookups outside 1..Kmax fail."""
    with pytest.raises(DomainError):
        estimate_psi(Frequency.golden(), 0)
    psi = estimate_psi(Frequency.golden(), 5)
    with pytest.raises(DomainError):
        psi.value(6)
    with pytest.raises(DomainError):
        psi.log_psi(0.5)


def test_parallel_enumeration_matches_serial():
    """n_jobs does not change the table or the witnesses."""
    freq = Frequency.of(1.0, math.sqrt(2.0))
    serial = estimate_psi(freq, 150)
    parallel = estimate_psi(freq, 150, n_jobs=2)
    assert np.array_equal(serial.table, parallel.table)
    assert np.array_equal(serial.witnesses, parallel.witnesses)


def test_extension_is_monotone_and_hits_knots(golden_psi):
    """The continuous extension interpolates the table and never decreases."""
    v = np.linspace(1.0, 80.0, 2000)
    values = golden_psi(v)
    assert np.all(np.diff(values) >= -1e-12)
    assert golden_psi(21.0) == pytest.approx(golden_psi.value(21))
    assert golden_psi.tail_slope > 0


def test_psi_inverse_round_trip(golden_psi):
    """extension(psi_inverse(y)) == y on the table range and beyond Kmax."""
    for y in np.geomspace(golden_psi.value(1), 4.0 * golden_psi.value(50), 40):
        v = psi_inverse(golden_psi, float(y))
        assert golden_psi(v) == pytest.approx(y, rel=1e-10)


def test_psi_inverse_returns_right_end_of_plateau(golden_psi):
    """Ψ is flat on 5..7, so the inverse of Ψ(5) is 7."""
    assert psi_inverse(golden_psi, golden_psi.value(5)) == pytest.approx(7.0)


def test_psi_inverse_below_range(golden_psi):
    """Values below Ψ(1) have no preimage."""
    with pytest.raises(DomainError):
        psi_inverse(golden_psi, 0.1)


def test_to_frame_and_csv(golden_psi, tmp_path):
    """The table writes as K, psi, k1, k2."""
    path = tmp_path / "psi.csv"
    write_psi_csv(golden_psi, str(path))
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["K", "psi", "k1", "k2"]
    assert len(frame) == 50
    row = frame[frame["K"] == 2].iloc[0]
    assert row["psi"] == pytest.approx(0.257518, abs=1e-6)
    assert (row["k1"], row["k2"]) == (1, -1)


def test_presets():
    """exp-power and power presets parse; their log-derivatives are consistent."""
    exp_power = psi_preset("exp-power:0.5")
    assert isinstance(exp_power, ExpPowerPsi)
    assert exp_power.log_psi(4.0) == pytest.approx(2.0)
    assert exp_power.dlog_psi(4.0) == pytest.approx(0.25)
    power = psi_preset("power:2")
    assert isinstance(power, PowerPsi)
    assert power.log_psi(math.e) == pytest.approx(2.0)
    assert power.label == "power:2"
    for bad in ("exp-power:", "exp-power:-1", "poly:2", "power:x"):
        with pytest.raises(InputError):
            psi_preset(bad)


def test_rotation_condition_zero_rotation_is_borderline(golden_psi):
    """ρ = 0 meets the condition with equality at the Ψ witnesses."""
    report = check_rotation_condition(0.0, Frequency.golden(), golden_psi, 20)
    assert report.ok
    assert abs(report.margin) < 1e-12


def test_rotation_condition_fails_on_resonance(golden_psi):
    """ρ = πk·ω makes 2ρ − 2πk·ω vanish."""
    rho = math.pi * 1.0
    report = check_rotation_condition(rho, Frequency.golden(), golden_psi, 10)
    assert not report.ok
    assert report.margin == pytest.approx(-1.0)
    assert report.witness == (1, 0)
    assert report.divisor == pytest.approx(0.0, abs=1e-12)


def test_rotation_condition_domain(golden_psi):
    """K must lie within the table."""
    with pytest.raises(DomainError):
        check_rotation_condition(0.5, Frequency.golden(), golden_psi, 51)
