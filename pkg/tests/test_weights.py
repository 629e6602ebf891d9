"""
Tests for weights: evaluation and validation of Λ, subadditivity, the condition
integrals on log-spaced blocks and the quasi-analytic sequence.
"""

import math

import numpy as np
import pytest

from arithmetics import Frequency, ExpPowerPsi, estimate_psi
from errors import DomainError, InputError
from weights import (
    CONVERGES,
    DIVERGES,
    INCONCLUSIVE,
    WeightSpec,
    block_edges,
    classify_conditions,
    eval_weight,
    integral_verdict,
    load_weight_table,
    parse_weight,
    quasi_analytic_sequence,
    subadditivity_margin,
    verify_subadditivity,
)


def test_analytic_and_gevrey_values():
    """Λ(v) = v and Λ(v) = v^{1/α}, scalar in, scalar out."""
    assert eval_weight(WeightSpec.analytic(), 7.5) == 7.5
    assert eval_weight(WeightSpec.gevrey(2), 4.0) == pytest.approx(2.0)
    values = eval_weight(WeightSpec.gevrey(3), np.array([1.0, 8.0, 27.0]))
    assert np.allclose(values, [1.0, 2.0, 3.0])


def test_eval_weight_rejects_points_below_one():
    """The weight lives on [1, inf)."""
    with pytest.raises(DomainError):
        eval_weight(WeightSpec.analytic(), 0.5)
    with pytest.raises(DomainError):
        eval_weight(WeightSpec.analytic(), np.array([2.0, math.nan]))


def test_gevrey_index_below_one_rejected():
    """α < 1 is not a Gevrey class."""
    with pytest.raises(DomainError):
        WeightSpec.gevrey(0.5)


def test_tabulated_interpolates_and_extrapolates_linearly():
    """Piecewise linear inside the table, last slope beyond it."""
    w = WeightSpec.tabulated([1, 2, 4], [1, 3, 4])
    assert w(1.5) == pytest.approx(2.0)
    assert w(3.0) == pytest.approx(3.5)
    assert w(6.0) == pytest.approx(5.0)
    assert w.derivative(1.2) == pytest.approx(2.0)
    assert w.derivative(10.0) == pytest.approx(0.5)


def test_tabulated_validation():
    """Λ(1) < 1, decreasing values, late starts and short tables are all rejected."""
    with pytest.raises(DomainError):
        WeightSpec.tabulated([1, 2], [0.5, 2.0])
    with pytest.raises(InputError):
        WeightSpec.tabulated([1, 2, 3], [1.0, 3.0, 2.0])
    with pytest.raises(DomainError):
        WeightSpec.tabulated([2, 3], [2.0, 3.0])
    with pytest.raises(InputError):
        WeightSpec.tabulated([1], [1.0])


def test_parse_weight_grammar(tmp_path):
    """analytic, gevrey:<alpha> and table:<path> parse; anything else is an InputError."""
    assert parse_weight("analytic").kind == "analytic"
    assert parse_weight(" gevrey:2.5 ").alpha == 2.5
    table = tmp_path / "lam.csv"
    table.write_text("v,lam\n1,1\n10,4\n100,9\n")
    w = parse_weight(f"table:{table}")
    assert w.kind == "tabulated"
    assert w(10.0) == pytest.approx(4.0)
    assert w.label == f"table:{table}"
    for bad in ("", "gevrey:", "gevrey:x", "power:2", "table:"):
        with pytest.raises(InputError):
            parse_weight(bad)


def test_load_weight_table_without_header(tmp_path):
    """Headerless two-column CSV."""
    table = tmp_path / "lam.csv"
    table.write_text("1,1\n2,1.5\n3,2\n")
    w = load_weight_table(str(table))
    assert w.grid == (1.0, 2.0, 3.0)
    assert w.values == (1.0, 1.5, 2.0)


def test_load_weight_table_needs_two_columns(tmp_path):
    """Three columns is an InputError."""
    table = tmp_path / "lam.csv"
    table.write_text("1,1,1\n2,2,2\n")
    with pytest.raises(InputError):
        load_weight_table(str(table))


def test_subadditivity_holds_for_standard_weights():
    """v and v^{1/α} are subadditive."""
    for w in (WeightSpec.analytic(), WeightSpec.gevrey(2), WeightSpec.gevrey(3)):
        report = verify_subadditivity(w, 1000.0, 2000)
        assert report.ok
        assert report.pairs_checked > 0


def test_subadditivity_fails_for_quadratic_table():
    """Λ(v) = v² is superadditive; the worst pair is reported."""
    grid = np.arange(1, 101, dtype=float)
    report = verify_subadditivity(WeightSpec.tabulated(grid, grid**2), 100.0, 500)
    assert not report.ok
    x, y = report.worst_pair
    assert report.worst_margin == pytest.approx(subadditivity_margin(WeightSpec.tabulated(grid, grid**2), x, y))
    assert report.worst_margin < 0


def test_subadditivity_fails_for_jump_table():
    """Λ(v) = v with a jump to Λ(10) = 50: the balanced witness (5, 5) is reported."""
    grid = np.arange(1, 101, dtype=float)
    jump = WeightSpec.tabulated(grid, np.where(grid >= 10, grid + 40.0, grid))
    report = verify_subadditivity(jump, 100.0, 500)
    assert not report.ok
    assert report.worst_pair == (5.0, 5.0)
    assert report.worst_margin == pytest.approx(-40.0)
    assert subadditivity_margin(jump, 5.0, 5.0) == pytest.approx(-40.0)


def test_verify_subadditivity_domain():
    """vmax < 2 and samples < 1 are rejected."""
    with pytest.raises(DomainError):
        verify_subadditivity(WeightSpec.analytic(), 1.5, 10)
    with pytest.raises(DomainError):
        verify_subadditivity(WeightSpec.analytic(), 10.0, 0)


def test_block_edges_are_log_spaced():
    """One block per decade, at least four blocks, ends included."""
    edges = block_edges(1.0, 1e6)
    assert len(edges) == 7
    assert edges[0] == pytest.approx(1.0)
    assert edges[-1] == pytest.approx(1e6)
    assert len(block_edges(1.0, 50.0)) == 5


def test_integral_verdicts_on_synthetic_blocks():
    """Geometric decay converges, flat contributions diverge, a single bump is inconclusive."""
    decaying = np.array([1.0, 0.5, 0.25, 0.125])
    assert integral_verdict(decaying, np.cumsum(decaying))[0] == CONVERGES
    flat = np.ones(6)
    verdict, tail = integral_verdict(flat, np.cumsum(flat))
    assert verdict == DIVERGES
    assert math.isinf(tail)
    bump = np.array([1.0, 0.5, 0.49, 0.2, 0.05, 0.049])
    assert integral_verdict(bump, np.cumsum(bump))[0] == INCONCLUSIVE


@pytest.mark.parametrize("alpha", [1, 2, 3])
@pytest.mark.parametrize("beta", [0.2, 0.3, 0.4, 0.6, 0.8, 0.9, 1.2])
def test_gevrey_against_exp_power_psi(alpha, beta):
    """Gevrey-α weight against Ψ = e^{v^β}: Λ-BR converges iff β < 1/α on [1, 1e6]."""
    report = classify_conditions(WeightSpec.gevrey(alpha), ExpPowerPsi(beta), 1.0, 1e6)
    expected = CONVERGES if beta < 1.0 / alpha else DIVERGES
    if abs(beta - 1.0 / alpha) < 0.05:
        assert report.verdicts["lambda_br"] in (expected, INCONCLUSIVE)
    else:
        assert report.verdicts["lambda_br"] == expected
        assert report.verdicts["br_equivalent"] == expected
        assert report.consistent


def test_boundary_case_never_reports_convergence():
    """β = 1/α gives a flat block series: never 'converges'."""
    report = classify_conditions(WeightSpec.gevrey(2), ExpPowerPsi(0.5), 1.0, 1e6)
    assert report.verdicts["lambda_br"] != CONVERGES


def test_quasi_analytic_integral_verdicts():
    """∫Λ/v² diverges for the analytic weight and converges for Gevrey weights."""
    psi = ExpPowerPsi(0.2)
    assert classify_conditions(WeightSpec.analytic(), psi, 1.0, 1e6).verdicts["quasi_analytic"] == DIVERGES
    assert classify_conditions(WeightSpec.gevrey(2), psi, 1.0, 1e6).verdicts["quasi_analytic"] == CONVERGES


def test_condition_series_shape():
    """Every series carries one contribution per block and monotone partials for positive integrands."""
    report = classify_conditions(WeightSpec.analytic(), ExpPowerPsi(0.5), 1.0, 1e4)
    series = report.lambda_br_integral_tail
    assert len(series.contributions) == len(series.edges) - 1
    assert np.all(np.diff(series.partials) > 0)
    assert not report.extrapolated
    payload = report.to_dict()
    assert set(payload["verdicts"]) == {"lambda_br", "br_equivalent", "russmann", "quasi_analytic"}


def test_golden_ratio_decays_on_enumerated_table():
    """lnΨ/Λ for the golden frequency falls block by block: the ratio condition converges."""
    psi = estimate_psi(Frequency.golden(), 1000)
    report = classify_conditions(WeightSpec.analytic(), psi, 1.0, 1000.0)
    assert report.verdicts["russmann"] == CONVERGES
    maxima = report.russmann_ratio.contributions
    assert maxima[-1] < maxima[-2] < maxima[-3]


def test_classify_marks_extrapolation_beyond_table():
    """vmax past Kmax sets the extrapolated flag."""
    psi = estimate_psi(Frequency.golden(), 100)
    report = classify_conditions(WeightSpec.analytic(), psi, 1.0, 1e4)
    assert report.extrapolated


def test_classify_conditions_domain():
    """v0 < 1 or vmax <= v0 is rejected."""
    with pytest.raises(DomainError):
        classify_conditions(WeightSpec.analytic(), ExpPowerPsi(0.5), 0.5, 10.0)
    with pytest.raises(DomainError):
        classify_conditions(WeightSpec.analytic(), ExpPowerPsi(0.5), 10.0, 10.0)


def test_quasi_analytic_sequence_for_analytic_weight():
    """Λ(v) = v beats v^γ from v = 2 on; steps stay within max(1, n^δ)."""
    witness = quasi_analytic_sequence(WeightSpec.analytic(), 0.5, n_terms=50)
    assert witness.complete
    assert witness.gamma == pytest.approx(0.875)
    assert witness.delta == pytest.approx(0.125)
    seq = witness.sequence
    assert seq[0] == 2
    for n, (a, b) in enumerate(zip(seq[:-1], seq[1:]), start=1):
        assert 1 <= b - a <= max(1, math.floor(n**witness.delta))
    assert np.all(np.diff(witness.bound_partials) > 0)
    assert witness.dominating_exponent > 1.0


def test_quasi_analytic_sequence_without_start():
    """√v never exceeds v^γ for γ > 1/2: no sequence."""
    witness = quasi_analytic_sequence(WeightSpec.gevrey(2), 0.4, search_limit=500)
    assert not witness.complete
    assert witness.sequence == ()


def test_quasi_analytic_sequence_beta_domain():
    """β must lie in (0, 1)."""
    with pytest.raises(DomainError):
        quasi_analytic_sequence(WeightSpec.analytic(), 1.0)
    with pytest.raises(DomainError):
        quasi_analytic_sequence(WeightSpec.analytic(), 0.0)
