"""
Tests for rotation: the cocycle container, fibered rotation numbers and Lyapunov exponents.
"""

import math

import numpy as np
import pytest

from arithmetics import Frequency, estimate_psi
from errors import InputError, PreconditionError
from fourier import FourierMatrixSeries, evaluate_many, from_modes, scalar_times_matrix, scale, weighted_norm
from kam import reduce
from mat2 import J, elliptic_rotation_number, op_norms
from rotation import (
    CocycleSpec,
    fibered_rotation_number,
    lyapunov_exponent,
    lyapunov_regularity,
    rotation_scan,
)
from weights import WeightSpec

GOLDEN = Frequency.golden()


def _constant(A, d=2):
    return CocycleSpec(freq=GOLDEN, A=np.asarray(A, dtype=float), F=FourierMatrixSeries.zero(d))


def test_cocycle_validation():
    """Traced parts, dimension mismatches and non-positive radii are rejected."""
    with pytest.raises(InputError):
        _constant(np.eye(2))
    with pytest.raises(InputError):
        CocycleSpec(freq=GOLDEN, A=J, F=FourierMatrixSeries.zero(1))
    with pytest.raises(InputError):
        CocycleSpec(freq=GOLDEN, A=J, F=from_modes(2, {(1, 0): np.eye(2)}))
    with pytest.raises(InputError):
        CocycleSpec(freq=GOLDEN, A=J, F=FourierMatrixSeries.zero(2), r=0.0)


def test_rotation_number_of_constant_elliptic():
    """ρ(ω, αJ) = α."""
    estimate = fibered_rotation_number(_constant(0.7 * J), 500.0, 0.01)
    assert estimate.value == pytest.approx(0.7, abs=1e-9)
    assert estimate.error_indicator < 1e-9


def test_rotation_number_is_conjugation_invariant():
    """A constant SL(2,R) conjugation changes ρ only by O(1/T)."""
    P = np.array([[2.0, 1.0], [1.0, 1.0]])
    A = P @ (0.7 * J) @ np.linalg.inv(P)
    estimate = fibered_rotation_number(_constant(A), 2000.0, 0.01)
    assert estimate.value == pytest.approx(0.7, abs=5e-3)


def test_rotation_number_of_hyperbolic_is_zero():
    """diag(1, −1) does not rotate."""
    estimate = fibered_rotation_number(_constant(np.diag([0.5, -0.5])), 200.0, 0.01)
    assert abs(estimate.value) < 1e-2


def test_rotation_number_with_scalar_perturbation():
    """u = 0.7 + 0.3cos(2πθ₁): ρ(uJ) is the mean of u."""
    F = scalar_times_matrix(2, {(1, 0): 0.15}, J)
    c = CocycleSpec(freq=GOLDEN, A=0.7 * J, F=F)
    estimate = fibered_rotation_number(c, 1000.0, 0.01)
    assert estimate.value == pytest.approx(0.7, abs=1e-3)


def test_step_bound_enforced():
    """step·(‖A‖ + |F|₀) must stay below the bound."""
    with pytest.raises(PreconditionError):
        fibered_rotation_number(_constant(10.0 * J), 10.0, 0.05)
    with pytest.raises(InputError):
        fibered_rotation_number(_constant(J), -1.0, 0.01)


def test_rotation_scan_keeps_order():
    """One estimate per horizon, in the order given."""
    estimates = rotation_scan(_constant(0.3 * J), [50.0, 100.0, 200.0], 0.01)
    assert [e.horizon for e in estimates] == [50.0, 100.0, 200.0]
    assert all(e.value == pytest.approx(0.3, abs=1e-9) for e in estimates)


def test_lyapunov_exponent_constant_cases():
    """Zero for rotations, the eigenvalue for diag(λ, −λ)."""
    assert abs(lyapunov_exponent(GOLDEN, _constant(0.7 * J), 200.0, 0.01)) < 1e-6
    value = lyapunov_exponent(GOLDEN, _constant(np.diag([0.5, -0.5])), 1000.0, 0.02)
    assert value == pytest.approx(0.5, abs=2e-3)


def test_lyapunov_frequency_mismatch():
    """The frequency argument must match the cocycle."""
    with pytest.raises(InputError):
        lyapunov_exponent(Frequency.of(1.0, math.sqrt(2.0)), _constant(J), 10.0, 0.01)


def test_lyapunov_regularity_near_rotation():
    """A small constant push keeps |ΔL| within 4δ."""
    base = _constant(0.7 * J)
    E = np.array([[1.0, 0.0], [0.0, -1.0]])
    moved = _constant(0.7 * J + 0.01 * E)
    record = lyapunov_regularity(base, moved, 500.0, 0.01)
    assert record.delta == pytest.approx(0.01)
    assert record.claimed_bound == pytest.approx(0.04)
    assert record.ok
    assert record.sharper_bound is None
    assert record.to_dict()["ok"]


def test_lyapunov_regularity_reuses_base():
    """A supplied base exponent is used as is."""
    base = _constant(0.7 * J)
    record = lyapunov_regularity(base, base, 50.0, 0.01, base=0.0)
    assert record.base == 0.0
    assert record.difference < 1e-6


# —— Near a reducible cocycle ——

@pytest.fixture(scope="module")
def reduced_golden():
    """J plus three low modes at |F|_{0.2} = 1e-3, with its KAM reduction."""
    F = from_modes(2, {
        (1, 0): np.array([[0.15, 0.25], [0.1, -0.15]]),
        (0, 1): np.array([[0.05 - 0.1j, -0.2], [0.3, -0.05 + 0.1j]]),
        (1, 1): np.array([[-0.1, 0.05], [0.15, 0.1]]),
    })
    F = scale(F, 1e-3 / weighted_norm(F, WeightSpec.analytic(), 0.2))
    c = CocycleSpec(freq=GOLDEN, A=J, F=F, r=0.2)
    report = reduce(c, estimate_psi(GOLDEN, 1000), WeightSpec.analytic(), max_steps=6)
    assert report.converged, report.error
    return c, report


def test_rotation_number_is_kept_along_the_reduction(reduced_golden):
    """At T = 1e4 the estimate settles within 4|F|₀ and agrees with every α_ν up to |F_ν|."""
    c, report = reduced_golden
    estimate = fibered_rotation_number(c, 1e4, 0.01)
    grid = np.stack(np.meshgrid(np.linspace(0, 1, 64), np.linspace(0, 1, 64)), axis=-1).reshape(-1, 2)
    sup_f = float(np.max(op_norms(np.real(evaluate_many(c.F, grid)))))
    assert estimate.error_indicator <= 4.0 * sup_f
    for step in report.steps:
        assert abs(estimate.value - step["alpha"]) <= 4.0 * step["F_norm"] + 1e-6
    assert estimate.value == pytest.approx(elliptic_rotation_number(report.A_inf), abs=1e-6)


@pytest.mark.parametrize("delta", [1e-3, 1e-2])
def test_lyapunov_regularity_near_reducible_cocycle(reduced_golden, delta):
    """A δ-push of a reducible cocycle moves L by at most 4δ; Y gives the sharper distance."""
    c, report = reduced_golden
    E = np.array([[1.0, 0.0], [0.0, -1.0]])
    moved = CocycleSpec(freq=GOLDEN, A=c.A + delta * E, F=c.F, r=c.r)
    record = lyapunov_regularity(c, moved, 500.0, 0.01, Y=report.Y)
    assert record.delta == pytest.approx(delta)
    assert record.ok
    assert record.difference <= 4.0 * delta
    assert record.sharper_bound is not None
    assert record.sharper_bound <= 1.25 * delta
