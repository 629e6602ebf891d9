"""
Tests for mat2: operator norms, elliptic rotation numbers and normal forms.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import InputError, NotEllipticError, PreconditionError
from mat2 import (
    J,
    M,
    M_INV,
    R,
    elliptic_rotation_number,
    op_norm,
    op_norms,
    perturbed_normal_form,
    real_normal_form,
)


def test_frame_matrix_diagonalizes_J():
    """M J M⁻¹ = iR with M unitary."""
    assert np.allclose(M @ M_INV, np.eye(2))
    assert np.allclose(M @ J @ M_INV, 1j * R)


def test_op_norms_match_numpy():
    """Closed-form spectral norms agree with the SVD on a stack."""
    rng = np.random.default_rng(1)
    stack = rng.standard_normal((50, 2, 2)) + 1j * rng.standard_normal((50, 2, 2))
    assert np.allclose(op_norms(stack), np.linalg.norm(stack, ord=2, axis=(1, 2)))
    assert op_norm(J) == pytest.approx(1.0)


def test_rotation_number_of_scaled_J():
    """ρ(αJ) = α."""
    assert elliptic_rotation_number(0.7 * J) == pytest.approx(0.7)


def test_non_elliptic_and_non_traceless_inputs():
    """Hyperbolic and parabolic matrices are NotElliptic; a trace is an InputError."""
    with pytest.raises(NotEllipticError):
        elliptic_rotation_number(np.diag([1.0, -1.0]))
    with pytest.raises(NotEllipticError):
        elliptic_rotation_number(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InputError):
        elliptic_rotation_number(np.eye(2))
    with pytest.raises(InputError):
        elliptic_rotation_number(np.eye(3))


def test_negative_orientation_is_reflected():
    """−J is conjugate to J by the reflection R; the normal form folds it into P."""
    nf = real_normal_form(-J)
    assert nf.reflected
    assert nf.alpha == pytest.approx(1.0)
    assert np.allclose(nf.P, R)
    assert np.linalg.det(nf.P) == pytest.approx(-1.0)
    assert nf.conjugation_residual(-J) <= 1e-15


@settings(max_examples=100, deadline=None)
@given(
    a=st.floats(min_value=-3.0, max_value=3.0),
    b=st.floats(min_value=-3.0, max_value=-0.05),
    c=st.floats(min_value=0.05, max_value=3.0),
)
def test_reflected_normal_form_conjugates_to_alpha_J(a, b, c):
    """Elliptic A with b < 0: P A P⁻¹ = αJ with det P = −1 and ‖P‖ = ‖P⁻¹‖ = sqrt(‖A‖/α)."""
    A = np.array([[a, b], [c, -a]])
    det = -a * a - b * c
    if det <= 1e-3 * (a * a + b * b + c * c):
        return
    nf = real_normal_form(A)
    assert nf.reflected
    assert nf.alpha == pytest.approx(math.sqrt(det))
    assert np.linalg.det(nf.P) == pytest.approx(-1.0)
    assert np.allclose(nf.P @ nf.P_inv, np.eye(2))
    assert op_norm(nf.P) == pytest.approx(math.sqrt(op_norm(A) / nf.alpha), rel=1e-9)
    assert op_norm(nf.P_inv) == pytest.approx(math.sqrt(op_norm(A) / nf.alpha), rel=1e-9)
    scale = 1.0 + op_norm(A) * op_norm(nf.P) * op_norm(nf.P_inv)
    assert nf.conjugation_residual(A) <= 1e-12 * scale
    assert nf.complex_residual(A) <= 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(
    a=st.floats(min_value=-3.0, max_value=3.0),
    b=st.floats(min_value=0.05, max_value=3.0),
    c=st.floats(min_value=-3.0, max_value=-0.05),
)
def test_real_normal_form_conjugates_to_alpha_J(a, b, c):
    """P A P⁻¹ = αJ with det P = 1 and symmetric P⁻¹ for elliptic A with b > 0."""
    A = np.array([[a, b], [c, -a]])
    det = -a * a - b * c
    if det <= 1e-3 * (a * a + b * b + c * c):
        return
    nf = real_normal_form(A)
    assert nf.alpha == pytest.approx(math.sqrt(det))
    assert np.linalg.det(nf.P) == pytest.approx(1.0)
    assert np.allclose(nf.P_inv, nf.P_inv.T)
    assert np.allclose(nf.P @ nf.P_inv, np.eye(2))
    scale = 1.0 + op_norm(A) * op_norm(nf.P) * op_norm(nf.P_inv)
    assert nf.conjugation_residual(A) <= 1e-12 * scale
    assert nf.complex_residual(A) <= 1e-12 * scale


def test_normal_form_of_alpha_J_is_identity():
    """αJ is already normal."""
    nf = real_normal_form(2.5 * J)
    assert np.allclose(nf.P, np.eye(2))
    assert nf.alpha == pytest.approx(2.5)


@pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0])
def test_perturbed_normal_form_bounds(alpha):
    """For ‖B‖ <= α/4: β ∈ [α/2, 3α/2], ‖P‖ <= 4 and ‖P⁻¹‖ <= (‖αJ + B‖/β)^{1/2}."""
    rng = np.random.default_rng(5)
    for _ in range(1000):
        x, y, z = rng.standard_normal(3)
        B = np.array([[x, y], [z, -x]])
        B *= rng.uniform(0.0, alpha / 4.0) / op_norm(B)
        nf = perturbed_normal_form(alpha, B)
        assert not nf.reflected
        assert alpha / 2.0 <= nf.alpha <= 1.5 * alpha
        assert op_norm(nf.P) <= 4.0
        assert op_norm(nf.P_inv) <= math.sqrt(op_norm(alpha * J + B) / nf.alpha) * (1.0 + 1e-12)
        assert nf.conjugation_residual(alpha * J + B) <= 1e-12 * alpha * (1.0 + op_norm(nf.P) * op_norm(nf.P_inv))


def test_perturbed_normal_form_preconditions():
    """‖B‖ > α/4 and α <= 0 are rejected."""
    with pytest.raises(PreconditionError):
        perturbed_normal_form(1.0, 0.5 * np.diag([1.0, -1.0]))
    with pytest.raises(InputError):
        perturbed_normal_form(0.0, np.zeros((2, 2)))
