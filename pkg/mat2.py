"""
Normal forms for elliptic matrices in sl(2, R).

A traceless real A with det A > 0 has spectrum {±iα}, α = sqrt(det A). When its (1,2)
entry is positive it is SL(2, R)-conjugate to αJ; P is built from the eigenvector of iα
with P⁻¹ taken symmetric positive definite, which gives ‖P‖ = ‖P⁻¹‖ = sqrt(‖A‖/α).
When the entry is negative the reflection R = diag(1, −1) is folded into P, so P conjugates
A to αJ in GL(2, R) with det P = −1 and the same norms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import InputError, NotEllipticError, PreconditionError

logger = logging.getLogger(__name__)

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
R = np.diag([1.0, -1.0])
I2 = np.eye(2)
# Unitary; M J M⁻¹ = iR.
M = (1.0 / (1.0 - 1.0j)) * np.array([[1.0, -1.0j], [1.0, 1.0j]])
M_INV = M.conj().T

ELLIPTIC_TOL = 1e-14
TRACE_TOL = 1e-12


def _self_check() -> None:
    if not np.allclose(M @ M_INV, I2, atol=1e-14) or not np.allclose(M @ J @ M_INV, 1j * R, atol=1e-14):
        raise RuntimeError("matrix M does not diagonalize J")


_self_check()


def op_norms(a: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack (..., 2, 2) of real or complex matrices, closed form."""
    a = np.asarray(a)
    fro2 = np.sum(np.abs(a) ** 2, axis=(-2, -1))
    det = np.abs(a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0])
    disc = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0))
    return np.sqrt((fro2 + disc) / 2.0)


def op_norm(a) -> float:
    return float(op_norms(np.asarray(a)))


def _as_traceless(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise InputError(f"expected a 2x2 matrix, got shape {A.shape}")
    if abs(A[0, 0] + A[1, 1]) > TRACE_TOL * (1.0 + op_norm(A)):
        raise InputError("matrix must be traceless")
    return A


def elliptic_rotation_number(A) -> float:
    A = _as_traceless(A)
    det = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
    if not det > ELLIPTIC_TOL * op_norm(A) ** 2 or det <= 0.0:
        raise NotEllipticError(det)
    return math.sqrt(det)


@dataclass(frozen=True, eq=False)
class EllipticNormalForm:
    alpha: float
    P: np.ndarray
    P_inv: np.ndarray
    Q: np.ndarray
    # det P = −1: A was conjugate to −αJ in SL(2, R)
    reflected: bool = False

    def conjugation_residual(self, A) -> float:
        """‖P A P⁻¹ − αJ‖."""
        return op_norm(self.P @ np.asarray(A, dtype=float) @ self.P_inv - self.alpha * J)

    def complex_residual(self, A) -> float:
        """‖Q A Q⁻¹ − iαR‖."""
        Q_inv = self.P_inv @ M_INV
        return op_norm(self.Q @ np.asarray(A, dtype=float) @ Q_inv - 1j * self.alpha * R)


def _positive_normal_form(A: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    a = 0.5 * (A[0, 0] - A[1, 1])
    b = A[0, 1]
    # Columns Re v, Im v of the eigenvector v = (b, iα − a): A U = U αJ.
    U = np.array([[b, 0.0], [-a, alpha]])
    T = U @ U.T
    sqrt_det_T = math.sqrt(max(T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0], 0.0))
    S = (T + sqrt_det_T * I2) / math.sqrt(T[0, 0] + T[1, 1] + 2.0 * sqrt_det_T)
    P_inv = S / math.sqrt(S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0])
    P_inv = 0.5 * (P_inv + P_inv.T)
    P = np.array([[P_inv[1, 1], -P_inv[0, 1]], [-P_inv[1, 0], P_inv[0, 0]]])
    return P, P_inv


def real_normal_form(A) -> EllipticNormalForm:
    """
    P with P A P⁻¹ = αJ. An elliptic A always has A[0, 1] ≠ 0; when it is negative A is
    conjugate to −αJ in SL(2, R), and the reflection R is folded into P (det P = −1).
    """
    A = _as_traceless(A)
    alpha = elliptic_rotation_number(A)
    if A[0, 1] > 0.0:
        P, P_inv = _positive_normal_form(A, alpha)
        return EllipticNormalForm(alpha=alpha, P=P, P_inv=P_inv, Q=M @ P)

    P, P_inv = _positive_normal_form(R @ A @ R, alpha)
    P, P_inv = P @ R, R @ P_inv
    logger.debug("A[0,1] < 0: reflected normal form, ρ(A) = −%.12g", alpha)
    return EllipticNormalForm(alpha=alpha, P=P, P_inv=P_inv, Q=M @ P, reflected=True)


def perturbed_normal_form(alpha: float, B) -> EllipticNormalForm:
    """
    Normal form of αJ + B for ‖B‖ <= α/4. The returned form's alpha is β = ρ(αJ + B),
    which lies in [α/2, 3α/2].
    """
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    B = _as_traceless(B)
    norm_b = op_norm(B)
    if norm_b > alpha / 4.0 * (1.0 + 1e-12):
        raise PreconditionError(f"‖B‖ = {norm_b:.6g} exceeds α/4 = {alpha / 4.0:.6g}")
    nf = real_normal_form(alpha * J + B)
    logger.debug("perturbed normal form: α=%.12g → β=%.12g, ‖P‖=%.6g", alpha, nf.alpha, op_norm(nf.P))
    return nf
