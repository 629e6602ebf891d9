"""
Approximate cohomological equation ∂_ω X = [αJ, X] + G, solved mode by mode.

In the complex frame X̃ = M X̂ M⁻¹ (M J M⁻¹ = iR) the operator is diagonal: the
diagonal entries divide by iκ, the (1,2) entry by i(κ − 2α) and the (2,1) entry by
i(κ + 2α), with κ = 2πk·ω.
"""

from __future__ import annotations

import logging

import numpy as np

from errors import InputError, SmallDivisorError
from fourier import FourierMatrixSeries, frequencies_along, from_modes
from mat2 import M, M_INV

logger = logging.getLogger(__name__)

# Entries this far below the largest entry of their mode are rounding noise.
ROUNDING_LEVEL = 1e-15


def _divisors(kappa: np.ndarray, alpha: float) -> np.ndarray:
    """(n, 2, 2) divisors κ, κ − 2α / κ + 2α, κ laid out like the matrix entries."""
    out = np.empty((kappa.size, 2, 2))
    out[:, 0, 0] = kappa
    out[:, 1, 1] = kappa
    out[:, 0, 1] = kappa - 2.0 * alpha
    out[:, 1, 0] = kappa + 2.0 * alpha
    return out


def _series_like(G: FourierMatrixSeries, values: np.ndarray, tail_bound: float) -> FourierMatrixSeries:
    if G.real_symmetric:
        modes = {}
        for k, c in zip(G.keys, values):
            k = tuple(int(x) for x in k)
            if next(x for x in k if x) > 0:
                modes[k] = c
        return from_modes(G.d, modes, real_symmetric=True, tail_bound=tail_bound)
    return from_modes(G.d, {tuple(int(x) for x in k): c for k, c in zip(G.keys, values)},
                      real_symmetric=False, tail_bound=tail_bound)


def solve_cohomological_split(
    alpha: float, G: FourierMatrixSeries, freq, N: int, psi_N: float
) -> tuple[FourierMatrixSeries, FourierMatrixSeries]:
    """
    (X, U) with ∂_ω X − [αJ, X] = G − U. U holds the entries of G at rounding level that
    sit on a divisor below 1/(2Ψ(N)); every other entry is solved. A larger entry on such a
    divisor raises SmallDivisorError. The tail of G is carried over scaled by 2Ψ(N).
    """
    if len(G) and (G.orders.min() == 0 or G.orders.max() > N):
        raise InputError(f"right-hand side must have zero mean and support in 0 < |k| <= {N}")
    tail = 2.0 * psi_N * G.tail_bound
    if not len(G):
        empty = FourierMatrixSeries(G.d, G.keys.copy(), G.values.copy(), G.real_symmetric, tail)
        return empty, FourierMatrixSeries.zero(G.d)

    threshold = 1.0 / (2.0 * psi_N)
    kappa = frequencies_along(G, getattr(freq, "vector", freq))
    div = _divisors(kappa, alpha)
    g_tilde = np.einsum("ij,njk,kl->nil", M, G.values, M_INV)
    scale = np.max(np.abs(g_tilde), axis=(1, 2), keepdims=True)
    small = np.abs(div) < threshold
    noise = np.abs(g_tilde) <= ROUNDING_LEVEL * scale
    blocking = small & ~noise
    if np.any(blocking):
        n, i, j = (int(x[0]) for x in np.nonzero(blocking))
        raise SmallDivisorError(tuple(G.keys[n]), float(abs(div[n, i, j])), threshold)

    unsolved = small & noise
    x_tilde = np.where(unsolved, 0.0, g_tilde / (1j * np.where(unsolved, 1.0, div)))
    X = _series_like(G, np.einsum("ij,njk,kl->nil", M_INV, x_tilde, M), tail)

    u_tilde = np.where(unsolved, g_tilde, 0.0)
    if not np.any(u_tilde):
        return X, FourierMatrixSeries.zero(G.d)
    U = _series_like(G, np.einsum("ij,njk,kl->nil", M_INV, u_tilde, M), 0.0)
    logger.debug("%d rounding-level entries left on small divisors", int(np.count_nonzero(u_tilde)))
    return X, U


def solve_cohomological(alpha: float, G: FourierMatrixSeries, freq, N: int, psi_N: float) -> FourierMatrixSeries:
    """
    X with X = Ṫ_N X. Every divisor of an entry present in G must be at least 1/(2Ψ(N));
    the tail of G is carried over scaled by 2Ψ(N).
    """
    return solve_cohomological_split(alpha, G, freq, N, psi_N)[0]
