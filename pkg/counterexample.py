"""
Non-reducible cocycles for frequencies whose small divisors beat the weight.

When lnΨ(v)/Λ(v) does not tend to 0, there are modes k_j with |2πk_j·ω| <= e^{−3πrΛ(|k_j|)}.
Placing û(±k_j) = εC⁻¹·2πk_j·ω makes the formal solution of ∂_ω v = u − ρ have
coefficients of constant modulus εC⁻¹, so (ω, u(θ)J) is not reducible by a continuous Y.
Everything here is a finite surrogate: a finite chain and the measured growth of its
partial sums.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from arithmetics import Frequency, PsiFunction, TWO_PI
from errors import DomainError, InputError, InsufficientResonancesError
from fourier import FourierMatrixSeries, evaluate_many, from_modes, scalar_times_matrix
from mat2 import J
from rotation import CocycleSpec
from weights import DECAY_RATIO, WeightSpec

logger = logging.getLogger(__name__)

# r is this fraction of the observed limsup of lnΨ/(3πΛ)
RATIO_FRACTION = 0.5
CF_DIGITS = 50


@dataclass(frozen=True)
class ResonantMode:
    k: tuple[int, ...]
    divisor: float
    log_margin: float

    def to_dict(self) -> dict:
        return {"k": list(self.k), "divisor": self.divisor, "log_margin": self.log_margin}


@dataclass(frozen=True)
class ResonanceChain:
    """
    Modes with |2πk_j·ω| <= e^{−3πrΛ(|k_j|)} and strictly increasing |k_j|.
    C = Σ e^{−πrΛ(|k_j|)} taken over both k_j and −k_j.
    """

    freq: Frequency
    weight: WeightSpec
    r: float
    modes: tuple[ResonantMode, ...]
    C: float
    limsup_ratio: float

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "C": self.C,
            "limsup_ratio": self.limsup_ratio,
            "weight": self.weight.label,
            "modes": [m.to_dict() for m in self.modes],
        }


def _top_octaves(psi: PsiFunction, weight: WeightSpec) -> tuple[float, float]:
    """Max of lnΨ(K)/Λ(K) over (Kmax/2, Kmax] and over (Kmax/4, Kmax/2]."""
    K = np.arange(1, psi.kmax + 1, dtype=float)
    ratio = psi.log_table / np.asarray(weight(K), dtype=float)
    top = ratio[K > psi.kmax / 2.0]
    prev = ratio[(K > psi.kmax / 4.0) & (K <= psi.kmax / 2.0)]
    return float(top.max()), float(prev.max()) if prev.size else -math.inf


def find_resonances(
    freq: Frequency,
    weight: WeightSpec,
    psi: PsiFunction,
    count: int,
    r: float | None = None,
) -> ResonanceChain:
    """
    Without an explicit r, r = RATIO_FRACTION·(max ratio over the top octave)/(3π), provided
    the ratio is not decaying between the last two octaves of the table.
    """
    if count < 1:
        raise DomainError("count must be >= 1", count)
    if psi.freq.omega != freq.omega:
        raise InputError("Ψ was enumerated for a different frequency")

    top, prev = _top_octaves(psi, weight)
    if r is None:
        if top <= 0.0 or top < DECAY_RATIO * prev:
            logger.info("lnΨ/Λ decays on the table (top octave %.4g, previous %.4g): no resonance supply", top, prev)
            raise InsufficientResonancesError(0, count)
        r = RATIO_FRACTION * top / (3.0 * math.pi)
    elif not r > 0:
        raise DomainError("r must be positive", r)

    jumps = np.nonzero(np.diff(np.concatenate([[-np.inf], psi.table])) > 0)[0] + 1
    modes: list[ResonantMode] = []
    for K in jumps:
        k = psi.witness(int(K))
        order = sum(abs(c) for c in k)
        divisor = TWO_PI * float(np.dot(k, freq.vector))
        margin = -3.0 * math.pi * r * float(weight(order)) - math.log(abs(divisor))
        if margin >= 0.0 and (not modes or order > sum(abs(c) for c in modes[-1].k)):
            modes.append(ResonantMode(k=k, divisor=divisor, log_margin=margin))
            logger.debug("resonant mode k=%s |k|=%d divisor=%.3e margin=%.3f", k, order, divisor, margin)
        if len(modes) == count:
            break
    if len(modes) < count:
        raise InsufficientResonancesError(len(modes), count)

    C = 2.0 * sum(math.exp(-math.pi * r * float(weight(sum(abs(c) for c in m.k)))) for m in modes)
    return ResonanceChain(freq=freq, weight=weight, r=r, modes=tuple(modes), C=C, limsup_ratio=top)


def build_counterexample(chain: ResonanceChain, rho: float, eps: float) -> tuple[FourierMatrixSeries, CocycleSpec]:
    """u as the scalar series u·I₂ and the cocycle (ω, ρJ + (u − ρ)J)."""
    if eps < 0:
        raise DomainError("eps must be >= 0", eps)
    d = chain.freq.d
    coefficients = {(0,) * d: complex(rho)}
    if eps > 0:
        if not chain.modes:
            raise InputError("an empty chain cannot carry a perturbation")
        for m in chain.modes:
            coefficients[m.k] = complex(eps / chain.C * m.divisor)
    u = scalar_times_matrix(d, coefficients, np.eye(2))
    deviation = {k: c for k, c in coefficients.items() if any(k)}
    F = scalar_times_matrix(d, deviation, J) if deviation else FourierMatrixSeries.zero(d)
    return u, CocycleSpec(freq=chain.freq, A=rho * J, F=F, r=chain.r)


@dataclass
class NonsolvabilityEvidence:
    solvable: bool
    coefficients: list[dict]
    expected_modulus: float | None
    max_deviation: float
    l1_partial_sums: list[float]
    l2_lower_bounds: list[float]
    grid_lower_bounds: list[float]
    non_decaying: bool
    kam_failure: dict | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "solvable": self.solvable,
            "coefficients": self.coefficients,
            "expected_modulus": self.expected_modulus,
            "max_deviation": self.max_deviation,
            "l1_partial_sums": self.l1_partial_sums,
            "l2_lower_bounds": self.l2_lower_bounds,
            "grid_lower_bounds": self.grid_lower_bounds,
            "non_decaying": self.non_decaying,
            "kam_failure": self.kam_failure,
        }


def certify_nonsolvability(
    u: FourierMatrixSeries,
    freq: Frequency,
    chain: ResonanceChain,
    eps: float | None = None,
    grid_points: int = 256,
    seed: int = 0,
) -> NonsolvabilityEvidence:
    """
    Formal solution v̂(k) = û(k)/(2πik·ω) of ∂_ω v = u − ρ on the chain, its moduli against
    εC⁻¹ and lower bounds on the sup norms of its partial sums.
    """
    d = freq.d
    u_hat = {k: complex(c[0, 0]) for k, c in u.items() if any(k)}
    if not u_hat:
        return NonsolvabilityEvidence(True, [], 0.0, 0.0, [], [], [], False)

    rows = []
    v_hat = {}
    for m in chain.modes:
        uk = u_hat.get(m.k, 0j)
        vk = uk / (1j * m.divisor)
        v_hat[m.k] = vk
        rows.append({
            "k": list(m.k),
            "u_hat": [uk.real, uk.imag],
            "v_hat": [vk.real, vk.imag],
            "modulus": abs(vk),
        })
    moduli = np.array([row["modulus"] for row in rows])
    expected = eps / chain.C if eps is not None else float(moduli[0])
    deviation = float(np.max(np.abs(moduli - expected)))

    rng = np.random.default_rng(seed)
    thetas = rng.random((grid_points, d))
    l1, l2, grid = [], [], []
    partial: dict = {}
    for j, m in enumerate(chain.modes, start=1):
        partial[m.k] = v_hat[m.k] * np.eye(2)
        l1.append(float(moduli[:j].sum()))
        # both ±k_j carry |v̂|, so the L² norm of the real partial sum is sqrt(2Σ|v̂|²)
        l2.append(float(math.sqrt(2.0 * float(np.sum(moduli[:j] ** 2)))))
        values = evaluate_many(from_modes(d, partial, real_symmetric=True), thetas)
        grid.append(float(np.max(np.abs(values[:, 0, 0]))))

    non_decaying = bool(moduli[-1] >= DECAY_RATIO * moduli[0])
    evidence = NonsolvabilityEvidence(
        solvable=False,
        coefficients=rows,
        expected_modulus=expected,
        max_deviation=deviation,
        l1_partial_sums=l1,
        l2_lower_bounds=l2,
        grid_lower_bounds=grid,
        non_decaying=non_decaying,
    )
    logger.info("formal solution on %d resonant modes: |v̂| = %.6g, non-decaying=%s", len(rows), expected, non_decaying)
    return evidence


# —— Liouville-type frequencies ——

def liouville_frequency(partial_quotients, digits: int = CF_DIGITS) -> Frequency:
    """ω = (1, x), x = [0; a₁, …, a_n, 1, 1, …] (golden tail keeps x irrational)."""
    quotients = [int(a) for a in partial_quotients]
    if not quotients or any(a < 1 for a in quotients):
        raise InputError("partial quotients must be positive integers")
    with mpmath.workdps(digits):
        t = (1 + mpmath.sqrt(5)) / 2
        for a in reversed(quotients):
            t = a + 1 / t
        x = 1 / t
        value = float(x)
    return Frequency((1.0, value), name="liouville[" + ",".join(str(a) for a in quotients) + "]")


def liouville_program(n: int, seed_q: int = 1, max_quotient: int = 10**8) -> list[int]:
    """a_{j+1} = min(⌈e^{q_j}⌉, max_quotient) with q₀ = seed_q and q_{j+1} = a_{j+1}q_j + q_{j−1}."""
    if n < 1:
        raise DomainError("n must be >= 1", n)
    quotients = []
    q_prev, q = 0, int(seed_q)
    with mpmath.workdps(CF_DIGITS):
        for _ in range(n):
            a = int(mpmath.ceil(mpmath.exp(q))) if q < 40 else max_quotient
            a = min(a, max_quotient)
            quotients.append(a)
            q_prev, q = q, a * q + q_prev
    return quotients
