"""
Parameter schedule of the KAM iteration and the small-divisor guard.

    ε_ν = 4^{−ν}ε,  N_ν = Ψ⁻¹(2^ν Ψ(N₀)),  σ_ν = 3 ln2 / (πΛ(N_ν)),  r_{ν+1} = r_ν − σ_ν

N₀ is the smallest tabulated integer whose Λ-BR tail is at most πr/6 and whose radius
budget Σ_{ν<steps} σ_ν + (3/π)·tail(N_last) stays within r/2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from arithmetics import PsiFunction, TWO_PI, canonical_mask, lattice_shell, psi_inverse
from errors import ConditionError, DomainError, InputError, ScheduleError
from weights import WeightSpec

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 12
GAUSS_ORDER = 12
LN2 = math.log(2.0)


def sigma_for(weight: WeightSpec, N: float) -> float:
    return 3.0 * LN2 / (math.pi * float(weight(N)))


def max_admissible_eps(alpha: float, psi: PsiFunction, N0: int) -> float:
    """min(α/4, 1/(2⁸Ψ(N₀)))."""
    return min(alpha / 4.0, 1.0 / (2.0**8 * psi.value(N0)))


# —— Λ-BR tails on the table ——

def _lambda_br_integrand(weight: WeightSpec, psi: PsiFunction, v):
    lam = np.asarray(weight(v), dtype=float)
    return np.asarray(weight.derivative(v), dtype=float) * np.asarray(psi.log_psi(v), dtype=float) / (lam * lam)


def _power_law_tail(weight: WeightSpec, psi: PsiFunction) -> float:
    """∫_{Kmax}^∞ from a power law fitted to the integrand over the last decade."""
    v_hi = float(psi.kmax)
    v_lo = max(1.0, v_hi / 10.0)
    g_hi = float(_lambda_br_integrand(weight, psi, v_hi))
    if g_hi <= 0.0:
        return 0.0
    g_lo = float(_lambda_br_integrand(weight, psi, v_lo))
    if v_lo >= v_hi or g_lo <= 0.0:
        return math.inf
    p = math.log(g_lo / g_hi) / math.log(v_hi / v_lo)
    return g_hi * v_hi / (p - 1.0) if p > 1.0 else math.inf


def lambda_br_tails(weight: WeightSpec, psi: PsiFunction) -> np.ndarray:
    """tails[K − 1] = ∫_K^∞ Λ′(v) lnΨ(v) / Λ(v)² dv for K = 1..Kmax."""
    beyond = _power_law_tail(weight, psi)
    if psi.kmax < 2:
        return np.array([beyond])
    nodes, gauss_weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    starts = np.arange(1, psi.kmax, dtype=float)
    v = starts[:, None] + 0.5 * (nodes[None, :] + 1.0)
    segments = 0.5 * np.sum(_lambda_br_integrand(weight, psi, v) * gauss_weights[None, :], axis=1)
    suffix = np.cumsum(segments[::-1])[::-1]
    return np.append(suffix + beyond, beyond)


def _levels(psi: PsiFunction, n0: int, steps: int) -> list[float]:
    base = psi.value(n0)
    return [float(n0)] + [psi_inverse(psi, 2.0**nu * base) for nu in range(1, steps)]


def choose_n0(r: float, weight: WeightSpec, psi: PsiFunction, max_steps: int) -> tuple[int, float]:
    """Smallest tabulated N₀ meeting the tail condition and the radius budget; returns (N₀, tail)."""
    if not r > 0:
        raise DomainError("radius must be positive", r)
    if max_steps < 1:
        raise DomainError("max_steps must be >= 1", max_steps)
    tails = lambda_br_tails(weight, psi)
    target = math.pi * r / 6.0
    candidates = np.nonzero(tails <= target)[0]
    if not candidates.size:
        smallest = float(np.min(tails))
        raise ConditionError(
            f"Λ-BR tail never drops below πr/6 = {target:.4g} on the table (smallest {smallest:.4g})",
            smallest_tail=smallest,
        )
    for n0 in range(int(candidates[0]) + 1, psi.kmax + 1):
        if tails[n0 - 1] > target:
            continue
        levels = _levels(psi, n0, max_steps)
        if levels[-1] > psi.kmax:
            raise ScheduleError(
                f"N_{max_steps - 1} = {levels[-1]:.1f} lies beyond Kmax = {psi.kmax}; raise Kmax or lower max_steps"
            )
        spent = sum(sigma_for(weight, N) for N in levels)
        after = 3.0 / math.pi * float(tails[int(math.floor(levels[-1])) - 1])
        if spent + after <= r / 2.0:
            return n0, float(tails[n0 - 1])
    raise ScheduleError(f"no N₀ <= {psi.kmax} keeps Σσ_ν within r/2 = {r / 2.0:.4g}")


# —— Schedule ——

@dataclass(frozen=True)
class ScheduleLevel:
    nu: int
    eps: float
    N: float
    psi_N: float
    sigma: float
    r: float

    @property
    def r_next(self) -> float:
        return self.r - self.sigma

    @property
    def order(self) -> int:
        """Integer truncation order floor(N_ν)."""
        return int(math.floor(self.N + 1e-9))

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "eps": self.eps,
            "N": self.N,
            "psi_N": self.psi_N,
            "sigma": self.sigma,
            "r": self.r,
            "r_next": self.r_next,
        }


@dataclass(frozen=True, eq=False)
class KamSchedule:
    r: float
    eps0: float
    alpha0: float
    N0: int
    weight: WeightSpec
    psi: PsiFunction
    levels: tuple[ScheduleLevel, ...]
    thresholds: dict = field(default_factory=dict)

    @property
    def max_steps(self) -> int:
        return len(self.levels)

    def level(self, nu: int) -> ScheduleLevel:
        return self.levels[nu]

    @property
    def sigma_sum(self) -> float:
        return float(sum(level.sigma for level in self.levels))

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "eps0": self.eps0,
            "alpha0": self.alpha0,
            "N0": self.N0,
            "weight": self.weight.label,
            "kmax": self.psi.kmax,
            "sigma_sum": self.sigma_sum,
            "thresholds": dict(self.thresholds),
            "levels": [level.to_dict() for level in self.levels],
        }


def build_schedule(
    r: float,
    eps: float,
    alpha: float,
    weight: WeightSpec,
    psi: PsiFunction,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> KamSchedule:
    if not isinstance(psi, PsiFunction):
        raise InputError("the KAM schedule needs a Ψ enumerated from the frequency, not an analytic preset")
    for name, value in (("r", r), ("eps", eps), ("alpha", alpha)):
        if not value > 0:
            raise DomainError(f"{name} must be positive", value)

    n0, tail = choose_n0(r, weight, psi, max_steps)
    eps_max = max_admissible_eps(alpha, psi, n0)
    if eps > eps_max * (1.0 + 1e-12):
        raise ScheduleError(
            f"ε = {eps:.4g} exceeds the admissible {eps_max:.4g} (min of α/4 and 1/(2⁸Ψ(N₀)) with N₀ = {n0})",
            max_admissible_eps=eps_max,
        )

    psi0 = psi.value(n0)
    levels = []
    radius = r
    for nu, N in enumerate(_levels(psi, n0, max_steps)):
        sigma = sigma_for(weight, N)
        levels.append(ScheduleLevel(nu=nu, eps=eps / 4.0**nu, N=N, psi_N=2.0**nu * psi0, sigma=sigma, r=radius))
        radius -= sigma

    schedule = KamSchedule(
        r=r,
        eps0=eps,
        alpha0=alpha,
        N0=n0,
        weight=weight,
        psi=psi,
        levels=tuple(levels),
        thresholds={
            "max_admissible_eps": eps_max,
            "alpha_over_4": alpha / 4.0,
            "inverse_256_psi_N0": 1.0 / (2.0**8 * psi0),
            "lambda_br_tail_N0": tail,
            "pi_r_over_6": math.pi * r / 6.0,
            "sigma_budget": r / 2.0,
        },
    )
    logger.info(
        "schedule: N0=%d Ψ(N0)=%.6g ε=%.4g (max %.4g) Σσ=%.5g over %d steps, N_last=%.2f",
        n0, psi0, eps, eps_max, schedule.sigma_sum, max_steps, levels[-1].N,
    )
    return schedule


# —— Small-divisor guard ——

@dataclass(frozen=True)
class GuardResult:
    ok: bool
    threshold: float
    divisor: float
    witness: tuple[int, ...]
    sign: int
    drift: float

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "threshold": self.threshold,
            "divisor": self.divisor,
            "witness": list(self.witness),
            "sign": self.sign,
            "drift": self.drift,
        }


def small_divisor_guard(
    alpha_nu: float,
    rho: float,
    freq,
    psi: PsiFunction,
    N: int,
    psi_N: float | None = None,
) -> GuardResult:
    """
    |2α_ν ± 2πk·ω| > 1/(2Ψ(N)) for all 0 < |k| <= N. psi_N overrides Ψ(N) when the level
    N_ν is not an integer. drift records α_ν − ρ.
    """
    if not 1 <= N <= psi.kmax:
        raise DomainError(f"N must lie in 1..{psi.kmax}", N)
    threshold = 1.0 / (2.0 * (psi.value(N) if psi_N is None else psi_N))
    best = (math.inf, (), 0)
    for shell in range(1, N + 1):
        ks = lattice_shell(freq.d, shell)
        ks = ks[canonical_mask(ks)]
        phase = TWO_PI * (ks @ freq.vector)
        for sign in (1, -1):
            div = np.abs(2.0 * alpha_nu + sign * phase)
            i = int(np.argmin(div))
            if div[i] < best[0]:
                best = (float(div[i]), tuple(int(c) for c in ks[i]), sign)
    divisor, witness, sign = best
    result = GuardResult(
        ok=divisor > threshold,
        threshold=threshold,
        divisor=divisor,
        witness=witness,
        sign=sign,
        drift=float(alpha_nu - rho),
    )
    if not result.ok:
        logger.warning("small-divisor guard fails at k=%s: |2α%+d·2πk·ω| = %.3e <= %.3e", witness, sign, divisor, threshold)
    return result
