"""
Small-divisor arithmetic of a frequency vector ω.

Ψ(K) = max{ |2πk·ω|⁻¹ : 0 < |k| <= K } by exhaustive lattice enumeration over
shells |k| = const (|k| is the ℓ¹ norm), with a continuous extension that is
piecewise linear in (v, ln Ψ) and log-linear beyond Kmax.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from errors import DomainError, InputError, ResonantFrequencyError, ResourceBudgetError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# |k·ω| below this is an exact resonance
RESONANCE_TOL = 1e-15
# Default cap on the number of enumerated lattice points
LATTICE_BUDGET = 50_000_000
# Shells handed to one worker at a time
SHELLS_PER_TASK = 64
# Equality in the rotation condition passes up to this slack
ROTATION_EQUALITY_TOL = 1e-12


@dataclass(frozen=True)
class Frequency:
    omega: tuple[float, ...]
    name: str | None = None

    def __post_init__(self):
        if len(self.omega) < 1:
            raise InputError("frequency needs at least one component")
        if not all(math.isfinite(w) for w in self.omega):
            raise InputError("frequency components must be finite")

    @property
    def d(self) -> int:
        return len(self.omega)

    @cached_property
    def vector(self) -> np.ndarray:
        return np.asarray(self.omega, dtype=float)

    @classmethod
    def of(cls, *components: float, name: str | None = None) -> "Frequency":
        return cls(tuple(float(c) for c in components), name=name)

    @classmethod
    def golden(cls) -> "Frequency":
        return cls((1.0, (1.0 + math.sqrt(5.0)) / 2.0), name="golden")


# —— Lattice enumeration ——

@lru_cache(maxsize=4096)
def _shell_cached(d: int, K: int) -> np.ndarray:
    if d == 1:
        return np.array([[K], [-K]], dtype=np.int64) if K > 0 else np.zeros((1, 1), dtype=np.int64)
    parts = []
    for k1 in range(-K, K + 1):
        rest = _shell_cached(d - 1, K - abs(k1))
        parts.append(np.column_stack([np.full(len(rest), k1, dtype=np.int64), rest]))
    out = np.concatenate(parts)
    out.setflags(write=False)
    return out


def lattice_shell(d: int, K: int) -> np.ndarray:
    """All k in Z^d with |k|₁ = K, one per row."""
    return _shell_cached(d, K)


def canonical_mask(ks: np.ndarray) -> np.ndarray:
    """True where the first nonzero component is positive (one of each ±k pair)."""
    nz = ks != 0
    first = np.argmax(nz, axis=1)
    lead = ks[np.arange(len(ks)), first]
    return lead > 0


def lattice_count(d: int, K: int) -> int:
    """Number of k with 0 < |k|₁ <= K."""
    return sum(2**i * math.comb(d, i) * math.comb(K, i) for i in range(0, d + 1)) - 1


def kmax_within_budget(d: int, budget: int) -> int:
    """Largest K with lattice_count(d, K) <= budget (0 if even K = 1 is too large)."""
    if d < 1:
        raise InputError(f"dimension must be >= 1, got {d}")
    if lattice_count(d, 1) > budget:
        return 0
    hi = 1
    while lattice_count(d, 2 * hi) <= budget:
        hi *= 2
    lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lattice_count(d, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _lex_first(ks: np.ndarray) -> np.ndarray:
    order = np.lexsort(ks.T[::-1])
    return ks[order[0]]


def _scan_shells(omega: np.ndarray, lo: int, hi: int) -> list[tuple[float, tuple[int, ...]]]:
    """(min |k·ω|, lexicographically first canonical minimizer) for shells lo..hi−1."""
    out = []
    d = omega.size
    for K in range(lo, hi):
        ks = lattice_shell(d, K)
        ks = ks[canonical_mask(ks)]
        values = np.abs(ks @ omega)
        m = float(values.min())
        witness = _lex_first(ks[values == m])
        out.append((m, tuple(int(c) for c in witness)))
    return out


def shell_minima(freq: Frequency, kmax: int, n_jobs: int = 1) -> list[tuple[float, tuple[int, ...]]]:
    chunks = [(lo, min(lo + SHELLS_PER_TASK, kmax + 1)) for lo in range(1, kmax + 1, SHELLS_PER_TASK)]
    results = Parallel(n_jobs=n_jobs)(delayed(_scan_shells)(freq.vector, lo, hi) for lo, hi in chunks)
    merged = [item for chunk in results for item in chunk]
    logger.debug("enumerated %d shells for ω=%s", len(merged), freq.omega)
    return merged


# —— Ψ ——

@dataclass(frozen=True, eq=False)
class PsiFunction:
    """
    Ψ tabulated on 1..Kmax with witnesses, plus the continuous extension.
    The extension is non-decreasing: flat on plateaus of the table, linear in ln Ψ on the
    unit ramps between them, and log-linear beyond Kmax with the slope of the last decade.
    """

    freq: Frequency
    table: np.ndarray
    witnesses: np.ndarray

    @property
    def kmax(self) -> int:
        return int(self.table.size)

    @cached_property
    def log_table(self) -> np.ndarray:
        return np.log(self.table)

    @cached_property
    def _knots(self) -> np.ndarray:
        return np.arange(1, self.kmax + 1, dtype=float)

    @cached_property
    def tail_slope(self) -> float:
        """Slope of ln Ψ per unit v used beyond Kmax."""
        lt = self.log_table
        if self.kmax < 2:
            return 0.0
        k_lo = max(1, self.kmax // 10)
        if self.kmax > k_lo:
            slope = (lt[-1] - lt[k_lo - 1]) / (self.kmax - k_lo)
            if slope > 0:
                return float(slope)
        return float(max(0.0, (lt[-1] - lt[0]) / (self.kmax - 1)))

    def value(self, K: int) -> float:
        """Table value Ψ(K)."""
        if not 1 <= K <= self.kmax:
            raise DomainError(f"K must lie in 1..{self.kmax}", K)
        return float(self.table[K - 1])

    def witness(self, K: int) -> tuple[int, ...]:
        if not 1 <= K <= self.kmax:
            raise DomainError(f"K must lie in 1..{self.kmax}", K)
        return tuple(int(c) for c in self.witnesses[K - 1])

    def log_psi(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v < 1.0 - 1e-12):
            raise DomainError("Ψ is defined on [1, inf)", float(np.min(v)))
        lt = self.log_table
        out = np.interp(v, self._knots, lt)
        beyond = v > self.kmax
        if np.any(beyond):
            out = np.where(beyond, lt[-1] + self.tail_slope * (v - self.kmax), out)
        return out if out.ndim else float(out)

    def __call__(self, v):
        return np.exp(self.log_psi(v))

    def dlog_psi(self, v):
        v = np.asarray(v, dtype=float)
        slopes = np.append(np.diff(self.log_table), self.tail_slope)
        idx = np.clip(np.floor(v).astype(np.int64) - 1, 0, self.kmax - 1)
        out = np.where(v >= self.kmax, self.tail_slope, slopes[idx])
        return out if out.ndim else float(out)

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        """Ends of the unit ramps where ln Ψ changes slope, inside (lo, hi)."""
        rises = np.nonzero(np.diff(self.log_table) > 0)[0] + 1
        pts = np.union1d(rises, rises + 1).astype(float)
        pts = np.append(pts, float(self.kmax))
        return [float(p) for p in pts if lo < p < hi]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"K": np.arange(1, self.kmax + 1), "psi": self.table})
        for i in range(self.witnesses.shape[1]):
            frame[f"k{i + 1}"] = self.witnesses[:, i]
        return frame


def estimate_psi(freq: Frequency, kmax: int, *, budget: int = LATTICE_BUDGET, n_jobs: int = 1) -> PsiFunction:
    """Exhaustive enumeration of 0 < |k| <= kmax."""
    if kmax < 1:
        raise DomainError("Kmax must be >= 1", kmax)
    needed = lattice_count(freq.d, kmax)
    if needed > budget:
        raise ResourceBudgetError(needed, budget)

    minima = shell_minima(freq, kmax, n_jobs=n_jobs)
    table = np.empty(kmax)
    witnesses = np.empty((kmax, freq.d), dtype=np.int64)
    best, best_k = math.inf, None
    for i, (m, k) in enumerate(minima):
        if m < RESONANCE_TOL:
            raise ResonantFrequencyError(k)
        # strict: the earlier (shorter) minimizer keeps the witness
        if m < best:
            best, best_k = m, k
        table[i] = 1.0 / (TWO_PI * best)
        witnesses[i] = best_k
    table.setflags(write=False)
    witnesses.setflags(write=False)
    logger.info("Ψ tabulated for ω=%s up to K=%d: Ψ(Kmax)=%.6g", freq.omega, kmax, table[-1])
    return PsiFunction(freq=freq, table=table, witnesses=witnesses)


def psi_inverse(psi: PsiFunction, y: float) -> float:
    """
    Largest v with extension(v) <= y, so that extension(psi_inverse(y)) == y.
    On plateaus of the table this is the right end of the plateau.
    """
    lt = psi.log_table
    if not y >= psi.table[0] * (1.0 - 1e-15):
        raise DomainError("psi_inverse needs y >= Ψ(1)", y)
    ly = math.log(max(y, psi.table[0]))
    if ly >= lt[-1]:
        if psi.tail_slope <= 0.0:
            if ly == lt[-1]:
                return float(psi.kmax)
            raise DomainError("Ψ is flat beyond the table; cannot invert", y)
        return float(psi.kmax + (ly - lt[-1]) / psi.tail_slope)
    # the last knot with ln Ψ <= ly; the next knot is strictly above
    i = int(np.searchsorted(lt, ly, side="right")) - 1
    return float((i + 1) + (ly - lt[i]) / (lt[i + 1] - lt[i]))


def write_psi_csv(psi: PsiFunction, path: str) -> None:
    psi.to_frame().to_csv(path, index=False, float_format="%.17g")


# —— Analytic presets (condition checks only) ——

@dataclass(frozen=True)
class ExpPowerPsi:
    """Ψ(v) = exp(v^β)."""

    beta: float
    kmax: int | None = None

    @property
    def label(self) -> str:
        return f"exp-power:{self.beta:g}"

    def log_psi(self, v):
        return np.asarray(v, dtype=float) ** self.beta if np.ndim(v) else float(v) ** self.beta

    def dlog_psi(self, v):
        v = np.asarray(v, dtype=float)
        out = self.beta * v ** (self.beta - 1.0)
        return out if out.ndim else float(out)

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        return []


@dataclass(frozen=True)
class PowerPsi:
    """Ψ(v) = v^τ."""

    tau: float
    kmax: int | None = None

    @property
    def label(self) -> str:
        return f"power:{self.tau:g}"

    def log_psi(self, v):
        out = self.tau * np.log(np.asarray(v, dtype=float))
        return out if np.ndim(out) else float(out)

    def dlog_psi(self, v):
        out = self.tau / np.asarray(v, dtype=float)
        return out if np.ndim(out) else float(out)

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        return []


def psi_preset(text: str):
    """Parse `exp-power:<beta>` or `power:<tau>`."""
    kind, _, arg = text.strip().partition(":")
    try:
        value = float(arg)
    except ValueError as exc:
        raise InputError(f"bad Ψ preset parameter in '{text}'") from exc
    if kind == "exp-power" and value > 0:
        return ExpPowerPsi(value)
    if kind == "power" and value > 0:
        return PowerPsi(value)
    raise InputError(f"Ψ preset must be exp-power:<beta> or power:<tau> with a positive parameter, got '{text}'")


# —— Rotation condition ——

@dataclass(frozen=True)
class RotationConditionReport:
    ok: bool
    margin: float
    witness: tuple[int, ...]
    sign: int
    divisor: float
    K: int


def check_rotation_condition(rho: float, freq: Frequency, psi: PsiFunction, K: int) -> RotationConditionReport:
    """
    |2ρ ± 2πk·ω| >= 1/Ψ(K′) for all 0 < |k| <= K′ <= K. The strictest K′ for a given k is |k|,
    so the margin is min over k and ± of |2ρ ± 2πk·ω|·Ψ(|k|) − 1 (passes on equality).
    """
    if not 1 <= K <= psi.kmax:
        raise DomainError(f"K must lie in 1..{psi.kmax}", K)
    best = (math.inf, (), 0, math.nan)
    for shell in range(1, K + 1):
        ks = lattice_shell(freq.d, shell)
        ks = ks[canonical_mask(ks)]
        phase = TWO_PI * (ks @ freq.vector)
        bound = psi.value(shell)
        for sign in (1, -1):
            div = np.abs(2.0 * rho + sign * phase)
            margin = div * bound - 1.0
            i = int(np.argmin(margin))
            if margin[i] < best[0]:
                best = (float(margin[i]), tuple(int(c) for c in ks[i]), sign, float(div[i]))
    margin, witness, sign, divisor = best
    return RotationConditionReport(
        ok=margin >= -ROTATION_EQUALITY_TOL,
        margin=margin,
        witness=witness,
        sign=sign,
        divisor=divisor,
        K=K,
    )
