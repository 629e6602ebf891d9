"""
Weight functions Λ and the arithmetic conditions that pair a weight with an
approximating function Ψ.

Weights: analytic (Λ(v) = v), Gevrey-α (Λ(v) = v^(1/α)) or tabulated from a
two-column CSV (monotone piecewise-linear, one-sided finite-difference
derivative). The condition integrals are integrated on log-spaced blocks with
scipy's adaptive quadrature; verdicts are numerical evidence only.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol

import numpy as np
import pandas as pd
from scipy import integrate

from errors import DomainError, InputError

logger = logging.getLogger(__name__)

# —— Verdict thresholds ——

CONVERGES = "converges"
DIVERGES = "diverges"
INCONCLUSIVE = "inconclusive"

# Immediate convergence when the extrapolated tail is this small relative to the integral.
TAIL_TOL = 1e-6
# Share of the accumulated integral carried by the last block before "diverges" is considered.
LAST_BLOCK_SHARE = 0.10
# Blocks with ratio at or below this count as decaying.
DECAY_RATIO = 0.95
# Number of trailing blocks a trend has to hold over.
TREND_WINDOW = 3
# Partial integral beyond which a still-growing integral is called divergent.
CEILING = 1e8

PANELS_PER_BLOCK = 4
RATIO_SAMPLES = 64
QUAD_LIMIT = 200


class PsiLike(Protocol):
    """What the condition integrals need from an approximating function."""

    def log_psi(self, v): ...

    def dlog_psi(self, v): ...

    def breakpoints(self, lo: float, hi: float) -> list[float]: ...

    @property
    def kmax(self) -> int | None: ...


@dataclass(frozen=True)
class WeightSpec:
    """Λ on [1, ∞). Build with WeightSpec.analytic(), .gevrey(alpha) or .tabulated(grid, values)."""

    kind: str
    alpha: float = 1.0
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    source: str | None = None

    def __post_init__(self):
        if self.kind not in ("analytic", "gevrey", "tabulated"):
            raise InputError(f"unknown weight kind: {self.kind}")
        if self.kind == "gevrey" and not self.alpha >= 1.0:
            raise DomainError("Gevrey index must be >= 1", self.alpha)
        if self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            w = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or g.shape != w.shape or g.size < 2:
                raise InputError("weight table needs two equal-length columns with at least 2 rows")
            if np.any(np.diff(g) <= 0):
                raise InputError("weight table grid must be strictly increasing")
            if np.any(np.diff(w) < 0):
                raise InputError("weight table values must be non-decreasing")
            if g[0] > 1.0:
                raise DomainError("weight table must start at v <= 1", float(g[0]))
            # Open question settled: weights with Λ(1) < 1 are rejected, not rescaled.
            if float(np.interp(1.0, g, w)) < 1.0:
                raise DomainError("weight must satisfy Λ(1) >= 1", float(np.interp(1.0, g, w)))

    # —— Constructors ——

    @classmethod
    def analytic(cls) -> "WeightSpec":
        return cls(kind="analytic")

    @classmethod
    def gevrey(cls, alpha: float) -> "WeightSpec":
        return cls(kind="gevrey", alpha=float(alpha))

    @classmethod
    def tabulated(cls, grid, values, source: str | None = None) -> "WeightSpec":
        return cls(
            kind="tabulated",
            grid=tuple(float(x) for x in grid),
            values=tuple(float(x) for x in values),
            source=source,
        )

    @property
    def label(self) -> str:
        """Config-grammar form: analytic | gevrey:<alpha> | table:<path>."""
        if self.kind == "analytic":
            return "analytic"
        if self.kind == "gevrey":
            return f"gevrey:{self.alpha:g}"
        return f"table:{self.source or '<inline>'}"

    @cached_property
    def _grid(self) -> np.ndarray:
        return np.asarray(self.grid, dtype=float)

    @cached_property
    def _values(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @cached_property
    def _slopes(self) -> np.ndarray:
        return np.diff(self._values) / np.diff(self._grid)

    # —— Evaluation (no domain check; see eval_weight) ——

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "analytic":
            out = v.copy()
        elif self.kind == "gevrey":
            out = v ** (1.0 / self.alpha)
        else:
            g, w = self._grid, self._values
            out = np.interp(v, g, w)
            beyond = v > g[-1]
            if np.any(beyond):
                out = np.where(beyond, w[-1] + self._slopes[-1] * (v - g[-1]), out)
        return out if out.ndim else float(out)

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "analytic":
            out = np.ones_like(v)
        elif self.kind == "gevrey":
            out = (1.0 / self.alpha) * v ** (1.0 / self.alpha - 1.0)
        else:
            # forward difference of the segment containing v
            idx = np.clip(np.searchsorted(self._grid, v, side="right") - 1, 0, self._slopes.size - 1)
            out = self._slopes[idx]
        return out if np.ndim(out) else float(out)


def load_weight_table(path: str) -> WeightSpec:
    """Read a two-column CSV (v, Λ(v)); header optional."""
    df = pd.read_csv(path, header=None, comment="#")
    if df.shape[1] != 2:
        raise InputError(f"weight table {path} must have exactly two columns, found {df.shape[1]}")
    if not pd.api.types.is_numeric_dtype(df[0]):
        df = df.iloc[1:].astype(float)
    return WeightSpec.tabulated(df[0].to_numpy(float), df[1].to_numpy(float), source=path)


def parse_weight(text: str) -> WeightSpec:
    """Parse `analytic | gevrey:<alpha> | table:<path>`."""
    text = text.strip()
    if text == "analytic":
        return WeightSpec.analytic()
    kind, _, arg = text.partition(":")
    if kind == "gevrey" and arg:
        try:
            return WeightSpec.gevrey(float(arg))
        except ValueError as exc:
            raise InputError(f"bad Gevrey index: {arg}") from exc
    if kind == "table" and arg:
        return load_weight_table(arg)
    raise InputError(f"weight must be analytic, gevrey:<alpha> or table:<path>, got '{text}'")


def eval_weight(spec: WeightSpec, v):
    """Λ(v) for v >= 1 (scalar or array)."""
    arr = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 1.0):
        raise DomainError("weight is defined on [1, inf)", float(np.min(arr)) if arr.size else None)
    return spec(v)


# —— Subadditivity ——

@dataclass(frozen=True)
class SubadditivityReport:
    ok: bool
    worst_margin: float
    worst_pair: tuple[float, float]
    pairs_checked: int


# Margins this close to the worst one count as ties.
TIE_TOL = 1e-9


def subadditivity_margin(spec: WeightSpec, x: float, y: float) -> float:
    """Λ(x) + Λ(y) − Λ(x+y); negative means subadditivity fails at (x, y)."""
    return float(eval_weight(spec, x) + eval_weight(spec, y) - eval_weight(spec, x + y))


def verify_subadditivity(spec: WeightSpec, vmax: float, samples: int, tol: float = 1e-12) -> SubadditivityReport:
    if vmax < 2:
        raise DomainError("vmax must be >= 2", vmax)
    if samples < 1:
        raise DomainError("samples must be >= 1", samples)
    n = max(2, math.ceil(math.sqrt(2 * samples)))
    points = np.linspace(1.0, vmax - 1.0, n)
    if vmax <= 2000:
        points = np.union1d(points, np.arange(1.0, math.floor(vmax - 1.0) + 1.0))
    x, y = np.meshgrid(points, points, indexing="ij")
    mask = (x <= y) & (x + y <= vmax + 1e-12)
    x, y = x[mask], y[mask]
    lam_sum = spec(x + y)
    margin = spec(x) + spec(y) - lam_sum
    scaled = margin + tol * (1.0 + np.abs(lam_sum))
    # ties go to the most balanced pair, then the smallest sum
    worst = float(margin.min())
    near = np.flatnonzero(margin <= worst + TIE_TOL * (1.0 + abs(worst)))
    i = int(near[np.lexsort((x[near] + y[near], y[near] - x[near]))[0]])
    report = SubadditivityReport(
        ok=bool(np.all(scaled >= 0.0)),
        worst_margin=float(margin[i]),
        worst_pair=(float(x[i]), float(y[i])),
        pairs_checked=int(x.size),
    )
    if not report.ok:
        logger.warning("subadditivity fails for %s: margin %.3e at %s", spec.label, report.worst_margin, report.worst_pair)
    return report


# —— Condition integrals ——

@dataclass(frozen=True)
class ConditionSeries:
    """One condition on log-spaced blocks [edges[j], edges[j+1]]."""

    name: str
    edges: tuple[float, ...]
    contributions: tuple[float, ...]
    partials: tuple[float, ...]
    tails: tuple[float, ...]
    extrapolated_tail: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "edges": list(self.edges),
            "contributions": list(self.contributions),
            "partials": list(self.partials),
            "tails": list(self.tails),
            "extrapolated_tail": self.extrapolated_tail,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class ConditionReport:
    lambda_br_integral_tail: ConditionSeries
    br_equivalent_tail: ConditionSeries
    russmann_ratio: ConditionSeries
    quasi_analytic_tail: ConditionSeries
    v0: float
    vmax: float
    extrapolated: bool
    consistent: bool
    verdicts: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "v0": self.v0,
            "vmax": self.vmax,
            "extrapolated": self.extrapolated,
            "consistent": self.consistent,
            "verdicts": dict(self.verdicts),
            "lambda_br": self.lambda_br_integral_tail.to_dict(),
            "br_equivalent": self.br_equivalent_tail.to_dict(),
            "russmann_ratio": self.russmann_ratio.to_dict(),
            "quasi_analytic": self.quasi_analytic_tail.to_dict(),
        }


def block_edges(v0: float, vmax: float) -> np.ndarray:
    """Equal log-width blocks, one per decade (at least four blocks)."""
    n = max(4, math.ceil(math.log10(vmax / v0) - 1e-12))
    return np.geomspace(v0, vmax, n + 1)


def _integrate_block(fn, lo: float, hi: float, points: list[float]) -> float:
    total = 0.0
    panel_edges = np.geomspace(lo, hi, PANELS_PER_BLOCK + 1)
    for a, b in zip(panel_edges[:-1], panel_edges[1:]):
        inner = [p for p in points if a < p < b]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, _ = integrate.quad(
                fn, a, b, points=inner or None, limit=max(QUAD_LIMIT, 4 * len(inner) + 50)
            )
        total += value
    return total


def integral_verdict(contributions: np.ndarray, partials: np.ndarray) -> tuple[str, float]:
    """Three-way verdict from block contributions; also returns the extrapolated tail."""
    d = np.abs(np.asarray(contributions, dtype=float))
    if d.size < 2 or d[-1] == 0.0:
        return CONVERGES, 0.0
    prev = d[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(prev > 0, d[1:] / np.where(prev > 0, prev, 1.0), np.inf)
    window = ratios[-min(TREND_WINDOW, ratios.size):]
    q = float(ratios[-1])
    tail = d[-1] * q / (1.0 - q) if q < 1.0 else math.inf
    scale = max(float(np.max(np.abs(partials))), np.finfo(float).tiny)
    if tail <= TAIL_TOL * scale or bool(np.all(window <= DECAY_RATIO)):
        return CONVERGES, float(tail)
    share = d[-1] / float(np.sum(d))
    growing = contributions[-1] > 0
    if (share > LAST_BLOCK_SHARE and bool(np.all(window >= DECAY_RATIO))) or (partials[-1] > CEILING and growing):
        return DIVERGES, math.inf
    return INCONCLUSIVE, float(tail)


def _integral_series(name: str, fn, edges: np.ndarray, points: list[float]) -> ConditionSeries:
    contributions = np.array([_integrate_block(fn, a, b, points) for a, b in zip(edges[:-1], edges[1:])])
    partials = np.cumsum(contributions)
    verdict, tail = integral_verdict(contributions, partials)
    remaining = partials[-1] - partials + (tail if math.isfinite(tail) else 0.0)
    tails = remaining if math.isfinite(tail) else np.full_like(partials, math.inf)
    return ConditionSeries(
        name=name,
        edges=tuple(float(e) for e in edges),
        contributions=tuple(float(c) for c in contributions),
        partials=tuple(float(p) for p in partials),
        tails=tuple(float(t) for t in tails),
        extrapolated_tail=float(tail),
        verdict=verdict,
    )


def _block_max_ratio(spec: WeightSpec, psi: PsiLike, lo: float, hi: float) -> float:
    grid = np.union1d(np.geomspace(lo, hi, RATIO_SAMPLES), psi.breakpoints(lo, hi))
    ratio = np.asarray(psi.log_psi(grid), dtype=float) / np.asarray(spec(grid), dtype=float)
    return float(ratio.max())


def _ratio_series(spec: WeightSpec, psi: PsiLike, edges: np.ndarray) -> ConditionSeries:
    """Block maxima of lnΨ/Λ; the limsup decays when the trailing maxima keep falling."""
    samples = np.array([_block_max_ratio(spec, psi, a, b) for a, b in zip(edges[:-1], edges[1:])])
    window = samples[-TREND_WINDOW:]
    decreasing = bool(np.all(np.diff(window) < 0))
    if decreasing and window[-1] < DECAY_RATIO * window[0]:
        verdict = CONVERGES
    elif samples[-1] > 0 and samples[-1] >= DECAY_RATIO * float(samples[:-1].max()):
        verdict = DIVERGES
    else:
        verdict = INCONCLUSIVE
    return ConditionSeries(
        name="russmann_ratio",
        edges=tuple(float(e) for e in edges),
        contributions=tuple(float(s) for s in samples),
        partials=tuple(float(s) for s in samples),
        tails=tuple(float(s) for s in samples),
        extrapolated_tail=float(samples[-1]),
        verdict=verdict,
    )


def _check_monotone(psi: PsiLike, v0: float, vmax: float) -> None:
    grid = np.geomspace(v0, vmax, 400)
    values = np.asarray(psi.log_psi(grid), dtype=float)
    if np.any(~np.isfinite(values)) or np.any(np.diff(values) < -1e-12 * (1.0 + np.abs(values[1:]))):
        raise InputError("approximating function must be non-decreasing on the checked range")


def classify_conditions(spec: WeightSpec, psi: PsiLike, v0: float, vmax: float) -> ConditionReport:
    """Λ-BR, its BR form, the Λ-R ratio and the quasi-analytic integral on [v0, vmax]."""
    if not (v0 >= 1.0 and vmax > v0):
        raise DomainError("need 1 <= v0 < vmax", (v0, vmax))
    _check_monotone(psi, v0, vmax)
    edges = block_edges(v0, vmax)
    points = psi.breakpoints(v0, vmax)

    def lambda_br(v):
        lam = float(spec(v))
        return float(spec.derivative(v)) * float(psi.log_psi(v)) / (lam * lam)

    def br(v):
        return float(psi.dlog_psi(v)) / float(spec(v))

    def quasi(v):
        return float(spec(v)) / (v * v)

    lbr = _integral_series("lambda_br", lambda_br, edges, points)
    bre = _integral_series("br_equivalent", br, edges, points)
    qa = _integral_series("quasi_analytic", quasi, edges, [])
    rus = _ratio_series(spec, psi, edges)

    consistent = lbr.verdict == bre.verdict
    if not consistent:
        logger.warning("Λ-BR (%s) and BR-form (%s) verdicts disagree; both set inconclusive", lbr.verdict, bre.verdict)
        lbr = _replace_verdict(lbr, INCONCLUSIVE)
        bre = _replace_verdict(bre, INCONCLUSIVE)

    kmax = psi.kmax
    report = ConditionReport(
        lambda_br_integral_tail=lbr,
        br_equivalent_tail=bre,
        russmann_ratio=rus,
        quasi_analytic_tail=qa,
        v0=float(v0),
        vmax=float(vmax),
        extrapolated=kmax is not None and vmax > kmax,
        consistent=consistent,
        verdicts={
            "lambda_br": lbr.verdict,
            "br_equivalent": bre.verdict,
            "russmann": rus.verdict,
            "quasi_analytic": qa.verdict,
        },
    )
    logger.info("conditions for %s on [%g, %g]: %s", spec.label, v0, vmax, report.verdicts)
    return report


def _replace_verdict(series: ConditionSeries, verdict: str) -> ConditionSeries:
    return ConditionSeries(
        name=series.name,
        edges=series.edges,
        contributions=series.contributions,
        partials=series.partials,
        tails=series.tails,
        extrapolated_tail=series.extrapolated_tail,
        verdict=verdict,
    )


# —— Quasi-analytic route ——

@dataclass(frozen=True)
class QuasiAnalyticWitness:
    beta: float
    gamma: float
    delta: float
    sequence: tuple[int, ...]
    bound_partials: tuple[float, ...]
    dominating_exponent: float
    complete: bool


def quasi_analytic_sequence(spec: WeightSpec, beta: float, n_terms: int = 200, search_limit: int = 10_000) -> QuasiAnalyticWitness:
    """
    Greedy sequence v_n with 1 <= v_{n+1} − v_n <= max(1, n^δ) and Λ(v_n) > v_n^γ.

    If it can be continued, the BR form of the condition for Ψ = e^{v^β} is bounded by
    β Σ v_k^{β−1}(v_{k+1} − v_k)/Λ(v_k), dominated by Σ k^{−(1+γ−β−δ)}.
    """
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)", beta)
    gamma = (3.0 + beta) / 4.0
    delta = (1.0 - beta) / 4.0

    def good(v: int) -> bool:
        return float(spec(v)) > v**gamma

    start = next((v for v in range(1, search_limit + 1) if good(v)), None)
    if start is None:
        return QuasiAnalyticWitness(beta, gamma, delta, (), (), 1.0 + gamma - beta - delta, False)

    seq = [start]
    for n in range(1, n_terms):
        max_step = max(1, math.floor(n**delta))
        step = next((s for s in range(1, max_step + 1) if good(seq[-1] + s)), None)
        if step is None:
            break
        seq.append(seq[-1] + step)

    terms = [
        beta * seq[k] ** (beta - 1.0) * (seq[k + 1] - seq[k]) / float(spec(seq[k]))
        for k in range(len(seq) - 1)
    ]
    return QuasiAnalyticWitness(
        beta=beta,
        gamma=gamma,
        delta=delta,
        sequence=tuple(seq),
        bound_partials=tuple(float(x) for x in np.cumsum(terms)),
        dominating_exponent=1.0 + gamma - beta - delta,
        complete=len(seq) == n_terms,
    )
