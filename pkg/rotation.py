"""
Fibered rotation number and maximal Lyapunov exponent of x′ = (A + F(tω))x.

The angle ODE is φ′ = 2a cosφ sinφ − (b + c)cos²φ + b for A + F = [[a, b], [c, −a]],
integrated with classic RK4 from φ(0) = 0. Coefficients are precomputed on the
half-step grid in chunks; the time stepping itself is a plain float loop.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from arithmetics import Frequency
from errors import InputError, IntegrationError, PreconditionError
from fourier import FourierMatrixSeries, evaluate_many, sup_norm_bound
from mat2 import op_norm, op_norms

logger = logging.getLogger(__name__)

# Bound on step·(‖A‖ + |F|₀)
STEP_BOUND = 0.1
# Time between QR renormalizations of the matrix flow
RENORM_INTERVAL = 10.0
# Steps whose coefficients are precomputed at once
CHUNK_STEPS = 20_000
OVERFLOW = 1e300
TRACE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CocycleSpec:
    freq: Frequency
    A: np.ndarray
    F: FourierMatrixSeries
    r: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.shape != (2, 2):
            raise InputError("constant part must be a 2x2 matrix")
        if self.F.d != self.freq.d:
            raise InputError(f"perturbation has d={self.F.d}, frequency has d={self.freq.d}")
        scale = 1.0 + op_norm(A) + sup_norm_bound(self.F)
        if abs(A[0, 0] + A[1, 1]) > TRACE_TOL * scale:
            raise InputError("constant part must be traceless")
        if len(self.F):
            traces = np.abs(self.F.values[:, 0, 0] + self.F.values[:, 1, 1])
            if float(traces.max()) > TRACE_TOL * scale:
                raise InputError("perturbation must take values in sl(2)")
        if not self.r > 0:
            raise InputError(f"radius must be positive, got {self.r}")
        object.__setattr__(self, "A", A)

    @property
    def sup_bound(self) -> float:
        """‖A‖ + |F|₀ (Wiener bound)."""
        return op_norm(self.A) + sup_norm_bound(self.F)

    def matrices(self, times: np.ndarray) -> np.ndarray:
        """A + F(tω) for each t, shape (m, 2, 2), real."""
        thetas = np.outer(times, self.freq.vector)
        return self.A[None, :, :] + np.real(evaluate_many(self.F, thetas))


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    horizon: float
    error_indicator: float
    raw: float
    half_horizon_value: float
    step: float
    method: str = "rk4+richardson"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "horizon": self.horizon,
            "error_indicator": self.error_indicator,
            "raw": self.raw,
            "half_horizon_value": self.half_horizon_value,
            "step": self.step,
            "method": self.method,
        }


def _grid(horizon: float, step: float) -> tuple[int, float]:
    """Even step count n and the adjusted step T/n."""
    if not horizon > 0:
        raise InputError(f"horizon must be positive, got {horizon}")
    if not step > 0:
        raise InputError(f"step must be positive, got {step}")
    n = 2 * max(1, math.ceil(horizon / (2.0 * step)))
    return n, horizon / n


def _check_step(c: CocycleSpec, h: float) -> None:
    bound = c.sup_bound
    if h * bound > STEP_BOUND:
        raise PreconditionError(f"step {h:.3g} too large: step·(‖A‖+|F|₀) = {h * bound:.3g} > {STEP_BOUND}")


def _chunks(c: CocycleSpec, n: int, h: float):
    """Yield (first_step, matrices on the half grid of steps first..first+len−1)."""
    for lo in range(0, n, CHUNK_STEPS):
        hi = min(n, lo + CHUNK_STEPS)
        times = (np.arange(2 * lo, 2 * hi + 1) * 0.5) * h
        yield lo, c.matrices(times)


def _angle_flow(c: CocycleSpec, n: int, h: float) -> tuple[float, float]:
    """φ at n/2 and n steps."""
    phi = 0.0
    phi_half = math.nan
    half = n // 2
    for lo, mats in _chunks(c, n, h):
        a = mats[:, 0, 0].tolist()
        b = mats[:, 0, 1]
        cc = mats[:, 1, 0]
        s = (0.5 * (b + cc)).tolist()
        m = (0.5 * (b - cc)).tolist()
        for j in range(len(a) // 2):
            if lo + j == half:
                phi_half = phi
            i = 2 * j
            # φ′ = a sin2φ − s cos2φ + m with s = (b+c)/2, m = (b−c)/2
            x = 2.0 * phi
            k1 = a[i] * math.sin(x) - s[i] * math.cos(x) + m[i]
            x = 2.0 * (phi + 0.5 * h * k1)
            k2 = a[i + 1] * math.sin(x) - s[i + 1] * math.cos(x) + m[i + 1]
            x = 2.0 * (phi + 0.5 * h * k2)
            k3 = a[i + 1] * math.sin(x) - s[i + 1] * math.cos(x) + m[i + 1]
            x = 2.0 * (phi + h * k3)
            k4 = a[i + 2] * math.sin(x) - s[i + 2] * math.cos(x) + m[i + 2]
            phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if half == n:
        phi_half = phi
    return phi_half, phi


def fibered_rotation_number(c: CocycleSpec, horizon: float, step: float) -> RotationEstimate:
    """φ(T)/T refined as 2ρ(T) − ρ(T/2); error_indicator = |ρ(T) − ρ(T/2)|."""
    n, h = _grid(horizon, step)
    _check_step(c, h)
    phi_half, phi = _angle_flow(c, n, h)
    rho_full = phi / horizon
    rho_half = phi_half / (0.5 * horizon)
    estimate = RotationEstimate(
        value=2.0 * rho_full - rho_half,
        horizon=float(horizon),
        error_indicator=abs(rho_full - rho_half),
        raw=rho_full,
        half_horizon_value=rho_half,
        step=h,
    )
    logger.debug("rotation number at T=%g: %.12g (±%.2e)", horizon, estimate.value, estimate.error_indicator)
    return estimate


def rotation_scan(c: CocycleSpec, horizons, step: float, n_jobs: int = 1) -> list[RotationEstimate]:
    horizons = [float(t) for t in horizons]
    if not horizons:
        return []
    return list(Parallel(n_jobs=n_jobs)(delayed(fibered_rotation_number)(c, t, step) for t in horizons))


# —— Lyapunov exponent ——

def lyapunov_exponent(
    freq: Frequency,
    G: CocycleSpec,
    horizon: float,
    step: float,
    renorm_interval: float = RENORM_INTERVAL,
) -> float:
    """
    (1/T)·Σ log|R₁₁| from QR renormalizations of the matrix flow X′ = G(tω)X.
    The flow starts from a rotation by one radian so the first column is generic.
    """
    if freq.omega != G.freq.omega:
        raise InputError("frequency does not match the cocycle")
    n, h = _grid(horizon, step)
    _check_step(G, h)
    every = max(1, int(round(renorm_interval / h)))

    c1, s1 = math.cos(1.0), math.sin(1.0)
    x00, x01, x10, x11 = c1, -s1, s1, c1
    log_sum = 0.0
    done = 0

    def renormalize(t: float) -> None:
        nonlocal x00, x01, x10, x11, log_sum
        X = np.array([[x00, x01], [x10, x11]])
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > OVERFLOW:
            raise IntegrationError("matrix flow overflowed before renormalization", {"t": t, "interval": renorm_interval})
        Q, Rm = np.linalg.qr(X)
        log_sum += math.log(abs(Rm[0, 0]))
        # keep Q's column orientation aligned with the flow
        signs = np.sign(np.diag(Rm))
        signs[signs == 0] = 1.0
        Q = Q * signs
        x00, x01, x10, x11 = Q[0, 0], Q[0, 1], Q[1, 0], Q[1, 1]

    for lo, mats in _chunks(G, n, h):
        m = mats.reshape(len(mats), 4).T.tolist()
        g00, g01, g10, g11 = m
        for j in range((len(g00) - 1) // 2):
            i = 2 * j
            stages = []
            y00, y01, y10, y11 = x00, x01, x10, x11
            for idx, frac in ((i, 0.0), (i + 1, 0.5), (i + 1, 0.5), (i + 2, 1.0)):
                if stages:
                    p = stages[-1]
                    y00 = x00 + frac * h * p[0]
                    y01 = x01 + frac * h * p[1]
                    y10 = x10 + frac * h * p[2]
                    y11 = x11 + frac * h * p[3]
                a, b, c, d = g00[idx], g01[idx], g10[idx], g11[idx]
                stages.append((a * y00 + b * y10, a * y01 + b * y11, c * y00 + d * y10, c * y01 + d * y11))
            k1, k2, k3, k4 = stages
            w = h / 6.0
            x00 += w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            x01 += w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            x10 += w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            x11 += w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
            done = lo + j + 1
            if done % every == 0 or done == n:
                renormalize(done * h)
    value = log_sum / horizon
    logger.debug("Lyapunov exponent at T=%g: %.6g", horizon, value)
    return value


@dataclass(frozen=True)
class LyapunovRegularity:
    base: float
    perturbed: float
    delta: float
    claimed_bound: float
    sharper_bound: float | None
    difference: float
    ok: bool

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "perturbed": self.perturbed,
            "delta": self.delta,
            "claimed_bound": self.claimed_bound,
            "sharper_bound": self.sharper_bound,
            "difference": self.difference,
            "ok": self.ok,
        }


def lyapunov_regularity(
    cocycle: CocycleSpec,
    perturbed: CocycleSpec,
    horizon: float,
    step: float,
    Y: FourierMatrixSeries | None = None,
    grid_points: int = 512,
    seed: int = 0,
    tol: float = 1e-2,
    base: float | None = None,
) -> LyapunovRegularity:
    """
    |L(A′) − L(A+F)| against 4·sup_θ‖A′(θ) − (A+F)(θ)‖ for a reducible A+F. With the
    conjugacy Y the sharper sup_θ‖Y⁻¹(A′−(A+F))Y‖ is reported as well.
    """
    rng = np.random.default_rng(seed)
    thetas = rng.random((grid_points, cocycle.freq.d))
    diff = _on_torus(perturbed, thetas) - _on_torus(cocycle, thetas)
    delta = float(np.max(op_norms(diff)))

    sharper = None
    if Y is not None:
        Yv = np.real(evaluate_many(Y, thetas))
        sharper = float(np.max(op_norms(np.linalg.inv(Yv) @ diff @ Yv)))

    if base is None:
        base = lyapunov_exponent(cocycle.freq, cocycle, horizon, step)
    moved = lyapunov_exponent(perturbed.freq, perturbed, horizon, step)
    difference = abs(moved - base)
    record = LyapunovRegularity(
        base=base,
        perturbed=moved,
        delta=delta,
        claimed_bound=4.0 * delta,
        sharper_bound=sharper,
        difference=difference,
        ok=difference <= 4.0 * delta + tol,
    )
    if not record.ok:
        logger.warning("Lyapunov regularity bound missed: |ΔL| = %.3e > 4δ = %.3e", difference, 4.0 * delta)
    return record


def _on_torus(c: CocycleSpec, thetas: np.ndarray) -> np.ndarray:
    return c.A[None, :, :] + np.real(evaluate_many(c.F, thetas))
