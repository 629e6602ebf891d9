"""
The convergent KAM driver and the conjugacy residual oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from arithmetics import PsiFunction, check_rotation_condition
from errors import ConditionError, InputError, ScheduleError, StepFailure
from fourier import (
    FourierMatrixSeries,
    NormContext,
    add_constant,
    conjugate_by,
    directional_derivative,
    evaluate_many,
    inverse_neumann,
    multiply,
    right_multiply,
    subtract,
)
from mat2 import I2, J, op_norms, real_normal_form
from rotation import CocycleSpec, fibered_rotation_number
from weights import WeightSpec

from .iteration import KamState, iteration_step
from .schedule import DEFAULT_MAX_STEPS, KamSchedule, build_schedule

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TOL = 1e-6
# Absolute compression floor relative to ε₀
FLOOR_FACTOR = 1e-16
ROTATION_HORIZON = 200.0
GRID_POINTS = 100


@dataclass(frozen=True)
class BoundCheck:
    name: str
    claimed: float
    measured: float
    ok: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "claimed": self.claimed, "measured": self.measured, "ok": self.ok}


@dataclass(frozen=True)
class ResidualReport:
    norm: float
    grid_max: float
    r_eval: float
    y_tail: float

    def to_dict(self) -> dict:
        return {"norm": self.norm, "grid_max": self.grid_max, "r_eval": self.r_eval, "y_tail": self.y_tail}


@dataclass(eq=False)
class ReducibilityReport:
    converged: bool
    steps: list[dict]
    A_inf: np.ndarray
    Y: FourierMatrixSeries
    residual_norm: float
    bound_checks: list[BoundCheck]
    schedule: KamSchedule | None = None
    residual: ResidualReport | None = None
    alpha0: float = math.nan
    eps0: float = math.nan
    P0: np.ndarray = field(default_factory=lambda: np.eye(2))
    rotation: dict = field(default_factory=dict)
    error: dict | None = None


def conjugacy_residual(
    Y: FourierMatrixSeries,
    c: CocycleSpec,
    B,
    r_eval: float,
    weight: WeightSpec | None = None,
    points: int = GRID_POINTS,
    seed: int = 0,
) -> ResidualReport:
    """
    |∂_ωY − (A+F)Y + YB|_{r_eval}, plus the largest pointwise residual over random θ with the
    derivative taken by finite differences along the flow.
    """
    weight = weight or WeightSpec.analytic()
    B = np.asarray(B, dtype=float)
    ctx = NormContext(weight, r_eval)
    generator = add_constant(c.F, c.A)
    series = subtract(
        directional_derivative(Y, c.freq),
        subtract(multiply(generator, Y, ctx), right_multiply(Y, B)),
    )
    norm = ctx.norm(series)

    rng = np.random.default_rng(seed)
    thetas = rng.random((points, c.freq.d))
    h = 1e-3
    shift = h * c.freq.vector

    def Y_at(offset):
        return np.real(evaluate_many(Y, thetas + offset))

    dY = (-Y_at(2 * shift) + 8.0 * Y_at(shift) - 8.0 * Y_at(-shift) + Y_at(-2 * shift)) / (12.0 * h)
    Yv = Y_at(0.0)
    Mv = c.A[None, :, :] + np.real(evaluate_many(c.F, thetas))
    pointwise = dY - Mv @ Yv + Yv @ B
    grid_max = float(np.max(op_norms(pointwise)))
    return ResidualReport(norm=norm, grid_max=grid_max, r_eval=r_eval, y_tail=Y.tail_bound)


def _estimate_rotation(c: CocycleSpec, psi: PsiFunction, horizon: float | None) -> dict:
    """Advisory ρ condition, checked on the whole table."""
    if not horizon:
        return {"checked": False}
    step = min(0.01, 0.05 / max(c.sup_bound, 1e-12))
    estimate = fibered_rotation_number(c, horizon, step)
    condition = check_rotation_condition(estimate.value, c.freq, psi, psi.kmax)
    if not condition.ok:
        logger.warning(
            "ρ ≈ %.8g misses the rotation condition at k=%s (margin %.3e); continuing",
            estimate.value, condition.witness, condition.margin,
        )
    return {
        "checked": True,
        "estimate": estimate.to_dict(),
        "condition_ok": condition.ok,
        "margin": condition.margin,
        "witness": list(condition.witness),
    }


def _frame_rho(rotation: dict, alpha: float, reflected: bool) -> float:
    """ρ seen in the normal-form frame; a reflection reverses the fibered rotation."""
    if "estimate" not in rotation:
        return alpha
    value = rotation["estimate"]["value"]
    return -value if reflected else value


def _trivial_report(c: CocycleSpec, weight: WeightSpec, r: float, alpha: float, P0, rotation: dict) -> ReducibilityReport:
    Y = FourierMatrixSeries.identity(c.freq.d)
    residual = conjugacy_residual(Y, c, c.A, r / 2.0, weight)
    return ReducibilityReport(
        converged=True,
        steps=[],
        A_inf=c.A.copy(),
        Y=Y,
        residual_norm=residual.norm,
        bound_checks=[],
        residual=residual,
        alpha0=alpha,
        eps0=0.0,
        P0=P0,
        rotation=rotation,
    )


def reduce(
    c: CocycleSpec,
    psi: PsiFunction,
    weight: WeightSpec,
    max_steps: int = DEFAULT_MAX_STEPS,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    stop_tol: float = 0.0,
    rotation_horizon: float | None = ROTATION_HORIZON,
) -> ReducibilityReport:
    """
    Reduce (ω, A + F) to a constant. Failures are reported with converged=false, never raised,
    except for invalid inputs.
    """
    if not isinstance(psi, PsiFunction):
        raise InputError("reduce needs a Ψ enumerated from the frequency, not an analytic preset")
    if psi.freq.omega != c.freq.omega:
        raise InputError("Ψ was enumerated for a different frequency")

    nf0 = real_normal_form(c.A)
    alpha = nf0.alpha
    r = c.r
    F0 = conjugate_by(nf0.P, c.F, nf0.P_inv)
    eps = NormContext(weight, r).norm(F0)
    rotation = _estimate_rotation(c, psi, rotation_horizon)

    if eps == 0.0:
        return _trivial_report(c, weight, r, alpha, nf0.P, rotation)

    failed = ReducibilityReport(
        converged=False,
        steps=[],
        A_inf=c.A.copy(),
        Y=FourierMatrixSeries.identity(c.freq.d),
        residual_norm=math.inf,
        bound_checks=[],
        alpha0=alpha,
        eps0=eps,
        P0=nf0.P,
        rotation=rotation,
    )
    try:
        schedule = build_schedule(r, eps, alpha, weight, psi, max_steps)
    except (ScheduleError, ConditionError) as exc:
        logger.warning("no schedule: %s", exc)
        failed.error = exc.to_dict()
        return failed
    failed.schedule = schedule

    floor = FLOOR_FACTOR * eps
    ctx_final = NormContext(weight, r / 2.0, floor=floor)
    first = schedule.level(0)
    state = KamState(
        nu=0,
        alpha_nu=alpha,
        F_nu=F0,
        r_nu=r,
        eps_nu=eps,
        N_nu=first.N,
        sigma_nu=first.sigma,
        Y_accum=FourierMatrixSeries.identity(c.freq.d),
        rho=_frame_rho(rotation, alpha, nf0.reflected),
    )
    steps: list[dict] = []
    y_step_sum = 0.0
    for nu in range(schedule.max_steps):
        if state.F_nu.is_zero() or NormContext(weight, state.r_nu).norm(state.F_nu) <= stop_tol * eps:
            break
        try:
            next_state, Y_nu, diagnostics = iteration_step(state, schedule, c.freq, floor=floor)
        except StepFailure as exc:
            logger.warning("%s", exc)
            failed.steps = steps + [exc.diagnostics]
            failed.error = exc.to_dict()
            return failed
        y_step_sum += ctx_final.norm(add_constant(Y_nu, -I2))
        Y_accum = multiply(state.Y_accum, Y_nu, ctx_final)
        state = replace(next_state, Y_accum=Y_accum)
        steps.append(diagnostics)

    # back to the original frame: Y = P₀⁻¹ Y₀⋯Y_n P₀, A_∞ = P₀⁻¹ α_∞J P₀
    Y = conjugate_by(nf0.P_inv, state.Y_accum, nf0.P)
    A_inf = nf0.P_inv @ (state.alpha_nu * J) @ nf0.P
    residual = conjugacy_residual(Y, c, A_inf, r / 2.0, weight)

    psi0 = psi.value(schedule.N0)
    frame = float(np.linalg.norm(nf0.P, 2) * np.linalg.norm(nf0.P_inv, 2))
    y_minus_i = ctx_final.norm(add_constant(Y, -I2))
    y_norm = ctx_final.norm(Y)
    checks = [
        BoundCheck("residual", residual_tol, residual.norm, residual.norm <= residual_tol),
        BoundCheck("Y_minus_I", 32.0 * psi0 * eps * frame, y_minus_i, y_minus_i <= 32.0 * psi0 * eps * frame),
        BoundCheck("Y_accum_telescoping", 2.0 * y_step_sum, ctx_final.norm(add_constant(state.Y_accum, -I2)),
                   ctx_final.norm(add_constant(state.Y_accum, -I2)) <= 2.0 * y_step_sum + 1e-15),
        BoundCheck("Y_norm", 2.0 * frame, y_norm, y_norm <= 2.0 * frame),
        BoundCheck("sigma_sum", r / 2.0, schedule.sigma_sum, schedule.sigma_sum <= r / 2.0),
    ]
    if y_minus_i < 1.0:
        y_inv = ctx_final.norm(inverse_neumann(add_constant(Y, -I2), ctx_final))
        checks.append(BoundCheck("Y_inverse_norm", 2.0 * frame, y_inv, y_inv <= 2.0 * frame))

    converged = all(check.ok for check in checks)
    if not converged:
        logger.warning("reduction did not pass: %s", [check.name for check in checks if not check.ok])
    logger.info("reduced in %d steps: α∞=%.12g residual=%.3e", len(steps), state.alpha_nu, residual.norm)
    return ReducibilityReport(
        converged=converged,
        steps=steps,
        A_inf=A_inf,
        Y=Y,
        residual_norm=residual.norm,
        bound_checks=checks,
        schedule=schedule,
        residual=residual,
        alpha0=alpha,
        eps0=eps,
        P0=nf0.P,
        rotation=rotation,
    )
