"""
One KAM step: (ω, α_νJ + F_ν) → (ω, α_{ν+1}J + F_{ν+1}) with the conjugacy Y_ν = (I + X_ν)P_ν⁻¹,
so that ∂_ωY_ν = (α_νJ + F_ν)Y_ν − Y_ν(α_{ν+1}J + F_{ν+1}).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from errors import PreconditionError, SmallDivisorError, StepFailure
from fourier import (
    FourierMatrixSeries,
    NormContext,
    add,
    add_constant,
    average_and_trace,
    conjugate_by,
    high_modes,
    inverse_neumann,
    multiply,
    right_multiply,
    subtract,
    truncate,
)
from mat2 import I2, perturbed_normal_form

from .cohomological import solve_cohomological_split
from .schedule import KamSchedule, small_divisor_guard

logger = logging.getLogger(__name__)

# Slack on every measured inequality
BOUND_SLACK = 1e-12
TRACE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KamState:
    nu: int
    alpha_nu: float
    F_nu: FourierMatrixSeries
    r_nu: float
    eps_nu: float
    N_nu: float
    sigma_nu: float
    Y_accum: FourierMatrixSeries
    rho: float


def _within(measured: float, claimed: float) -> bool:
    return measured <= claimed * (1.0 + BOUND_SLACK) + BOUND_SLACK * 1e-6


def iteration_step(
    state: KamState,
    schedule: KamSchedule,
    freq,
    floor: float = 0.0,
) -> tuple[KamState, FourierMatrixSeries, dict]:
    """
    Returns the next state, Y_ν and the step diagnostics. Every inequality of the step is
    measured; a violated one raises StepFailure carrying the diagnostics.
    """
    nu = state.nu
    level = schedule.level(nu)
    alpha = state.alpha_nu
    F = state.F_nu
    ctx = NormContext(schedule.weight, level.r, floor=floor)
    ctx_next = ctx.at(level.r_next)
    N = level.order

    diagnostics: dict = {
        "nu": nu,
        "alpha": alpha,
        "eps": level.eps,
        "N": level.N,
        "psi_N": level.psi_N,
        "sigma": level.sigma,
        "r": level.r,
        "modes": len(F),
        "F_norm": ctx.norm(F),
    }

    mean, trace = average_and_trace(F)
    G = truncate(F, N, dotted=True)
    guard = small_divisor_guard(alpha, state.rho, freq, schedule.psi, min(N, schedule.psi.kmax), level.psi_N)
    diagnostics["guard"] = guard.to_dict()
    diagnostics["G_norm"] = ctx.norm(G)
    diagnostics["mean_trace"] = trace

    try:
        X, unsolved = solve_cohomological_split(alpha, G, freq, N, level.psi_N)
    except SmallDivisorError as exc:
        diagnostics["error"] = exc.to_dict()
        raise StepFailure(f"step {nu}: {exc}", diagnostics) from exc

    x_norm = ctx.norm(X)
    diagnostics["X_norm"] = x_norm
    diagnostics["X_bound"] = 2.0 * level.psi_N * level.eps
    diagnostics["unsolved_norm"] = ctx.norm(unsolved)
    if x_norm >= 0.5:
        raise StepFailure(f"step {nu}: |X| = {x_norm:.3e} too large to invert I + X", diagnostics)

    Z = add_constant(X, I2)
    Z_inv = inverse_neumann(X, ctx)
    diagnostics["Z_inv_norm"] = ctx.norm(Z_inv)

    # (F − F̂(0) − G) + U + FX − XF̂(0), U the part of G left unsolved
    inner = subtract(add(add(high_modes(F, N), unsolved), multiply(F, X, ctx)), right_multiply(X, mean))
    R = multiply(Z_inv, inner, ctx_next)
    r_norm = ctx_next.norm(R)
    diagnostics["R_norm"] = r_norm
    diagnostics["R_bound"] = level.eps / 16.0

    try:
        nf = perturbed_normal_form(alpha, mean)
    except PreconditionError as exc:
        diagnostics["error"] = exc.to_dict()
        raise StepFailure(f"step {nu}: {exc}", diagnostics) from exc

    F_next = conjugate_by(nf.P, R, nf.P_inv)
    Y_nu = right_multiply(Z, nf.P_inv)
    f_next_norm = ctx_next.norm(F_next)
    _, trace_next = average_and_trace(F_next)
    y_minus_i = ctx.norm(add_constant(Y_nu, -I2))
    eps_next = level.eps / 4.0

    diagnostics.update({
        "alpha_next": nf.alpha,
        "P_norm": float(np.linalg.norm(nf.P, 2)),
        "F_next_norm": f_next_norm,
        "eps_next": eps_next,
        "trace_next": trace_next,
        "Y_minus_I": y_minus_i,
        "Y_bound": 8.0 * level.psi_N * level.eps,
        "contraction": f_next_norm / diagnostics["F_norm"] if diagnostics["F_norm"] > 0 else 0.0,
        "modes_next": len(F_next),
    })

    checks = {
        "X": _within(x_norm, diagnostics["X_bound"]),
        "R": _within(r_norm, diagnostics["R_bound"]),
        "F_next": _within(f_next_norm, eps_next),
        "trace_next": abs(trace_next) <= TRACE_TOL,
        "Y_minus_I": _within(y_minus_i, diagnostics["Y_bound"]),
        "eps_next_le_alpha": eps_next <= nf.alpha / 4.0,
    }
    diagnostics["checks"] = checks
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        raise StepFailure(f"step {nu}: bounds violated: {', '.join(failed)}", diagnostics)

    logger.info(
        "step %d: |F|=%.3e → %.3e (ε_ν+1=%.3e) N=%.2f |X|=%.3e α=%.12g modes=%d",
        nu, diagnostics["F_norm"], f_next_norm, eps_next, level.N, x_norm, nf.alpha, len(F_next),
    )

    next_state = KamState(
        nu=nu + 1,
        alpha_nu=nf.alpha,
        F_nu=F_next,
        r_nu=level.r_next,
        eps_nu=eps_next,
        N_nu=schedule.levels[nu + 1].N if nu + 1 < schedule.max_steps else level.N,
        sigma_nu=schedule.levels[nu + 1].sigma if nu + 1 < schedule.max_steps else 0.0,
        Y_accum=state.Y_accum,
        rho=state.rho,
    )
    return next_state, Y_nu, diagnostics
