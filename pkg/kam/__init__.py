# KAM reduction of quasi-periodic sl(2, R) cocycles close to an elliptic constant.
# Schedule, cohomological solver, single step and the convergent driver.

from .cohomological import solve_cohomological, solve_cohomological_split
from .driver import ReducibilityReport, conjugacy_residual, reduce
from .iteration import KamState, iteration_step
from .report import report_to_dict, steps_frame, write_json, write_report
from .schedule import (
    KamSchedule,
    build_schedule,
    choose_n0,
    lambda_br_tails,
    max_admissible_eps,
    small_divisor_guard,
)

__all__ = [
    "KamSchedule",
    "KamState",
    "ReducibilityReport",
    "build_schedule",
    "choose_n0",
    "conjugacy_residual",
    "iteration_step",
    "lambda_br_tails",
    "max_admissible_eps",
    "reduce",
    "report_to_dict",
    "small_divisor_guard",
    "solve_cohomological",
    "solve_cohomological_split",
    "steps_frame",
    "write_json",
    "write_report",
]
