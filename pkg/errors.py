"""
Error types raised across the toolkit.
Every error renders itself as a JSON-ready block so the CLI can put it in a report.
"""

from __future__ import annotations

from typing import Any


class QpkamError(Exception):
    """Base class. Subclasses add fields that go into to_dict()."""

    fields: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        block: dict[str, Any] = {"type": type(self).__name__, "message": str(self)}
        for name in self.fields:
            value = getattr(self, name, None)
            if isinstance(value, tuple):
                value = list(value)
            block[name] = value
        return block


# —— Input-side errors ——

class DomainError(QpkamError, ValueError):
    fields = ("value",)

    def __init__(self, message: str, value: Any = None):
        super().__init__(message)
        self.value = value


class InputError(QpkamError, ValueError):
    pass


class ConfigError(InputError):
    fields = ("line", "key")

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.key = key


class ResonantFrequencyError(QpkamError, ValueError):
    fields = ("witness",)

    def __init__(self, witness: tuple[int, ...]):
        super().__init__(f"frequency is resonant: k·ω = 0 at k = {witness}")
        self.witness = tuple(int(c) for c in witness)


class NotEllipticError(QpkamError, ValueError):
    fields = ("det",)

    def __init__(self, det: float):
        super().__init__(f"matrix is not elliptic (det = {det:.3e})")
        self.det = float(det)


class PreconditionError(QpkamError, ValueError):
    pass


# —— Runtime failures ——

class ResourceBudgetError(QpkamError, RuntimeError):
    fields = ("needed", "budget")

    def __init__(self, needed: int, budget: int):
        super().__init__(f"lattice enumeration needs {needed} points, budget is {budget}")
        self.needed = int(needed)
        self.budget = int(budget)


class ScheduleError(QpkamError, RuntimeError):
    fields = ("max_admissible_eps",)

    def __init__(self, message: str, max_admissible_eps: float | None = None):
        super().__init__(message)
        self.max_admissible_eps = max_admissible_eps


class ConditionError(QpkamError, RuntimeError):
    fields = ("smallest_tail",)

    def __init__(self, message: str, smallest_tail: float | None = None):
        super().__init__(message)
        self.smallest_tail = smallest_tail


class SmallDivisorError(QpkamError, RuntimeError):
    fields = ("witness", "divisor", "threshold")

    def __init__(self, witness: tuple[int, ...], divisor: float, threshold: float):
        super().__init__(f"small divisor {divisor:.3e} below {threshold:.3e} at k = {tuple(witness)}")
        self.witness = tuple(int(c) for c in witness)
        self.divisor = float(divisor)
        self.threshold = float(threshold)


class StepFailure(QpkamError, RuntimeError):
    fields = ("diagnostics",)

    def __init__(self, message: str, diagnostics: dict[str, Any]):
        super().__init__(message)
        self.diagnostics = diagnostics


class InsufficientResonancesError(QpkamError, RuntimeError):
    fields = ("found", "requested")

    def __init__(self, found: int, requested: int):
        super().__init__(f"found {found} resonant modes in the table, {requested} requested")
        self.found = int(found)
        self.requested = int(requested)


class IntegrationError(QpkamError, RuntimeError):
    fields = ("diagnostic",)

    def __init__(self, message: str, diagnostic: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}
