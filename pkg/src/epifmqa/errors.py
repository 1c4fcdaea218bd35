"""Exception types shared across the package."""

from __future__ import annotations


class ContractError(ValueError):
    """An argument violated a documented precondition."""


class DatasetParseError(ValueError):
    """A dataset file is malformed; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CalibrationInfeasibleError(ValueError):
    """No effect size reaches the requested heritability; reports the maximum."""

    def __init__(self, target_h2: float, max_h2: float):
        super().__init__(
            f"target heritability {target_h2:g} is unreachable; "
            f"maximum achievable is {max_h2:.6g}"
        )
        self.target_h2 = target_h2
        self.max_h2 = max_h2


class EnumerationCapError(RuntimeError):
    """An exhaustive scan would exceed the configured combination cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(
            f"exhaustive search needs {required} combinations, above the cap of {cap}"
        )
        self.required = required
        self.cap = cap


class DrawBudgetError(RuntimeError):
    """Rejection sampling exhausted its draw budget before filling the quotas."""

    def __init__(self, budget: int, cases_filled: int, controls_filled: int):
        super().__init__(
            f"draw budget of {budget} individuals exhausted "
            f"({cases_filled} cases, {controls_filled} controls collected)"
        )
        self.budget = budget
