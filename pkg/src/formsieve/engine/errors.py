"""Engine error taxonomy; the CLI maps these to its exit-code contract."""

from __future__ import annotations


class EngineError(Exception):
    pass


class ScheduleInfeasible(EngineError):
    """A computed subdivision level failed its defining inequality."""


class ConditionViolated(EngineError):
    """A named condition or runtime assertion failed, with exact values."""

    def __init__(self, condition: str, at, details: dict):
        self.condition = condition
        self.at = at
        self.details = details
        super().__init__(f"{condition} violated at {at}: {details}")


class SurvivorsEmpty(EngineError):
    """The survivor set died; carries the assertion failures that preceded it."""

    def __init__(self, at: int, violations: list):
        self.at = at
        self.violations = violations
        first = violations[0] if violations else "no recorded violation (unexpected)"
        super().__init__(f"survivor set empty at n={at}; first failed assertion: {first}")


class BranchingAbsent(EngineError):
    """A good cube at a condition-4 level had fewer than two good children."""


class BudgetExceeded(EngineError):
    """Cube budget cannot be met under the soundness cap on restriction levels."""
