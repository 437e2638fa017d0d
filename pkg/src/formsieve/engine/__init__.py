"""Elimination engine: cubes, schedules, runs, extraction, certificates."""

from .cubes import DyadicCube, SurvivorSet, scaled_predicate
from .errors import (
    BranchingAbsent,
    BudgetExceeded,
    ConditionViolated,
    EngineError,
    ScheduleInfeasible,
    SurvivorsEmpty,
)
from .lineset import LineSet
from .prop1 import Prop1Result, extract_point, run_prop1
from .prop2 import Prop2Result, run_prop2
from .schedule import (
    LambdaValues,
    Prop2Schedule,
    Schedule,
    condition_report,
    level_for,
)
from .certificate import (
    build_prop1_certificate,
    build_prop2_certificate,
    integrity_ok,
    serialize,
    verify_certificate,
    with_integrity,
)

__all__ = [
    "DyadicCube", "SurvivorSet", "scaled_predicate", "LineSet",
    "EngineError", "ScheduleInfeasible", "ConditionViolated", "SurvivorsEmpty",
    "BranchingAbsent", "BudgetExceeded",
    "Prop1Result", "run_prop1", "extract_point", "Prop2Result", "run_prop2",
    "Schedule", "LambdaValues", "Prop2Schedule", "condition_report", "level_for",
    "build_prop1_certificate", "build_prop2_certificate", "verify_certificate",
    "with_integrity", "integrity_ok", "serialize",
]
