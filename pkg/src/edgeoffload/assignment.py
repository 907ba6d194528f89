from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .formulation import check_assignment
from .options import ProblemInstance


class InfeasibleInstanceError(ValueError):
    """No integer assignment exists (or a heuristic could not place some task)."""

    def __init__(self, message: str, task_ids=()):
        super().__init__(message)
        self.task_ids = tuple(task_ids)


class AssignmentError(AssertionError):
    """A solver produced an assignment that violates the integer constraints."""


@dataclass(frozen=True)
class Assignment:
    """One option index per task, plus the metrics reported by the harness."""

    scheduler: str
    chosen: tuple[int, ...]
    total_utility: float
    avg_accuracy: float
    avg_latency: float
    on_device_count: int
    runtime_ms: float = 0.0
    iterations_used: int = 0
    fallback_used: bool = False
    normalized_utility: float | None = None
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_tasks(self) -> int:
        return len(self.chosen)

    def normalized_against(self, exact: "Assignment") -> "Assignment":
        return replace(self, normalized_utility=normalized_utility(self.total_utility, exact.total_utility))


def normalized_utility(total: float, optimum: float) -> float:
    """Ratio of minimisation objectives, 1.0 = optimal.

    Utilities are mostly negative, so the ratio drops below 1 for worse schedules.
    A zero optimum (empty task set) counts as 1.0 when matched.
    """
    if optimum == 0.0:
        return 1.0 if total == 0.0 else float("nan")
    return total / optimum


def make_assignment(instance: ProblemInstance, chosen, scheduler: str, *, runtime_ms: float = 0.0,
                    iterations: int = 0, fallback_used: bool = False, **extras) -> Assignment:
    chosen = tuple(int(j) for j in chosen)
    idx = np.asarray(chosen, dtype=np.int64)
    if len(idx):
        util = float(np.sum(instance.utility[idx]))
        acc = float(np.mean(instance.accuracy[idx]))
        lat = float(np.mean(instance.latency[idx]))
        on_dev = sum(instance.options[j].on_device for j in chosen)
    else:
        util, acc, lat, on_dev = 0.0, 0.0, 0.0, 0
    return Assignment(scheduler, chosen, util, acc, lat, int(on_dev), float(runtime_ms), int(iterations),
                      bool(fallback_used), None, dict(extras))


def verify_assignment(instance: ProblemInstance, assignment: Assignment) -> None:
    """Raise ``AssignmentError`` unless every task has one option and all capacities hold exactly."""
    problems = check_assignment(instance, assignment.chosen)
    if problems:
        head = "; ".join(problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise AssignmentError(f"{assignment.scheduler}: {head}{more}")
