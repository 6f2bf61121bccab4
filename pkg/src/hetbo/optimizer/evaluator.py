"""Objective evaluation through the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..searchspace import DesignPoint, to_system_config
from ..simcore import PowerConstants, run_simulation
from ..workload import TaskSet, WorkloadSpec, generate_tasks


@dataclass
class SimulationEvaluator:
    """Maps a design point to (total energy J, aggregated latency s).

    The task set is generated once from ``(workload, seed)`` and reused for
    every trial, so each point has a deterministic objective.
    """

    workload: WorkloadSpec
    constants: PowerConstants = field(default_factory=PowerConstants)
    seed: int | None = None
    _tasks: TaskSet | None = field(default=None, init=False, repr=False)

    @property
    def tasks(self) -> TaskSet:
        if self._tasks is None:
            self._tasks = generate_tasks(self.workload, self.seed)
        return self._tasks

    def __call__(self, point: DesignPoint) -> tuple[float, float]:
        result, _ = run_simulation(to_system_config(point, self.constants), self.tasks, record_events=False)
        return result.total_energy, result.aggregated_latency
