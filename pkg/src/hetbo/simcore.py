"""Heterogeneous multi-core execution model and discrete-event scheduler.

Units are SI throughout (seconds, hertz, joules, watts). Config files speak
GHz and milliseconds; conversion happens in :mod:`hetbo.config`.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .workload import Task, TaskSet


class SimulationError(ValueError):
    """Raised for physically meaningless inputs (negative time, f below b_f...)."""


class ConfigurationError(SimulationError):
    """Raised for an unusable system configuration, e.g. no powered cores."""


class CoreClass(str, Enum):
    LITTLE = "little"
    MEDIUM = "medium"
    BIG = "big"


# tie-break rank when two classes run at the same frequency
_CLASS_RANK = {CoreClass.BIG: 0, CoreClass.MEDIUM: 1, CoreClass.LITTLE: 2}


class Policy(str, Enum):
    FCFS = "FCFS"
    RR = "RR"
    PRIORITY = "Priority"


_SCHEDULER_NAMES = {
    Policy.FCFS: "FCFS scheduler",
    Policy.RR: "Round Robin scheduler",
    Policy.PRIORITY: "Priority scheduler",
}


@dataclass(frozen=True)
class PowerConstants:
    """Processor power model constants (SI).

    Defaults: k_V = 5e9 Hz/V, b_f = 0 Hz, C = 1e-9 F, I_leakage = 0.3 A,
    with switching activity 1 while busy and one instruction per cycle.
    """

    k_v: float = 5e9
    b_f: float = 0.0
    capacitance: float = 1e-9
    leakage_current: float = 0.3
    activity: float = 1.0
    ipc: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.k_v > 0:
            problems.append("k_v must be > 0")
        if not self.capacitance > 0:
            problems.append("capacitance must be > 0")
        if self.leakage_current < 0:
            problems.append("leakage_current must be >= 0")
        if not 0.0 <= self.activity <= 1.0:
            problems.append("activity must lie in [0, 1]")
        if not self.ipc > 0:
            problems.append("ipc must be > 0")
        if problems:
            raise SimulationError("; ".join(problems))


@dataclass(frozen=True)
class CoreSpec:
    id: int
    core_class: CoreClass
    frequency: float

    def __post_init__(self):
        if not self.frequency > 0:
            raise ConfigurationError(f"core {self.id}: frequency must be positive")


@dataclass(frozen=True)
class SchedulerPolicy:
    kind: Policy
    quantum: float | None = None

    def __post_init__(self):
        kind = Policy(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is Policy.FCFS:
            if self.quantum is not None:
                raise ConfigurationError("FCFS takes no quantum")
        elif self.quantum is None or not self.quantum > 0:
            raise ConfigurationError(f"{kind.value} needs a positive quantum")


@dataclass(frozen=True)
class SystemConfig:
    cores: tuple[CoreSpec, ...]
    policy: SchedulerPolicy
    constants: PowerConstants = field(default_factory=PowerConstants)

    @classmethod
    def from_classes(
        cls,
        classes: dict[CoreClass | str, tuple[int, float]],
        policy: SchedulerPolicy,
        constants: PowerConstants | None = None,
    ) -> SystemConfig:
        """Expand ``{class: (count, frequency_hz)}`` into individual cores.

        Core ids follow descending frequency (big before medium before little
        on ties), so when several cores are idle the fastest one is served
        first.
        """
        expanded = []
        for name, (count, freq) in classes.items():
            if count < 0:
                raise ConfigurationError(f"negative core count for {name}")
            expanded += [(CoreClass(name), float(freq))] * int(count)
        expanded.sort(key=lambda cf: (-cf[1], _CLASS_RANK[cf[0]]))
        cores = tuple(CoreSpec(i, c, f) for i, (c, f) in enumerate(expanded))
        return cls(cores=cores, policy=policy, constants=constants or PowerConstants())


# -- closed-form physics ----------------------------------------------------


def voltage_from_frequency(f: float, constants: PowerConstants) -> float:
    """Supply voltage under the linear law f = k_V * V + b_f."""
    if f < constants.b_f:
        raise SimulationError(f"frequency {f} below b_f={constants.b_f}")
    return (f - constants.b_f) / constants.k_v


def dynamic_power(f: float, constants: PowerConstants) -> float:
    v = voltage_from_frequency(f, constants)
    return constants.activity * constants.capacitance * v * v * f


def leakage_power(f: float, constants: PowerConstants) -> float:
    return voltage_from_frequency(f, constants) * constants.leakage_current


def execution_time(n_ic: float, constants: PowerConstants, f: float) -> float:
    if not f > 0:
        raise SimulationError(f"frequency must be positive, got {f}")
    return n_ic / (constants.ipc * f)


def task_active_energy(n_ic: float, f: float, constants: PowerConstants) -> float:
    """Energy of running ``n_ic`` instructions at fixed frequency ``f``.

    Keeps the N_IC / IPC factor, so energy scales with the amount of work.
    Assumes b_f = 0 like the closed form it implements.
    """
    if not f > 0:
        raise SimulationError(f"frequency must be positive, got {f}")
    c = constants
    per_cycle = c.activity * c.capacitance * f * f / c.k_v**2 + c.leakage_current / c.k_v
    return per_cycle * (n_ic / c.ipc)


def idle_leakage_energy(f: float, duration: float, constants: PowerConstants) -> float:
    if duration < 0:
        raise SimulationError(f"duration must be non-negative, got {duration}")
    return leakage_power(f, constants) * duration


def priority_weight(p: int) -> float:
    if p < 0:
        raise SimulationError(f"priority must be non-negative, got {p}")
    return 1.0 / (p + 1) ** 2


def aggregated_latency(latencies: Sequence[float], priorities: Sequence[int]) -> float:
    """Priority-weighted *sum* of latencies (not divided by the weight total)."""
    if len(latencies) != len(priorities):
        raise SimulationError("latencies and priorities differ in length")
    total = 0.0
    for t, p in zip(latencies, priorities):
        if t < 0:
            raise SimulationError(f"negative latency {t}")
        total += priority_weight(p) * t
    return total


# -- results ------------------------------------------------------------------


@dataclass(frozen=True)
class TaskOutcome:
    finish_time: float
    turnaround: float
    energy: float


@dataclass(frozen=True)
class CoreUsage:
    core_id: int
    core_class: str
    frequency: float
    busy_time: float
    dynamic_energy: float
    leakage_energy: float


@dataclass(frozen=True)
class SimResult:
    per_task: dict[int, TaskOutcome]
    per_core: tuple[CoreUsage, ...]
    total_energy: float
    aggregated_latency: float
    makespan: float

    def to_dict(self) -> dict:
        """JSON-ready form.

        Schema::

            {"total_energy_j": float, "aggregated_latency_s": float,
             "makespan_s": float,
             "cores": [{"core_id", "core_class", "frequency_hz", "busy_time_s",
                        "dynamic_energy_j", "leakage_energy_j"}, ...],
             "tasks": [{"id", "finish_time_s", "turnaround_s", "energy_j"}, ...]}
        """
        return {
            "total_energy_j": self.total_energy,
            "aggregated_latency_s": self.aggregated_latency,
            "makespan_s": self.makespan,
            "cores": [
                {
                    "core_id": c.core_id,
                    "core_class": c.core_class,
                    "frequency_hz": c.frequency,
                    "busy_time_s": c.busy_time,
                    "dynamic_energy_j": c.dynamic_energy,
                    "leakage_energy_j": c.leakage_energy,
                }
                for c in self.per_core
            ],
            "tasks": [
                {"id": tid, "finish_time_s": o.finish_time, "turnaround_s": o.turnaround, "energy_j": o.energy}
                for tid, o in sorted(self.per_task.items())
            ],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    def tasks_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "finish_time_s", "turnaround_s", "energy_j"])
        for tid, o in sorted(self.per_task.items()):
            w.writerow([tid, repr(o.finish_time), repr(o.turnaround), repr(o.energy)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def annotate(self, tasks: TaskSet) -> list[Task]:
        """Copies of ``tasks`` with finish time and energy filled in."""
        out = []
        for t in tasks:
            o = self.per_task[t.id]
            out.append(Task(t.id, t.arrival_time, t.instruction_count, t.priority, o.finish_time, o.energy))
        return out


@dataclass(frozen=True)
class EventRecord:
    time: float
    component: str
    message: str

    def render(self) -> str:
        return f"INFO:{self.component}:{self.message}"


@dataclass
class EventLog:
    records: list[EventRecord] = field(default_factory=list)

    def add(self, time: float, component: str, message: str) -> None:
        self.records.append(EventRecord(time, component, message))

    def lines(self) -> list[str]:
        return [r.render() for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


# -- event-driven simulation ---------------------------------------------------


class _ReadyQueue:
    """FIFO for FCFS/RR, (priority, arrival, id) heap for Priority."""

    def __init__(self, by_priority: bool):
        self.by_priority = by_priority
        self._fifo: deque[Task] = deque()
        self._heap: list[tuple[int, float, int, Task]] = []

    def push(self, task: Task) -> None:
        if self.by_priority:
            heapq.heappush(self._heap, (task.priority, task.arrival_time, task.id, task))
        else:
            self._fifo.append(task)

    def pop(self) -> Task:
        if self.by_priority:
            return heapq.heappop(self._heap)[3]
        return self._fifo.popleft()

    def __len__(self) -> int:
        return len(self._heap) if self.by_priority else len(self._fifo)


def _fmt(t: float) -> str:
    return f"{t:.9g}"


def run_simulation(
    config: SystemConfig, tasks: TaskSet | Sequence[Task], record_events: bool = True
) -> tuple[SimResult, EventLog]:
    """Execute ``tasks`` on ``config`` until every task has completed.

    All cores share one ready queue. FCFS runs each task to completion; RR
    and Priority give at most ``quantum`` seconds of service per dispatch and
    then return the task to the queue (tail for RR, priority order for
    Priority). At equal timestamps arrivals are enqueued before expiring
    slices, and idle cores pick work in core-id order.
    """
    cores = config.cores
    if not cores:
        raise ConfigurationError("system has no powered cores")
    consts = config.constants
    policy = config.policy
    quantum = policy.quantum if policy.kind is not Policy.FCFS else None
    task_list = list(tasks)
    log = EventLog()
    sched_name = _SCHEDULER_NAMES[policy.kind]

    if record_events:
        log.add(0.0, "Task factory", f"Created {len(task_list)} tasks.")
        for c in cores:
            log.add(0.0, f"Processor {c.id}", f"Frequency = {_fmt(c.frequency / 1e9)} GHz ({c.core_class.value}).")
        if quantum is not None:
            log.add(0.0, sched_name, f"Initialized with quantum = {_fmt(quantum)}.")
        else:
            log.add(0.0, sched_name, "Initialized.")

    n_cores = len(cores)
    rate = [consts.ipc * c.frequency for c in cores]
    p_dyn = [dynamic_power(c.frequency, consts) for c in cores]
    p_leak = [leakage_power(c.frequency, consts) for c in cores]
    busy = [0.0] * n_cores
    dyn_energy = [0.0] * n_cores
    running: list[Task | None] = [None] * n_cores
    slice_start = [0.0] * n_cores
    slice_finishes = [False] * n_cores

    remaining = {t.id: float(t.instruction_count) for t in task_list}
    task_energy = {t.id: 0.0 for t in task_list}
    finish: dict[int, float] = {}

    ready = _ReadyQueue(by_priority=policy.kind is Policy.PRIORITY)
    events: list[tuple[float, int]] = []  # (slice end time, core id)
    order = sorted(task_list, key=lambda t: (t.arrival_time, t.id))
    next_arrival = 0
    n_tasks = len(order)

    def dispatch(now: float) -> None:
        for cid in range(n_cores):
            if running[cid] is not None or not len(ready):
                continue
            task = ready.pop()
            need = remaining[task.id] / rate[cid]
            if quantum is None or need <= quantum * (1.0 + 1e-12):
                end, done = now + need, True
            else:
                end, done = now + quantum, False
            running[cid] = task
            slice_start[cid] = now
            slice_finishes[cid] = done
            heapq.heappush(events, (end, cid))
            if record_events:
                log.add(now, "Simulator", f"Task {task.id} dispatched to processor {cid} at time {_fmt(now)}.")

    while next_arrival < n_tasks or events:
        t_arr = order[next_arrival].arrival_time if next_arrival < n_tasks else float("inf")
        t_core = events[0][0] if events else float("inf")
        if t_arr <= t_core:
            now = t_arr
            while next_arrival < n_tasks and order[next_arrival].arrival_time == now:
                task = order[next_arrival]
                next_arrival += 1
                ready.push(task)
                if record_events:
                    log.add(
                        now,
                        "Simulator",
                        f"Task {task.id} arrived at time {_fmt(now)}, with instruction {task.instruction_count}.",
                    )
        else:
            now = t_core
            while events and events[0][0] == now:
                _, cid = heapq.heappop(events)
                task = running[cid]
                length = now - slice_start[cid]
                busy[cid] += length
                dyn_energy[cid] += p_dyn[cid] * length
                task_energy[task.id] += (p_dyn[cid] + p_leak[cid]) * length
                running[cid] = None
                if slice_finishes[cid]:
                    remaining[task.id] = 0.0
                    finish[task.id] = now
                    if record_events:
                        log.add(now, "Simulator", f"Task {task.id} finished at time {_fmt(now)} on processor {cid}.")
                else:
                    remaining[task.id] -= rate[cid] * length
                    ready.push(task)
                    if record_events:
                        log.add(now, sched_name, f"Task {task.id} quantum expired, enqueuing again.")
        dispatch(now)

    makespan = max(finish.values(), default=0.0)
    per_core = tuple(
        CoreUsage(
            core_id=c.id,
            core_class=c.core_class.value,
            frequency=c.frequency,
            busy_time=busy[i],
            dynamic_energy=dyn_energy[i],
            leakage_energy=p_leak[i] * makespan,
        )
        for i, c in enumerate(cores)
    )
    total_energy = sum(u.dynamic_energy + u.leakage_energy for u in per_core)
    per_task = {
        t.id: TaskOutcome(finish[t.id], finish[t.id] - t.arrival_time, task_energy[t.id]) for t in task_list
    }
    latency = aggregated_latency([per_task[t.id].turnaround for t in task_list], [t.priority for t in task_list])
    if record_events:
        log.add(makespan, "Simulator", f"All {n_tasks} tasks finished; makespan {_fmt(makespan)}, energy {_fmt(total_energy)} J.")
    return SimResult(per_task, per_core, total_energy, latency, makespan), log
