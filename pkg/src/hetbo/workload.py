"""Synthetic task sets: Poisson arrivals with randomized task attributes.

All randomness comes from numpy's PCG64 generator. A single integer seed is
expanded with ``SeedSequence.spawn`` into independent streams for arrivals,
instruction counts and priorities, so changing how one attribute is drawn
never perturbs the others.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import numpy as np

DEFAULT_INSTRUCTION_RANGE = (500_000, 5_000_000)
DEFAULT_PRIORITY_LEVELS = 3

_STREAMS = ("arrivals", "instructions", "priorities")


class WorkloadError(ValueError):
    """Invalid workload parameters."""


@dataclass
class Task:
    id: int
    arrival_time: float
    instruction_count: int
    priority: int
    finish_time: float | None = None
    energy: float = 0.0


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of the task factory, in SI units.

    Attributes:
        arrival_rate: Poisson rate in tasks per second.
        max_tasks: Hard cap on the number of generated tasks.
        horizon: No arrival is generated after this time (seconds).
        priority_levels: Largest priority value K; priorities lie in 0..K.
        instruction_range: Inclusive integer bounds for instruction counts.
        seed: Default seed used when ``generate_tasks`` gets none.
    """

    arrival_rate: float = 1000.0
    max_tasks: int = 500
    horizon: float = 1.0
    priority_levels: int = DEFAULT_PRIORITY_LEVELS
    instruction_range: tuple[int, int] = DEFAULT_INSTRUCTION_RANGE
    seed: int = 0

    def violations(self) -> list[str]:
        out = []
        if not self.arrival_rate > 0:
            out.append(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if self.max_tasks < 0:
            out.append(f"max_tasks must be >= 0, got {self.max_tasks}")
        if self.horizon < 0:
            out.append(f"horizon must be >= 0, got {self.horizon}")
        if self.priority_levels < 0:
            out.append(f"priority_levels must be >= 0, got {self.priority_levels}")
        lo, hi = self.instruction_range
        if lo < 1 or hi < lo:
            out.append(f"instruction_range must satisfy 1 <= lo <= hi, got {self.instruction_range}")
        return out

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise WorkloadError("; ".join(problems))


@dataclass
class TaskSet:
    tasks: list[Task]
    spec: WorkloadSpec = field(default_factory=WorkloadSpec)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def to_csv(self, path: str | Path | None = None) -> str:
        """Serialize as CSV (id, arrival_ms, instructions, priority).

        Returns the CSV text; also writes it to ``path`` when given.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "arrival_ms", "instructions", "priority"])
        for t in self.tasks:
            writer.writerow([t.id, _to_ms(t.arrival_time), t.instruction_count, t.priority])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path, spec: WorkloadSpec | None = None) -> TaskSet:
        """Load a task set written by :meth:`to_csv`."""
        text = Path(path).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and set(rows[0]) != {"id", "arrival_ms", "instructions", "priority"}:
            raise WorkloadError(f"unexpected CSV columns {sorted(rows[0])}")
        tasks = [
            Task(
                id=int(r["id"]),
                arrival_time=float(Decimal(r["arrival_ms"]).scaleb(-3)),
                instruction_count=int(r["instructions"]),
                priority=int(r["priority"]),
            )
            for r in rows
        ]
        tasks.sort(key=lambda t: (t.arrival_time, t.id))
        return cls(tasks=tasks, spec=spec or WorkloadSpec())


def _to_ms(seconds: float) -> str:
    # Decimal scaling is exact, so reading the value back restores the same float.
    return format(Decimal(repr(seconds)).scaleb(3), "f")


def _streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(_STREAMS, children)}


def sample_arrivals(rate: float, horizon: float, max_n: int, rng: np.random.Generator) -> list[float]:
    """Arrival times of a Poisson process on ``[0, horizon]``, at most ``max_n`` of them.

    Gaps are drawn one block at a time; generation stops at the cap or at the
    first time past the horizon, whichever comes first.
    """
    if not rate > 0:
        raise WorkloadError(f"arrival rate must be positive, got {rate}")
    if horizon < 0:
        raise WorkloadError(f"horizon must be non-negative, got {horizon}")
    times: list[float] = []
    t = 0.0
    block = 256
    while len(times) < max_n:
        gaps = rng.exponential(1.0 / rate, size=block)
        for gap in gaps:
            t_next = t + float(gap)
            # A zero gap from float underflow would break strict ordering.
            if t_next <= t:
                t_next = float(np.nextafter(t, np.inf))
            t = t_next
            if t > horizon:
                return times
            times.append(t)
            if len(times) >= max_n:
                return times
    return times


def generate_tasks(spec: WorkloadSpec, seed: int | None = None) -> TaskSet:
    """Build a reproducible :class:`TaskSet` from ``spec``.

    Instruction counts are uniform over ``spec.instruction_range`` and
    priorities uniform over ``0..spec.priority_levels``.
    """
    spec.validate()
    seed = spec.seed if seed is None else seed
    rngs = _streams(seed)
    arrivals = sample_arrivals(spec.arrival_rate, spec.horizon, spec.max_tasks, rngs["arrivals"])
    n = len(arrivals)
    lo, hi = spec.instruction_range
    counts = rngs["instructions"].integers(lo, hi, size=n, endpoint=True)
    prios = rngs["priorities"].integers(0, spec.priority_levels, size=n, endpoint=True)
    tasks = [
        Task(id=i, arrival_time=arrivals[i], instruction_count=int(counts[i]), priority=int(prios[i]))
        for i in range(n)
    ]
    return TaskSet(tasks=tasks, spec=spec)
