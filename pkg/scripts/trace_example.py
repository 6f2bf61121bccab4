"""Print the event log of a small hand-checkable schedule (two tasks, one core)."""

from hetbo.simcore import CoreClass, Policy, SchedulerPolicy, SystemConfig, run_simulation
from hetbo.workload import Task, TaskSet


def main() -> None:
    tasks = TaskSet([Task(0, 0.0, 1_000_000, 0), Task(1, 0.0, 2_000_000, 1)])
    for policy in (SchedulerPolicy(Policy.FCFS), SchedulerPolicy(Policy.RR, 0.5e-3)):
        config = SystemConfig.from_classes({CoreClass.BIG: (1, 1e9)}, policy)
        result, log = run_simulation(config, tasks)
        print(f"--- {policy.kind.value}")
        print("\n".join(log.lines()))
        print(f"finish times (ms): {[round(o.finish_time * 1e3, 6) for o in result.per_task.values()]}")


if __name__ == "__main__":
    main()
