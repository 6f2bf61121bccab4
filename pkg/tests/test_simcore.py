import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetbo.simcore import (
    ConfigurationError,
    CoreClass,
    Policy,
    PowerConstants,
    SchedulerPolicy,
    SimulationError,
    SystemConfig,
    aggregated_latency,
    dynamic_power,
    execution_time,
    idle_leakage_energy,
    leakage_power,
    priority_weight,
    run_simulation,
    task_active_energy,
    voltage_from_frequency,
)
from hetbo.workload import Task, TaskSet, WorkloadSpec, generate_tasks
from oracles import fcfs_single_core

C = PowerConstants()
FCFS = SchedulerPolicy(Policy.FCFS)


def rr(q):
    return SchedulerPolicy(Policy.RR, q)


def prio(q):
    return SchedulerPolicy(Policy.PRIORITY, q)


def one_core(policy, f=1e9, constants=None):
    return SystemConfig.from_classes({CoreClass.BIG: (1, f)}, policy, constants)


def two_tasks():
    return TaskSet([Task(0, 0.0, 1_000_000, 0), Task(1, 0.0, 2_000_000, 1)])


# -- closed-form physics --------------------------------------------------------


def test_voltage():
    assert voltage_from_frequency(0.0, C) == 0.0
    assert voltage_from_frequency(1e9, C) == pytest.approx(0.2, rel=1e-15)
    assert voltage_from_frequency(3.5e9, C) == pytest.approx(0.7, rel=1e-15)
    with pytest.raises(SimulationError):
        voltage_from_frequency(1.0, PowerConstants(b_f=2.0))


def test_dynamic_power_cubic():
    assert dynamic_power(0.0, C) == 0.0
    assert dynamic_power(1e9, C) == pytest.approx(0.04, rel=1e-12)
    assert dynamic_power(2e9, C) == pytest.approx(0.32, rel=1e-12)


def test_leakage_power():
    assert leakage_power(0.0, C) == 0.0
    assert leakage_power(1e9, C) == pytest.approx(0.06, rel=1e-12)
    assert leakage_power(2.5e9, C) == pytest.approx(0.15, rel=1e-12)


def test_execution_time():
    assert execution_time(1e6, C, 1e9) == pytest.approx(1e-3, rel=1e-15)
    assert execution_time(0, C, 1e9) == 0.0
    assert execution_time(1e6, C, 5e8) == pytest.approx(2e-3, rel=1e-15)
    with pytest.raises(SimulationError):
        execution_time(1e6, C, 0.0)


def test_task_active_energy():
    assert task_active_energy(0, 1e9, C) == 0.0
    assert task_active_energy(1e6, 1e9, C) == pytest.approx(1.0e-4, rel=1e-12)
    with pytest.raises(SimulationError):
        task_active_energy(1e6, -1.0, C)


@given(n=st.integers(0, 10**8), f=st.floats(1e8, 4e9))
def test_active_energy_is_power_times_time(n, f):
    t = execution_time(n, C, f)
    expected = (dynamic_power(f, C) + leakage_power(f, C)) * t
    assert task_active_energy(n, f, C) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_idle_leakage():
    assert idle_leakage_energy(1e9, 0.0, C) == 0.0
    assert idle_leakage_energy(1e9, 1.0, C) == pytest.approx(0.06, rel=1e-12)
    assert idle_leakage_energy(1e9, 2.0, C) == pytest.approx(2 * idle_leakage_energy(1e9, 1.0, C))
    with pytest.raises(SimulationError):
        idle_leakage_energy(1e9, -1.0, C)


def test_priority_weights_and_aggregate():
    assert priority_weight(0) == 1.0
    assert priority_weight(1) == 0.25
    assert priority_weight(3) == 1 / 16
    with pytest.raises(SimulationError):
        priority_weight(-1)
    assert aggregated_latency([], []) == 0.0
    assert aggregated_latency([2.0, 4.0], [0, 1]) == 3.0
    assert aggregated_latency([1.0, 2.0, 3.0], [2, 2, 2]) == pytest.approx(6.0 / 9)


def test_invalid_constants_and_policies():
    with pytest.raises(SimulationError):
        PowerConstants(k_v=0)
    with pytest.raises(SimulationError):
        PowerConstants(activity=1.5)
    with pytest.raises(ConfigurationError):
        SchedulerPolicy(Policy.FCFS, 1e-3)
    with pytest.raises(ConfigurationError):
        SchedulerPolicy(Policy.RR)
    with pytest.raises(ConfigurationError):
        run_simulation(SystemConfig((), FCFS), two_tasks())


# -- hand traces ----------------------------------------------------------------


def test_fcfs_hand_trace():
    res, _ = run_simulation(one_core(FCFS), two_tasks())
    assert res.per_task[0].finish_time == pytest.approx(1e-3, rel=1e-12)
    assert res.per_task[1].finish_time == pytest.approx(3e-3, rel=1e-12)
    assert res.makespan == pytest.approx(3e-3, rel=1e-12)


def test_round_robin_hand_trace():
    res, log = run_simulation(one_core(rr(0.5e-3)), two_tasks())
    assert res.per_task[0].finish_time == pytest.approx(1.5e-3, rel=1e-12)
    assert res.per_task[1].finish_time == pytest.approx(3.0e-3, rel=1e-12)
    expiries = [l for l in log.lines() if "quantum expired" in l]
    assert len(expiries) == 2 + 2  # T0 once, T1 three times before its last slice


def test_priority_preempts_at_quantum_boundary():
    # Low-priority task starts alone; an urgent one arrives mid-slice and takes
    # over only when the slice ends.
    tasks = TaskSet([Task(0, 0.0, 2_000_000, 3), Task(1, 0.2e-3, 1_000_000, 0)])
    res, _ = run_simulation(one_core(prio(0.5e-3)), tasks)
    assert res.per_task[1].finish_time == pytest.approx(1.5e-3, rel=1e-12)
    assert res.per_task[0].finish_time == pytest.approx(3.0e-3, rel=1e-12)


def test_log_format():
    _, log = run_simulation(one_core(FCFS), TaskSet([Task(0, 0.0, 1_000_000, 0)]))
    lines = log.lines()
    assert "INFO:Simulator:Task 0 arrived at time 0, with instruction 1000000." in lines
    assert all(l.startswith("INFO:") for l in lines)
    times = [r.time for r in log.records]
    assert times == sorted(times)


def test_fast_cores_get_low_ids():
    cfg = SystemConfig.from_classes(
        {"little": (1, 1e9), "medium": (1, 2e9), "big": (1, 2e9)}, FCFS
    )
    assert [c.core_class for c in cfg.cores] == [CoreClass.BIG, CoreClass.MEDIUM, CoreClass.LITTLE]


def test_result_serializes(tmp_path):
    res, _ = run_simulation(one_core(FCFS), two_tasks())
    d = res.to_dict()
    assert d["total_energy_j"] == res.total_energy
    assert len(d["tasks"]) == 2 and len(d["cores"]) == 1


# -- properties -----------------------------------------------------------------


policies = st.one_of(
    st.just(FCFS),
    st.floats(1e-5, 5e-3).map(rr),
    st.floats(1e-5, 5e-3).map(prio),
)
class_configs = st.fixed_dictionaries(
    {
        "little": st.tuples(st.integers(0, 2), st.floats(0.5e9, 1.5e9)),
        "medium": st.tuples(st.integers(0, 2), st.floats(1.0e9, 2.5e9)),
        "big": st.tuples(st.integers(1, 2), st.floats(1.5e9, 3.5e9)),
    }
)


def small_tasks(seed, n=30, rate=2000.0):
    return generate_tasks(WorkloadSpec(arrival_rate=rate, max_tasks=n, instruction_range=(10_000, 3_000_000)), seed)


@given(classes=class_configs, policy=policies, seed=st.integers(0, 10**6))
def test_simulation_invariants(classes, policy, seed):
    cfg = SystemConfig.from_classes(classes, policy)
    tasks = small_tasks(seed)
    res, log = run_simulation(cfg, tasks)
    fastest = max(c.frequency for c in cfg.cores)
    for t in tasks:
        out = res.per_task[t.id]
        assert out.turnaround == pytest.approx(out.finish_time - t.arrival_time)
        assert out.turnaround >= execution_time(t.instruction_count, C, fastest) * (1 - 1e-9)
    parts = sum(u.dynamic_energy + u.leakage_energy for u in res.per_core)
    assert res.total_energy == pytest.approx(parts, rel=1e-12)
    busy_dyn = sum(dynamic_power(u.frequency, C) * u.busy_time for u in res.per_core)
    assert sum(u.dynamic_energy for u in res.per_core) == pytest.approx(busy_dyn, rel=1e-9)
    lower = max((t.arrival_time + execution_time(t.instruction_count, C, fastest) for t in tasks), default=0.0)
    assert res.makespan >= lower * (1 - 1e-12)
    times = [r.time for r in log.records]
    assert times == sorted(times)
    assert run_simulation(cfg, tasks) == (res, log)


@given(seed=st.integers(0, 10**6))
def test_fcfs_equals_rr_with_huge_quantum(seed):
    tasks = small_tasks(seed)
    a, _ = run_simulation(one_core(FCFS), tasks)
    b, _ = run_simulation(one_core(rr(10.0)), tasks)
    assert {k: v.finish_time for k, v in a.per_task.items()} == {k: v.finish_time for k, v in b.per_task.items()}


@given(seed=st.integers(0, 10**6), f=st.floats(0.5e9, 3.5e9))
def test_fcfs_matches_queueing_recurrence(seed, f):
    tasks = small_tasks(seed, n=40, rate=3000.0)
    res, _ = run_simulation(one_core(FCFS, f), tasks)
    want = fcfs_single_core([t.arrival_time for t in tasks], [t.instruction_count for t in tasks], f)
    assert [res.per_task[t.id].finish_time for t in tasks] == want


@given(classes=class_configs, seed=st.integers(0, 10**6))
def test_work_conservation(classes, seed):
    # With FCFS, every core is busy from the first arrival until the queue
    # drains, so total busy time equals the work divided by per-core speed
    # and no task waits while a core sits idle.
    cfg = SystemConfig.from_classes(classes, FCFS)
    tasks = small_tasks(seed, rate=20000.0)
    res, log = run_simulation(cfg, tasks)
    dispatched = {}
    for rec in log.records:
        if "dispatched" in rec.message:
            tid = int(rec.message.split()[1])
            dispatched[tid] = rec.time
    arrivals = sorted(tasks.tasks, key=lambda t: t.arrival_time)
    for t in arrivals:
        start = dispatched[t.id]
        if start > t.arrival_time:
            # the task waited: at its arrival every core must have been busy
            busy_cores = 0
            for u in cfg.cores:
                spans = [
                    (dispatched[o.id], res.per_task[o.id].finish_time)
                    for o in tasks
                    if o.id in dispatched and _ran_on(log, o.id) == u.id
                ]
                busy_cores += any(s <= t.arrival_time < e for s, e in spans)
            assert busy_cores == len(cfg.cores)


def _ran_on(log, tid):
    for rec in log.records:
        if rec.message.startswith(f"Task {tid} finished"):
            return int(rec.message.rsplit(" ", 1)[1].rstrip("."))
    return None


def test_single_task_any_policy_matches_closed_form():
    for policy in (FCFS, rr(0.3e-3), prio(0.3e-3)):
        res, _ = run_simulation(one_core(policy, 2e9), TaskSet([Task(0, 0.0, 3_000_000, 1)]))
        assert res.per_task[0].turnaround == pytest.approx(execution_time(3e6, C, 2e9), rel=1e-9)
        assert res.total_energy == pytest.approx(task_active_energy(3e6, 2e9, C), rel=1e-9)
        assert math.isclose(res.aggregated_latency, 0.25 * res.per_task[0].turnaround, rel_tol=1e-12)


def test_off_cores_cost_nothing():
    cfg = SystemConfig.from_classes({"little": (0, 1e9), "big": (1, 2e9)}, FCFS)
    assert len(cfg.cores) == 1
    res, _ = run_simulation(cfg, small_tasks(1))
    assert np.isfinite(res.total_energy)
