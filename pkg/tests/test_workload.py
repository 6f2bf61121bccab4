import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hetbo.workload import TaskSet, WorkloadError, WorkloadSpec, generate_tasks, sample_arrivals


def rng(seed=0):
    return np.random.default_rng(seed)


def test_empty_horizon_gives_no_arrivals():
    assert sample_arrivals(1000.0, 0.0, 500, rng()) == []


def test_cap_binds_at_high_rate():
    assert len(sample_arrivals(1e9, 1.0, 3, rng())) == 3


@pytest.mark.parametrize("rate", [0.0, -1.0])
def test_non_positive_rate_rejected(rate):
    with pytest.raises(WorkloadError):
        sample_arrivals(rate, 1.0, 10, rng())


def test_mean_gap_close_to_inverse_rate():
    hits = 0
    for seed in range(10):
        t = np.array(sample_arrivals(1000.0, 1.0, 10**6, rng(seed)))
        gaps = np.diff(np.concatenate([[0.0], t]))
        hits += 0.9e-3 <= gaps.mean() <= 1.1e-3
    assert hits >= 9


def test_gaps_pass_exponential_ks_test():
    passes = 0
    for seed in range(20):
        t = np.array(sample_arrivals(1000.0, 10.0, 5000, rng(seed)))
        gaps = np.diff(np.concatenate([[0.0], t]))
        passes += stats.kstest(gaps, "expon", args=(0, 1e-3)).pvalue > 0.01
    assert passes >= 18


def test_zero_tasks():
    assert len(generate_tasks(WorkloadSpec(max_tasks=0), 1)) == 0


def test_generation_is_deterministic():
    spec = WorkloadSpec(max_tasks=200)
    assert generate_tasks(spec, 7).tasks == generate_tasks(spec, 7).tasks
    assert generate_tasks(spec, 7).tasks != generate_tasks(spec, 8).tasks


def test_priority_histogram_uniform():
    ts = generate_tasks(WorkloadSpec(arrival_rate=1e6, max_tasks=10_000, priority_levels=3), 3)
    counts = np.bincount([t.priority for t in ts], minlength=4)
    assert len(ts) == 10_000
    assert stats.chisquare(counts).pvalue > 0.01


def test_invalid_spec_rejected():
    with pytest.raises(WorkloadError):
        generate_tasks(WorkloadSpec(instruction_range=(10, 5)), 0)
    assert len(WorkloadSpec(arrival_rate=0, max_tasks=-1, horizon=-1).violations()) == 3


def test_streams_are_independent():
    # Changing the priority range must not move arrivals or instruction counts.
    a = generate_tasks(WorkloadSpec(priority_levels=3), 5)
    b = generate_tasks(WorkloadSpec(priority_levels=7), 5)
    assert [t.arrival_time for t in a] == [t.arrival_time for t in b]
    assert [t.instruction_count for t in a] == [t.instruction_count for t in b]


def test_csv_round_trip(tmp_path):
    ts = generate_tasks(WorkloadSpec(max_tasks=50), 2)
    text = ts.to_csv(tmp_path / "tasks.csv")
    assert text.splitlines()[0] == "id,arrival_ms,instructions,priority"
    back = TaskSet.from_csv(tmp_path / "tasks.csv")
    assert back.tasks == ts.tasks


@given(
    rate=st.floats(1.0, 1e5),
    horizon=st.floats(0.0, 0.5),
    max_tasks=st.integers(0, 300),
    k=st.integers(0, 6),
    lo=st.integers(1, 1000),
    width=st.integers(0, 10_000),
    seed=st.integers(0, 2**63),
)
def test_taskset_invariants(rate, horizon, max_tasks, k, lo, width, seed):
    spec = WorkloadSpec(rate, max_tasks, horizon, k, (lo, lo + width), 0)
    ts = generate_tasks(spec, seed)
    arr = [t.arrival_time for t in ts]
    assert len(ts) <= max_tasks
    assert all(a < b for a, b in zip(arr, arr[1:]))
    assert all(0 <= a <= horizon for a in arr)
    assert [t.id for t in ts] == list(range(len(ts)))
    assert all(lo <= t.instruction_count <= lo + width and 0 <= t.priority <= k for t in ts)
    assert all(t.finish_time is None and t.energy == 0.0 for t in ts)
