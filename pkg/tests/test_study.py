import math
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetbo import gp as gplib
from hetbo.optimizer import (
    MULTI_OBJECTIVE,
    ObjectiveSpec,
    SimulationEvaluator,
    propose_next,
    random_search,
    run_study,
    scalarized_cost,
)
from hetbo.optimizer import study as study_mod
from hetbo.searchspace import CONTINUOUS, ParamDef, SearchSpace, decode, default_space, validate
from hetbo.workload import WorkloadSpec

SCALAR = ObjectiveSpec()
MOO = ObjectiveSpec(mode=MULTI_OBJECTIVE)
FAST = dict(gp_starts=2, n_sobol=128, n_uniform=64, n_perturb=8)

LINE = SearchSpace((ParamDef("x", CONTINUOUS, 0.0, 1.0),))
PLANE = SearchSpace((ParamDef("x1", CONTINUOUS, -5.0, 10.0), ParamDef("x2", CONTINUOUS, 0.0, 15.0)))


def quadratic(point):
    return math.exp((point["x"] - 0.3) ** 2), 1.0


def branin(point):
    x1, x2 = point["x1"], point["x2"]
    b, c, t = 5.1 / (4 * math.pi**2), 5 / math.pi, 1 / (8 * math.pi)
    f = (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * math.cos(x1) + 10
    return f + 1.0, 1.0


def tradeoff(point):
    x1 = (point["x1"] + 5) / 15
    x2 = point["x2"] / 15
    return math.exp(x1 + 0.2 * x2), math.exp((1 - x1) ** 2 + 0.2 * x2)


def small_sim():
    return SimulationEvaluator(WorkloadSpec(max_tasks=60), seed=3)


def test_scalarized_cost_examples():
    assert scalarized_cost(1.0, 1.0, 3.0, 7.0) == 0.0
    assert scalarized_cost(math.e, math.e**2, 3.0, 1.0) == pytest.approx(5.0)
    assert scalarized_cost(2.0, 5.0) == scalarized_cost(5.0, 2.0)
    with pytest.raises(ValueError):
        scalarized_cost(0.0, 1.0)


def test_objective_spec_validation():
    with pytest.raises(ValueError):
        ObjectiveSpec(beta=0.0, gamma=0.0)
    with pytest.raises(ValueError):
        ObjectiveSpec(beta=-1.0)
    with pytest.raises(ValueError):
        ObjectiveSpec(penalty=math.inf)


@given(
    st.lists(st.tuples(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3)), min_size=1, max_size=30),
    st.floats(0.1, 5),
    st.floats(0.1, 5),
    st.floats(0.1, 10),
)
def test_weight_scaling_keeps_incumbent(pairs, beta, gamma, c):
    a = [scalarized_cost(e, t, beta, gamma) for e, t in pairs]
    b = [scalarized_cost(e, t, c * beta, c * gamma) for e, t in pairs]
    assert np.allclose(b, [c * v for v in a], rtol=1e-9, atol=1e-9)
    assert int(np.argmin(a)) == int(np.argmin(b)) or math.isclose(min(a), a[int(np.argmin(b))], rel_tol=1e-9, abs_tol=1e-9)


def test_pure_sobol_study_fits_nothing():
    s = run_study(default_space(), SCALAR, budget=5, n_init=5, seed=0, evaluator=small_sim())
    assert [t.source for t in s.trials] == ["sobol"] * 5
    assert s.gp_history == [] and s.models == {}


def test_study_is_deterministic_and_consistent():
    a = run_study(default_space(), SCALAR, budget=14, n_init=10, seed=4, evaluator=small_sim(), **FAST)
    b = run_study(default_space(), SCALAR, budget=14, n_init=10, seed=4, evaluator=small_sim(), **FAST)
    assert a.to_json() == b.to_json() and a.trials_csv() == b.trials_csv()
    for t in a.trials:
        assert validate(t.point, a.space) == []
        assert t.loss == pytest.approx(scalarized_cost(t.energy, t.latency))
    trace = a.best_loss_trace()
    assert all(x >= y for x, y in zip(trace, trace[1:]))
    assert a.incumbent.loss == min(t.loss for t in a.trials)
    assert [t.source for t in a.trials[10:]] == ["bo"] * 4
    assert len(a.gp_history) == 4


def test_random_search_bookkeeping():
    s = random_search(default_space(), SCALAR, budget=20, seed=2, evaluator=small_sim())
    assert {t.source for t in s.trials} == {"random"}
    trace = s.best_loss_trace()
    assert all(x >= y for x, y in zip(trace, trace[1:]))
    again = random_search(default_space(), SCALAR, budget=20, seed=2, evaluator=small_sim())
    assert again.trials_csv() == s.trials_csv()


def test_failed_evaluations_are_penalized():
    def flaky(point):
        if point["x"] > 0.6:
            raise RuntimeError("simulator crashed")
        return quadratic(point)

    s = run_study(LINE, SCALAR, budget=14, n_init=10, seed=0, evaluator=flaky, **FAST)
    bad = [t for t in s.trials if t.penalized]
    assert bad and all(t.loss == SCALAR.penalty and "crashed" in t.error for t in bad)
    targets = study_mod._targets(s)["loss"]
    assert targets.max() < SCALAR.penalty


def test_moo_study_invariants():
    s = run_study(PLANE, MOO, budget=18, n_init=10, seed=1, evaluator=tradeoff, **FAST)
    assert s.reference is not None and len(s.hv_trace) == 18
    assert all(a <= b + 1e-12 for a, b in zip(s.hv_trace, s.hv_trace[1:]))
    front = s.front()
    assert np.all(np.diff(front.points[:, 0]) > 0) and np.all(np.diff(front.points[:, 1]) < 0)
    for t in s.trials:
        assert t.loss == pytest.approx((math.log(t.energy), math.log(t.latency)))


def test_moo_penalty_sits_on_reference():
    def flaky(point):
        if point["x1"] > 7:
            raise ValueError("boom")
        return tradeoff(point)

    s = run_study(PLANE, MOO, budget=16, n_init=10, seed=0, evaluator=flaky, **FAST)
    bad = [t for t in s.trials if t.penalized]
    assert bad and all(t.loss == s.reference for t in bad)
    assert all(a <= b + 1e-12 for a, b in zip(s.hv_trace, s.hv_trace[1:]))


def test_proposals_always_valid():
    s = run_study(default_space(), SCALAR, budget=10, n_init=10, seed=0, evaluator=small_sim())
    rng = np.random.default_rng(0)
    for _ in range(3):
        assert validate(propose_next(s, rng=rng, **FAST), s.space) == []


def test_tie_goes_to_first_candidate(monkeypatch):
    s = run_study(LINE, SCALAR, budget=5, n_init=5, seed=0, evaluator=quadratic)
    cands = np.array([[0.11], [0.52], [0.93]])
    monkeypatch.setattr(study_mod, "candidate_vectors", lambda *a, **k: cands)
    flat = lambda model, x: gplib.Posterior(np.zeros(len(x)), np.ones(len(x)))  # noqa: E731
    monkeypatch.setattr(study_mod.gplib, "predict", flat)
    assert propose_next(s, rng=np.random.default_rng(0), gp_starts=1) == decode(cands[0], LINE)


def test_gp_failure_falls_back_to_random(monkeypatch):
    s = run_study(LINE, SCALAR, budget=5, n_init=5, seed=0, evaluator=quadratic)

    def broken(*a, **k):
        raise gplib.NumericalError("not positive definite")

    monkeypatch.setattr(study_mod.gplib, "fit_gp", broken)
    info = {}
    p = propose_next(s, rng=np.random.default_rng(0), info=info)
    assert "fallback" in info and validate(p, LINE) == []


def test_quadratic_argmax_is_bracketed():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        s = study_mod.Study(LINE, SCALAR, gplib.MATERN52, seed)
        for x in rng.random(10):
            study_mod._record(s, {"x": float(x)}, "random", quadratic)
        xs = sorted(t.point["x"] for t in s.trials)
        best = s.incumbent.point["x"]
        i = xs.index(best)
        lo = xs[i - 1] if i > 0 else 0.0
        hi = xs[i + 1] if i + 1 < len(xs) else 1.0
        x_next = propose_next(s, rng=rng)["x"]
        hits += lo <= x_next <= hi
    assert hits >= 8


def test_bo_beats_random_on_branin():
    bo, rs = [], []
    for seed in range(20):
        bo.append(run_study(PLANE, SCALAR, budget=50, n_init=10, seed=seed, evaluator=branin, **FAST).incumbent.loss)
        rs.append(random_search(PLANE, SCALAR, budget=50, seed=seed, evaluator=branin).incumbent.loss)
    assert statistics.median(bo) < statistics.median(rs)


def test_study_serialization():
    s = run_study(default_space(), SCALAR, budget=11, n_init=10, seed=0, evaluator=small_sim(), **FAST)
    d = s.to_dict()
    assert d["incumbent"]["trial"] == s.incumbent.index
    assert len(d["trials"]) == 11 and set(d["gp_history"][0]["loss"]["length_scales"]) == set(s.param_labels())
    header = s.trials_csv().splitlines()[0].split(",")
    assert header[:2] == ["index", "source"] and "energy_j" in header
