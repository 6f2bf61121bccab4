"""Study bookkeeping and the Bayesian-optimization / random-search loops."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .. import gp as gplib
from ..searchspace import (
    CATEGORICAL,
    DesignPoint,
    SearchSpace,
    encode,
    decode,
    project_batch,
    random_sample,
    sobol_sample,
    sobol_vectors,
)
from .acquisition import ehvi, log_expected_improvement
from .pareto import ParetoFront, hypervolume_2d, pareto_front, reference_point

logger = logging.getLogger("hetbo.optimizer")

SCALARIZED = "scalarized"
MULTI_OBJECTIVE = "multi_objective"

Evaluator = Callable[[DesignPoint], tuple[float, float]]


@dataclass(frozen=True)
class ObjectiveSpec:
    mode: str = SCALARIZED
    beta: float = 1.0
    gamma: float = 1.0
    penalty: float = 1e6

    def __post_init__(self):
        if self.mode not in (SCALARIZED, MULTI_OBJECTIVE):
            raise ValueError(f"unknown objective mode {self.mode!r}")
        if self.beta < 0 or self.gamma < 0:
            raise ValueError("preference weights must be non-negative")
        if self.mode == SCALARIZED and self.beta == 0 and self.gamma == 0:
            raise ValueError("beta and gamma cannot both be zero")
        if not math.isfinite(self.penalty):
            raise ValueError("penalty must be finite")

    @property
    def is_moo(self) -> bool:
        return self.mode == MULTI_OBJECTIVE

    def to_dict(self) -> dict:
        return {"mode": self.mode, "beta": self.beta, "gamma": self.gamma, "penalty": self.penalty}


def scalarized_cost(energy: float, latency: float, beta: float = 1.0, gamma: float = 1.0) -> float:
    """beta * ln(E) + gamma * ln(T)."""
    if not (energy > 0 and latency > 0):
        raise ValueError(f"energy and latency must be positive, got E={energy}, T={latency}")
    return beta * math.log(energy) + gamma * math.log(latency)


@dataclass
class Trial:
    index: int
    point: DesignPoint
    energy: float | None
    latency: float | None
    loss: float | tuple[float, float] | None
    source: str
    error: str | None = None

    @property
    def penalized(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        loss = list(self.loss) if isinstance(self.loss, tuple) else self.loss
        return {
            "index": self.index,
            "source": self.source,
            "point": self.point,
            "energy_j": self.energy,
            "latency_s": self.latency,
            "loss": loss,
            "error": self.error,
        }


@dataclass
class Study:
    space: SearchSpace
    objective: ObjectiveSpec
    kernel_family: str | None
    seed: int
    config: dict[str, Any] = field(default_factory=dict)
    trials: list[Trial] = field(default_factory=list)
    hv_trace: list[float] = field(default_factory=list)
    reference: tuple[float, float] | None = None
    gp_history: list[dict] = field(default_factory=list)
    models: dict[str, gplib.GpModel] = field(default_factory=dict, repr=False)
    notes: list[str] = field(default_factory=list)

    @property
    def is_moo(self) -> bool:
        return self.objective.is_moo

    def valid_trials(self) -> list[Trial]:
        return [t for t in self.trials if not t.penalized]

    @property
    def incumbent(self) -> Trial | ParetoFront | None:
        if self.is_moo:
            return self.front()
        if not self.trials:
            return None
        return min(self.trials, key=lambda t: (t.loss, t.index))

    def best_loss_trace(self) -> list[float]:
        """Running minimum of the scalarized loss."""
        out, best = [], math.inf
        for t in self.trials:
            best = min(best, t.loss)
            out.append(best)
        return out

    def objective_pairs(self) -> np.ndarray:
        return np.array([t.loss for t in self.trials], dtype=float).reshape(-1, 2)

    def front(self, upto: int | None = None) -> ParetoFront:
        """Pareto front of the first ``upto`` trials inside the reference box."""
        trials = self.trials[:upto] if upto is not None else self.trials
        pairs = [(t.loss, t.index) for t in trials if not t.penalized]
        if self.reference is not None:
            r = self.reference
            pairs = [(l, i) for l, i in pairs if l[0] <= r[0] and l[1] <= r[1]]
        if not pairs:
            return ParetoFront(np.empty((0, 2)), ())
        return pareto_front([p for p, _ in pairs], [i for _, i in pairs])

    def param_labels(self) -> list[str]:
        """Name of every encoded dimension (one-hot columns as ``name=option``)."""
        labels = []
        for p in self.space:
            if p.kind == CATEGORICAL:
                labels += [f"{p.name}={o}" for o in p.options]
            else:
                labels.append(p.name)
        return labels

    def to_dict(self) -> dict:
        inc = self.incumbent
        if isinstance(inc, ParetoFront):
            incumbent = {"pareto_front": inc.to_list()}
        elif inc is None:
            incumbent = None
        else:
            incumbent = {"trial": inc.index, "loss": inc.loss, "point": inc.point}
        return {
            "config": self.config,
            "objective": self.objective.to_dict(),
            "kernel_family": self.kernel_family,
            "seed": self.seed,
            "trials": [t.to_dict() for t in self.trials],
            "incumbent": incumbent,
            "reference_point": list(self.reference) if self.reference is not None else None,
            "hv_trace": self.hv_trace,
            "gp_history": self.gp_history,
            "notes": self.notes,
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=False)
        if path is not None:
            Path(path).write_text(text)
        return text

    def trials_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = self.space.names
        w.writerow(["index", "source", *names, "energy_j", "latency_s", "loss_0", "loss_1", "error"])
        for t in self.trials:
            loss = t.loss if isinstance(t.loss, tuple) else (t.loss, "")
            vals = ["" if t.point.get(n) is None else t.point[n] for n in names]
            w.writerow([t.index, t.source, *vals, _num(t.energy), _num(t.latency), _num(loss[0]), _num(loss[1]), t.error or ""])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _num(v):
    return "" if v is None or v == "" else repr(float(v))


# -- evaluation -----------------------------------------------------------------


def _record(study: Study, point: DesignPoint, source: str, evaluator: Evaluator) -> Trial:
    obj = study.objective
    index = len(study.trials)
    try:
        energy, latency = evaluator(point)
        energy, latency = float(energy), float(latency)
        if obj.is_moo:
            if not (energy > 0 and latency > 0):
                raise ValueError(f"non-positive objective E={energy}, T={latency}")
            loss: Any = (math.log(energy), math.log(latency))
        else:
            loss = scalarized_cost(energy, latency, obj.beta, obj.gamma)
        trial = Trial(index, point, energy, latency, loss, source)
    except Exception as exc:  # noqa: BLE001 - any evaluator failure becomes a penalized trial
        msg = f"{type(exc).__name__}: {exc}"
        logger.info("trial %d penalized (%s)", index, msg)
        study.notes.append(f"trial {index} penalized: {msg}")
        loss = study.reference if obj.is_moo else obj.penalty
        trial = Trial(index, point, None, None, loss, source, error=msg)
    study.trials.append(trial)
    return trial


def _update_moo(study: Study, n_init: int) -> None:
    """Freeze the reference point after warm-up and extend the HV trace."""
    n = len(study.trials)
    if study.reference is None:
        if n < n_init:
            return
        valid = [t.loss for t in study.valid_trials()]
        study.reference = reference_point(np.array(valid)) if valid else (study.objective.penalty,) * 2
        for t in study.trials:
            if t.penalized:
                t.loss = study.reference
        study.hv_trace = [hypervolume_2d(study.front(k), study.reference) for k in range(1, n + 1)]
        return
    if study.trials[-1].penalized:
        study.trials[-1].loss = study.reference
    study.hv_trace.append(hypervolume_2d(study.front(), study.reference))


# -- proposal -------------------------------------------------------------------


def _targets(study: Study) -> dict[str, np.ndarray]:
    """GP training targets; penalized trials get the worst observed value."""
    if study.is_moo:
        pairs = study.objective_pairs()
        ok = np.array([not t.penalized for t in study.trials])
        if ok.any():
            worst = study.reference if study.reference is not None else pairs[ok].max(0)
            pairs = np.where(ok[:, None], pairs, np.asarray(worst)[None, :])
        return {"energy": pairs[:, 0], "time": pairs[:, 1]}
    loss = np.array([t.loss for t in study.trials], dtype=float)
    ok = np.array([not t.penalized for t in study.trials])
    if ok.any():
        loss = np.where(ok, loss, loss[ok].max())
    return {"loss": loss}


def candidate_vectors(
    study: Study,
    rng: np.random.Generator,
    n_sobol: int = 1024,
    n_uniform: int = 512,
    n_perturb: int = 16,
    perturb_sigma: float = 0.05,
) -> np.ndarray:
    """Scrambled Sobol, uniform and incumbent-perturbation candidates, projected."""
    dim = study.space.dim
    blocks = [sobol_vectors(n_sobol, dim, seed=rng, scramble=True), rng.random((n_uniform, dim))]
    if n_perturb:
        if study.is_moo:
            centers = [study.trials[i].point for i in study.front().indices] or [study.trials[0].point]
        else:
            centers = [study.incumbent.point]
        base = np.array([encode(centers[k % len(centers)], study.space) for k in range(n_perturb)])
        blocks.append(np.clip(base + perturb_sigma * rng.standard_normal(base.shape), 0.0, 1.0))
    return project_batch(np.vstack(blocks), study.space)


def propose_next(
    study: Study,
    space: SearchSpace | None = None,
    kernel_family: str | None = None,
    objective: ObjectiveSpec | None = None,
    rng: np.random.Generator | None = None,
    info: dict | None = None,
    gp_starts: int = 8,
    **candidate_kw,
) -> DesignPoint:
    """Fit the surrogate(s) on all trials and return the acquisition argmax.

    LogEI drives scalarized studies and EHVI drives multi-objective ones.
    On a GP failure a uniform random point is returned instead. Fitted
    models and the fallback flag are written to ``info`` when given.
    """
    space = space or study.space
    family = kernel_family or study.kernel_family or gplib.MATERN52
    objective = objective or study.objective
    rng = rng if rng is not None else np.random.default_rng(study.seed)
    if not study.trials:
        raise ValueError("propose_next needs at least one completed trial")
    info = {} if info is None else info
    x = np.array([encode(t.point, space) for t in study.trials])
    targets = _targets(study)
    gp_seed = int(rng.integers(2**63))
    try:
        models = {}
        for k, (name, y) in enumerate(targets.items()):
            prev = study.models.get(name)
            models[name] = gplib.fit_gp(
                x, y, family, seed=gp_seed + k, n_starts=gp_starts, init=prev.kernel if prev is not None else None
            )
    except (gplib.NumericalError, np.linalg.LinAlgError, ValueError) as exc:
        msg = f"GP fit failed at trial {len(study.trials)} ({exc}); falling back to random sampling"
        logger.info(msg)
        info["fallback"] = msg
        return random_sample(space, rng)
    info["models"] = models
    cands = candidate_vectors(study, rng, **candidate_kw)
    if objective.is_moo:
        pe = gplib.predict(models["energy"], cands)
        pt = gplib.predict(models["time"], cands)
        mean = np.column_stack([pe.mean, pt.mean])
        var = np.column_stack([pe.variance, pt.variance])
        ref = study.reference if study.reference is not None else reference_point(study.objective_pairs())
        front = study.front() if study.reference is not None else pareto_front(study.objective_pairs())
        acq = ehvi(mean, var, front, ref)
    else:
        post = gplib.predict(models["loss"], cands)
        best = float(targets["loss"].min())
        acq = log_expected_improvement(post.mean, post.variance, best)
    info["acquisition"] = float(acq.max())
    return decode(cands[int(np.argmax(acq))], space)


# -- studies --------------------------------------------------------------------


def _log_refit(study: Study, models: dict[str, gplib.GpModel]) -> None:
    labels = study.param_labels()
    entry = {"trial": len(study.trials)}
    for name, m in models.items():
        entry[name] = {
            "length_scales": dict(zip(labels, m.kernel.length_scales)),
            "signal_variance": m.kernel.signal_variance,
            "noise_variance": m.kernel.noise_variance,
            "lml": m.lml,
            "degenerate": m.degenerate,
        }
    study.gp_history.append(entry)


def run_study(
    space: SearchSpace,
    objective: ObjectiveSpec,
    kernel_family: str = gplib.MATERN52,
    budget: int = 100,
    n_init: int = 10,
    seed: int = 0,
    evaluator: Evaluator | None = None,
    config: dict | None = None,
    gp_starts: int = 8,
    **candidate_kw,
) -> Study:
    """Sobol warm-up followed by GP-guided proposals until ``budget`` trials."""
    if evaluator is None:
        raise ValueError("an evaluator is required")
    if not budget >= n_init >= 1:
        raise ValueError(f"need budget >= n_init >= 1, got budget={budget}, n_init={n_init}")
    study = Study(space, objective, kernel_family, seed, dict(config or {}))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for point in sobol_sample(n_init, space):
        _record(study, point, "sobol", evaluator)
        if objective.is_moo:
            _update_moo(study, n_init)
    while len(study.trials) < budget:
        info: dict = {}
        point = propose_next(study, space, kernel_family, objective, rng, info=info, gp_starts=gp_starts, **candidate_kw)
        if "models" in info:
            study.models = info["models"]
            _log_refit(study, info["models"])
        else:
            study.notes.append(info.get("fallback", "fallback"))
        _record(study, point, "bo" if "models" in info else "random", evaluator)
        if objective.is_moo:
            _update_moo(study, n_init)
    return study


def random_search(
    space: SearchSpace,
    objective: ObjectiveSpec,
    budget: int = 100,
    seed: int = 0,
    evaluator: Evaluator | None = None,
    config: dict | None = None,
    n_init: int = 10,
) -> Study:
    """Uniform random baseline with the same bookkeeping as :func:`run_study`.

    ``n_init`` only sets when the multi-objective reference point freezes.
    """
    if evaluator is None:
        raise ValueError("an evaluator is required")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    study = Study(space, objective, None, seed, dict(config or {}))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_ref = min(n_init, budget)
    for _ in range(budget):
        _record(study, random_sample(space, rng), "random", evaluator)
        if objective.is_moo:
            _update_moo(study, n_ref)
    return study


def fit_final_models(study: Study, gp_starts: int = 8) -> dict[str, gplib.GpModel]:
    """Refit the surrogate(s) on every trial, e.g. for importance analysis."""
    x = np.array([encode(t.point, study.space) for t in study.trials])
    family = study.kernel_family or gplib.MATERN52
    models = {}
    for k, (name, y) in enumerate(_targets(study).items()):
        prev = study.models.get(name)
        models[name] = gplib.fit_gp(x, y, family, seed=study.seed + k, n_starts=gp_starts, init=prev.kernel if prev else None)
    study.models = models
    return models
