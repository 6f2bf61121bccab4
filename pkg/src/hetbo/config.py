"""Experiment configuration files (YAML).

File units are GHz, ms and tasks/ms; everything is converted to SI on load.
Unknown keys are rejected and omitted keys take the defaults below.

Schema (``schema_version: 1``)::

    scenario: single | kernel_comparison | preference_sweep | lambda_sweep | moo
    workload:   {arrival_rate_per_ms, max_tasks, horizon_ms, priority_levels,
                 instruction_range: [lo, hi], seed}
    constants:  {k_v_ghz_per_volt, b_f_ghz, capacitance_f, leakage_current_a,
                 activity, ipc}
    space:      {param: [low, high] | [options...]}  or  [ {name, type, range|options, conditional}, ... ]
    objective:  {mode: scalarized | multi_objective, beta, gamma, penalty}
    weights:    [[beta, gamma], ...]          # preference_sweep
    kernels:    [RBF | Matern32 | Matern52, ...]
    lambdas_per_ms: [float, ...]              # lambda_sweep
    budget, n_init: int
    seeds:      [int, ...]
    baseline:   bool                          # also run random search
    optimizer:  {n_sobol, n_uniform, n_perturb, perturb_sigma, gp_restarts}
    contour:    [x_param, y_param]
    output_dir: path
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .gp import FAMILIES, MATERN52
from .optimizer.study import MULTI_OBJECTIVE, SCALARIZED, ObjectiveSpec
from .searchspace import SearchSpace, SpaceError, default_space, space_from_dicts, space_to_dicts
from .simcore import PowerConstants, SimulationError
from .workload import WorkloadSpec

SCHEMA_VERSION = 1
SCENARIOS = ("single", "kernel_comparison", "preference_sweep", "lambda_sweep", "moo")

DEFAULT_WEIGHTS = ((1.0, 1.0), (3.0, 1.0), (1.0, 3.0))
DEFAULT_LAMBDAS_PER_MS = (0.5, 1.0, 2.5, 5.0)
DEFAULT_SEEDS = tuple(range(10))

_TOP_KEYS = {
    "schema_version",
    "scenario",
    "workload",
    "constants",
    "space",
    "objective",
    "weights",
    "kernels",
    "lambdas_per_ms",
    "budget",
    "n_init",
    "seeds",
    "baseline",
    "optimizer",
    "contour",
    "output_dir",
}
_WORKLOAD_KEYS = {"arrival_rate_per_ms", "max_tasks", "horizon_ms", "priority_levels", "instruction_range", "seed"}
_CONSTANT_KEYS = {"k_v_ghz_per_volt", "b_f_ghz", "capacitance_f", "leakage_current_a", "activity", "ipc"}
_OBJECTIVE_KEYS = {"mode", "beta", "gamma", "penalty"}
_OPTIMIZER_KEYS = {"n_sobol", "n_uniform", "n_perturb", "perturb_sigma", "gp_restarts"}


class ConfigError(ValueError):
    """Unreadable or invalid experiment configuration."""


@dataclass(frozen=True)
class OptimizerSettings:
    n_sobol: int = 1024
    n_uniform: int = 512
    n_perturb: int = 16
    perturb_sigma: float = 0.05
    gp_restarts: int = 8

    def candidate_kw(self) -> dict:
        return {
            "n_sobol": self.n_sobol,
            "n_uniform": self.n_uniform,
            "n_perturb": self.n_perturb,
            "perturb_sigma": self.perturb_sigma,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "single"
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    constants: PowerConstants = field(default_factory=PowerConstants)
    space: SearchSpace = field(default_factory=default_space)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    weights: tuple[tuple[float, float], ...] = DEFAULT_WEIGHTS
    kernels: tuple[str, ...] | None = None
    lambdas: tuple[float, ...] = tuple(v * 1e3 for v in DEFAULT_LAMBDAS_PER_MS)
    budget: int = 100
    n_init: int = 10
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    baseline: bool = True
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    contour: tuple[str, str] = ("freq_big", "freq_little")
    output_dir: str = "results"

    @property
    def kernel_families(self) -> tuple[str, ...]:
        if self.kernels is not None:
            return self.kernels
        return FAMILIES if self.scenario == "kernel_comparison" else (MATERN52,)

    def violations(self) -> list[str]:
        out = []
        if self.scenario not in SCENARIOS:
            out.append(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not self.seeds:
            out.append("seeds must be non-empty")
        if self.n_init < 1:
            out.append("n_init must be >= 1")
        if self.budget < self.n_init:
            out.append(f"budget ({self.budget}) must be >= n_init ({self.n_init})")
        for k in self.kernel_families:
            if k not in FAMILIES:
                out.append(f"unknown kernel {k!r}; choose from {FAMILIES}")
        if self.scenario == "preference_sweep" and not self.weights:
            out.append("preference_sweep needs at least one weight pair")
        if self.scenario == "lambda_sweep" and not self.lambdas:
            out.append("lambda_sweep needs at least one arrival rate")
        for name in self.contour:
            if name not in self.space.names:
                out.append(f"contour parameter {name!r} is not in the search space")
        out += self.workload.violations()
        return out

    def to_dict(self) -> dict[str, Any]:
        """Resolved config in file units (round-trips through :func:`parse_config`)."""
        w, c, o, opt = self.workload, self.constants, self.objective, self.optimizer
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "workload": {
                "arrival_rate_per_ms": w.arrival_rate / 1e3,
                "max_tasks": w.max_tasks,
                "horizon_ms": w.horizon * 1e3,
                "priority_levels": w.priority_levels,
                "instruction_range": list(w.instruction_range),
                "seed": w.seed,
            },
            "constants": {
                "k_v_ghz_per_volt": c.k_v / 1e9,
                "b_f_ghz": c.b_f / 1e9,
                "capacitance_f": c.capacitance,
                "leakage_current_a": c.leakage_current,
                "activity": c.activity,
                "ipc": c.ipc,
            },
            "space": space_to_dicts(self.space),
            "objective": o.to_dict(),
            "weights": [list(p) for p in self.weights],
            "kernels": list(self.kernel_families),
            "lambdas_per_ms": [v / 1e3 for v in self.lambdas],
            "budget": self.budget,
            "n_init": self.n_init,
            "seeds": list(self.seeds),
            "baseline": self.baseline,
            "optimizer": {
                "n_sobol": opt.n_sobol,
                "n_uniform": opt.n_uniform,
                "n_perturb": opt.n_perturb,
                "perturb_sigma": opt.perturb_sigma,
                "gp_restarts": opt.gp_restarts,
            },
            "contour": list(self.contour),
            "output_dir": self.output_dir,
        }


def _check_keys(section: str, data: Any, allowed: set[str], problems: list[str]) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        problems.append(f"{section}: expected a mapping")
        return {}
    for key in sorted(set(data) - allowed):
        problems.append(f"{section}: unknown key {key!r}")
    return data


def parse_config(data: Any) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from an already-parsed mapping."""
    problems: list[str] = []
    data = _check_keys("config", data, _TOP_KEYS, problems)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"config: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    cfg = ExperimentConfig()
    kw: dict[str, Any] = {}

    w = _check_keys("workload", data.get("workload"), _WORKLOAD_KEYS, problems)
    base = cfg.workload
    try:
        kw["workload"] = WorkloadSpec(
            arrival_rate=float(w.get("arrival_rate_per_ms", base.arrival_rate / 1e3)) * 1e3,
            max_tasks=int(w.get("max_tasks", base.max_tasks)),
            horizon=float(w.get("horizon_ms", base.horizon * 1e3)) / 1e3,
            priority_levels=int(w.get("priority_levels", base.priority_levels)),
            instruction_range=tuple(int(v) for v in w.get("instruction_range", base.instruction_range)),
            seed=int(w.get("seed", base.seed)),
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"workload: {exc}")

    c = _check_keys("constants", data.get("constants"), _CONSTANT_KEYS, problems)
    pc = cfg.constants
    try:
        kw["constants"] = PowerConstants(
            k_v=float(c.get("k_v_ghz_per_volt", pc.k_v / 1e9)) * 1e9,
            b_f=float(c.get("b_f_ghz", pc.b_f / 1e9)) * 1e9,
            capacitance=float(c.get("capacitance_f", pc.capacitance)),
            leakage_current=float(c.get("leakage_current_a", pc.leakage_current)),
            activity=float(c.get("activity", pc.activity)),
            ipc=float(c.get("ipc", pc.ipc)),
        )
    except (TypeError, ValueError, SimulationError) as exc:
        problems.append(f"constants: {exc}")

    space = data.get("space")
    if space is not None:
        try:
            if isinstance(space, dict):
                kw["space"] = default_space().with_bounds(space)
            elif isinstance(space, list):
                kw["space"] = space_from_dicts(space)
            else:
                problems.append("space: expected a mapping of overrides or a list of parameter definitions")
        except (SpaceError, KeyError, TypeError, ValueError) as exc:
            problems.append(f"space: {exc}")

    scenario = data.get("scenario", cfg.scenario)
    kw["scenario"] = scenario
    o = _check_keys("objective", data.get("objective"), _OBJECTIVE_KEYS, problems)
    default_mode = MULTI_OBJECTIVE if scenario == "moo" else SCALARIZED
    try:
        kw["objective"] = ObjectiveSpec(
            mode=o.get("mode", default_mode),
            beta=float(o.get("beta", 1.0)),
            gamma=float(o.get("gamma", 1.0)),
            penalty=float(o.get("penalty", 1e6)),
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"objective: {exc}")

    try:
        if "weights" in data:
            kw["weights"] = tuple((float(b), float(g)) for b, g in data["weights"])
        if "kernels" in data:
            kw["kernels"] = tuple(str(k) for k in data["kernels"])
        if "lambdas_per_ms" in data:
            kw["lambdas"] = tuple(float(v) * 1e3 for v in data["lambdas_per_ms"])
        for key in ("budget", "n_init"):
            if key in data:
                kw[key] = int(data[key])
        if "seeds" in data:
            kw["seeds"] = tuple(int(s) for s in data["seeds"])
        if "baseline" in data:
            kw["baseline"] = bool(data["baseline"])
        if "contour" in data:
            x, y = data["contour"]
            kw["contour"] = (str(x), str(y))
        if "output_dir" in data:
            kw["output_dir"] = str(data["output_dir"])
    except (TypeError, ValueError) as exc:
        problems.append(f"config: {exc}")

    opt = _check_keys("optimizer", data.get("optimizer"), _OPTIMIZER_KEYS, problems)
    if opt:
        try:
            kw["optimizer"] = replace(cfg.optimizer, **{k: type(getattr(cfg.optimizer, k))(v) for k, v in opt.items()})
        except (TypeError, ValueError) as exc:
            problems.append(f"optimizer: {exc}")

    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    cfg = replace(cfg, **kw)
    problems = cfg.violations()
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"cannot parse {path}{where}: {getattr(exc, 'problem', exc)}") from exc
    return parse_config(data if data is not None else {})
