"""Command-line experiment runner.

``hetbo run configs/default.yaml --jobs 4`` expands a scenario into
independent (variant, algorithm, seed) runs, executes them, and writes
per-run studies, plots and importance reports plus a scenario summary.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import (
    ImportanceError,
    contour_series,
    emit_plot,
    history_series,
    importance_series,
    moo_importance,
    pareto_series,
    sensitivity_importance,
)
from .config import ConfigError, ExperimentConfig, load_config
from .optimizer import SimulationEvaluator, fit_final_models, random_search, run_study
from .optimizer.study import MULTI_OBJECTIVE, ObjectiveSpec, Study
from .searchspace import to_system_config
from .simcore import run_simulation
from .workload import generate_tasks

logger = logging.getLogger("runner")

BO = "bo"
RANDOM = "random"

_PANEL_TITLES = {
    "single": "Single study",
    "kernel_comparison": "Kernel calibration",
    "preference_sweep": "Preference sweep",
    "lambda_sweep": "Workload robustness",
    "moo": "Multi-objective",
}
_CLASSES = (("little", "Little"), ("medium", "Medium"), ("big", "Big"))


@dataclass(frozen=True)
class RunSpec:
    """One independent study: variant label, algorithm, kernel, seed and overrides."""

    variant: str
    algorithm: str
    seed: int
    kernel: str | None
    beta: float
    gamma: float
    arrival_rate: float

    @property
    def run_id(self) -> str:
        return f"{self.variant}/{self.algorithm}_seed{self.seed}"


@dataclass
class RunRecord:
    run_id: str
    variant: str
    algorithm: str
    kernel: str | None
    seed: int
    status: str
    outputs: dict[str, str] = field(default_factory=dict)
    duration_s: float = 0.0
    best_value: float | None = None
    best_point: dict | None = None
    best_objectives: list[float] | None = None
    error: str | None = None


@dataclass
class RunManifest:
    config: dict[str, Any]
    tool_version: str
    out_dir: str
    runs: list[RunRecord] = field(default_factory=list)
    duration_s: float = 0.0

    @property
    def failed(self) -> list[RunRecord]:
        return [r for r in self.runs if r.status != "ok"]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "tool_version": self.tool_version,
            "out_dir": self.out_dir,
            "duration_s": self.duration_s,
            "runs": [asdict(r) for r in self.runs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunManifest:
        runs = [RunRecord(**r) for r in data.get("runs", [])]
        return cls(data["config"], data["tool_version"], data["out_dir"], runs, data.get("duration_s", 0.0))


# -- scenario expansion ---------------------------------------------------------


def _fmt_num(v: float) -> str:
    return f"{v:g}"


def expand_runs(cfg: ExperimentConfig) -> list[RunSpec]:
    """Every (variant, algorithm, seed) run a scenario consists of, in a fixed order."""
    base = dict(beta=cfg.objective.beta, gamma=cfg.objective.gamma, arrival_rate=cfg.workload.arrival_rate)
    fam = cfg.kernel_families[0]
    variants: list[tuple[str, dict]]
    if cfg.scenario == "preference_sweep":
        variants = [(f"beta{_fmt_num(b)}_gamma{_fmt_num(g)}", dict(base, beta=b, gamma=g)) for b, g in cfg.weights]
    elif cfg.scenario == "lambda_sweep":
        variants = [(f"lambda{_fmt_num(r / 1e3)}", dict(base, arrival_rate=r)) for r in cfg.lambdas]
    else:
        variants = [(cfg.scenario if cfg.scenario == "moo" else "default", base)]

    runs = []
    for seed in cfg.seeds:
        if cfg.scenario == "kernel_comparison":
            for k in cfg.kernel_families:
                runs.append(RunSpec(k, BO, seed, k, **base))
            if cfg.baseline:
                runs.append(RunSpec("baseline", RANDOM, seed, None, **base))
            continue
        for name, kw in variants:
            runs.append(RunSpec(name, BO, seed, fam, **kw))
            if cfg.baseline:
                runs.append(RunSpec(name, RANDOM, seed, None, **kw))
    return runs


def workload_seed(base_seed: int, run_seed: int) -> int:
    """Task-set seed shared by every algorithm run on ``run_seed``."""
    return int(np.random.SeedSequence([base_seed, run_seed]).generate_state(1)[0])


# -- single run -----------------------------------------------------------------


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")


def execute_run(cfg: ExperimentConfig, spec: RunSpec, root: str | Path) -> RunRecord:
    """Run one study and write its artifacts under ``root/<run_id>``."""
    t0 = time.perf_counter()
    rec = RunRecord(spec.run_id, spec.variant, spec.algorithm, spec.kernel, spec.seed, "ok")
    out = Path(root) / spec.run_id
    try:
        out.mkdir(parents=True, exist_ok=True)
        workload = replace(cfg.workload, arrival_rate=spec.arrival_rate)
        objective = replace(cfg.objective, beta=spec.beta, gamma=spec.gamma)
        evaluator = SimulationEvaluator(workload, cfg.constants, workload_seed(workload.seed, spec.seed))
        meta = {
            "run_id": spec.run_id,
            "scenario": cfg.scenario,
            "variant": spec.variant,
            "algorithm": spec.algorithm,
            "arrival_rate_per_ms": spec.arrival_rate / 1e3,
            "workload_seed": evaluator.seed,
            "budget": cfg.budget,
            "n_init": cfg.n_init,
        }
        logger.info("starting %s", spec.run_id)
        opt = cfg.optimizer
        if spec.algorithm == BO:
            study = run_study(
                cfg.space, objective, spec.kernel, cfg.budget, cfg.n_init, spec.seed, evaluator, meta,
                gp_starts=opt.gp_restarts, **opt.candidate_kw(),
            )
        else:
            study = random_search(cfg.space, objective, cfg.budget, spec.seed, evaluator, meta, n_init=cfg.n_init)
        rec.outputs = _write_artifacts(cfg, study, spec, out)
        _fill_best(rec, study)
        logger.info("finished %s best=%s", spec.run_id, rec.best_value)
    except Exception as exc:  # noqa: BLE001 - failures are recorded per run
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        logger.info("run %s failed: %s", spec.run_id, rec.error)
    rec.duration_s = time.perf_counter() - t0
    return rec


def _write_artifacts(cfg: ExperimentConfig, study: Study, spec: RunSpec, out: Path) -> dict[str, str]:
    paths: dict[str, str] = {}
    reports = []
    importance: dict[str, Any]
    try:
        models = fit_final_models(study, gp_starts=cfg.optimizer.gp_restarts)
        if study.is_moo:
            reports = list(moo_importance(study, spec.run_id))
        else:
            reports = [sensitivity_importance(models["loss"], study.space, "Loss", spec.run_id)]
        importance = {"reports": [r.to_dict() for r in reports]}
    except ImportanceError as exc:
        importance = {"reports": [], "error": str(exc)}

    data = study.to_dict()
    data["importance"] = importance
    _write_json(out / "study.json", data)
    study.trials_csv(out / "trials.csv")
    _write_json(out / "importance.json", importance)
    paths.update(study=str(out / "study.json"), trials=str(out / "trials.csv"), importance=str(out / "importance.json"))

    series = []
    if study.is_moo:
        series.append(("pareto", pareto_series(study, penalty=cfg.objective.penalty)))
    else:
        series.append(("history", history_series(study, f"Optimization history ({spec.run_id})")))
        if spec.algorithm == BO and "loss" in study.models:
            x, y = cfg.contour
            series.append(("contour", contour_series(study.models["loss"], study.space, study.incumbent.point, x, y)))
    if reports:
        series.append(("importance_plot", importance_series(reports)))
    for name, s in series:
        if not s.rows:
            continue
        svg = emit_plot(s, out / f"{name}.svg")
        paths[name] = str(svg)
        paths[f"{name}_csv"] = str(svg.with_suffix(".csv"))
    return paths


def _knee(study: Study):
    """Front member with the smallest summed log objectives."""
    front = study.front()
    if not front.indices:
        return None
    k = int(np.argmin(front.points.sum(axis=1)))
    return study.trials[front.indices[k]]


def _fill_best(rec: RunRecord, study: Study) -> None:
    if study.is_moo:
        rec.best_value = study.hv_trace[-1] if study.hv_trace else None
        best = _knee(study)
    else:
        best = study.incumbent
        rec.best_value = None if best is None else float(best.loss)
    if best is not None:
        rec.best_point = dict(best.point)
        rec.best_objectives = None if best.energy is None else [best.energy, best.latency]


# -- scenario -------------------------------------------------------------------


def _run_one(args: tuple[ExperimentConfig, RunSpec, str]) -> RunRecord:
    return execute_run(*args)


def run_scenario(cfg: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1) -> RunManifest:
    """Execute every run of the scenario and write summary and manifest files."""
    t0 = time.perf_counter()
    root = Path(out_dir if out_dir is not None else cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    specs = expand_runs(cfg)
    logger.info("scenario %s: %d runs into %s", cfg.scenario, len(specs), root)
    work = [(cfg, s, str(root)) for s in specs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, work))
    else:
        records = [_run_one(w) for w in work]
    manifest = RunManifest(cfg.to_dict(), __version__, str(root), records)
    (root / "summary.csv").write_text(summary_csv(manifest))
    (root / "summary.txt").write_text(print_summary(manifest))
    manifest.duration_s = time.perf_counter() - t0
    _write_json(root / "manifest.json", manifest.to_dict())
    return manifest


# -- reporting ------------------------------------------------------------------


def format_cores(point: dict | None, cls: str) -> str:
    """``"2 x 1.20"`` (GHz) or ``"-"`` when the class has no cores."""
    if not point:
        return "-"
    n = int(point.get(f"count_{cls}", 0))
    return "-" if n == 0 else f"{n} x {point[f'freq_{cls}']:.2f}"


def format_scheduler(point: dict | None) -> str:
    if not point:
        return "-"
    q = point.get("quantum_ms")
    return point["scheduler"] if q is None else f"{point['scheduler']} ({q:.1f}ms)"


def _groups(manifest: RunManifest) -> list[tuple[tuple[str, str], list[RunRecord]]]:
    order: dict[tuple[str, str], list[RunRecord]] = {}
    for r in manifest.runs:
        order.setdefault((r.variant, r.algorithm), []).append(r)
    return list(order.items())


def _aggregate(records: list[RunRecord], moo: bool) -> tuple[RunRecord | None, float | None]:
    ok = [r for r in records if r.status == "ok" and r.best_value is not None]
    if not ok:
        return None, None
    # Largest hypervolume or smallest loss wins; ties go to the lowest seed.
    best = min(ok, key=lambda r: (-r.best_value if moo else r.best_value, r.seed))
    return best, statistics.median(r.best_value for r in ok)


def summary_rows(manifest: RunManifest) -> list[dict[str, Any]]:
    moo = manifest.config.get("objective", {}).get("mode") == MULTI_OBJECTIVE
    rows = []
    for (variant, algo), recs in _groups(manifest):
        best, median = _aggregate(recs, moo)
        p = best.best_point if best else None
        rows.append(
            {
                "variant": variant,
                "algorithm": algo,
                "kernel": recs[0].kernel or "",
                "runs": len(recs),
                "failed": sum(r.status != "ok" for r in recs),
                "little": format_cores(p, "little"),
                "medium": format_cores(p, "medium"),
                "big": format_cores(p, "big"),
                "scheduler": format_scheduler(p),
                "metric": "hypervolume" if moo else "loss",
                "best": best.best_value if best else None,
                "median": median,
                "best_run": best.run_id if best else "",
            }
        )
    return rows


def summary_csv(manifest: RunManifest) -> str:
    buf = io.StringIO()
    cols = ["variant", "algorithm", "kernel", "runs", "failed", "little", "medium", "big",
            "scheduler", "metric", "best", "median", "best_run"]
    w = csv.DictWriter(buf, cols, lineterminator="\n")
    w.writeheader()
    for row in summary_rows(manifest):
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _val(v: float | None) -> str:
    return "n/a" if v is None or not math.isfinite(v) else f"{v:.4f}"


def print_summary(manifest: RunManifest) -> str:
    """Fixed-width table: best configuration found per variant and algorithm."""
    scenario = manifest.config.get("scenario", "single")
    header = f"{'Variant':<20} {'Algorithm':<9} {'Little':<10} {'Medium':<10} {'Big':<10} {'Scheduler':<16} {'Best':>10} {'Median':>10}"
    lines = [_PANEL_TITLES.get(scenario, scenario), header, "-" * len(header)]
    for row in summary_rows(manifest):
        lines.append(
            f"{row['variant']:<20} {row['algorithm']:<9} {row['little']:<10} {row['medium']:<10} "
            f"{row['big']:<10} {row['scheduler']:<16} {_val(row['best']):>10} {_val(row['median']):>10}"
        )
    return "\n".join(lines) + "\n"


# -- entry point ----------------------------------------------------------------


def _parse_point(text: str) -> dict:
    point: dict[str, Any] = {}
    for item in text.split(","):
        key, _, value = item.partition("=")
        key, value = key.strip(), value.strip()
        try:
            point[key] = int(value) if key.startswith("count_") else float(value)
        except ValueError:
            point[key] = value
    point.setdefault("quantum_ms", None)
    return point


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed_override:
        cfg = replace(cfg, seeds=tuple(args.seed_override))
    manifest = run_scenario(cfg, args.out_dir, jobs=args.jobs)
    if not args.quiet:
        sys.stdout.write(print_summary(manifest))
    for r in manifest.failed:
        logger.info("FAILED %s: %s", r.run_id, r.error)
    return 1 if manifest.failed else 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    point = _parse_point(args.point)
    tasks = generate_tasks(cfg.workload, args.seed)
    result, log = run_simulation(to_system_config(point, cfg.constants), tasks, record_events=not args.quiet)
    if not args.quiet:
        sys.stdout.write("\n".join(log.lines()) + "\n")
    sys.stdout.write(result.to_json() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetbo", description="Heterogeneous-core scheduling optimizer")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config", help="YAML scenario file")
    run.add_argument("--seed-override", type=int, nargs="+", metavar="SEED", help="replace the config's seed list")
    run.add_argument("--out-dir", help="output directory (default: config output_dir)")
    run.add_argument("--jobs", type=int, default=1, help="parallel independent runs")
    run.add_argument("--quiet", action="store_true", help="only warnings and errors")
    run.set_defaults(func=_cmd_run)

    sim = sub.add_parser("simulate", help="simulate one configuration and print the event log")
    sim.add_argument("point", help="e.g. count_little=2,freq_little=1.0,count_medium=0,freq_medium=1.5,"
                                   "count_big=2,freq_big=2.5,scheduler=RR,quantum_ms=1")
    sim.add_argument("--config", help="YAML file supplying workload and constants")
    sim.add_argument("--seed", type=int, default=None, help="workload seed (default: config seed)")
    sim.add_argument("--quiet", action="store_true", help="print only the result JSON")
    sim.set_defaults(func=_cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s:%(name)s:%(message)s",
        force=True,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
