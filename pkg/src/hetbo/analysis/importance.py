"""Length-scale based parameter importance for fitted ARD surrogates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gp import GpModel
from ..searchspace import SearchSpace


class ImportanceError(ValueError):
    """The surrogate carries no usable sensitivity information."""


@dataclass(frozen=True)
class ImportanceReport:
    weights: dict[str, float]
    objective: str
    kernel_family: str
    study_id: str = ""

    def ranking(self) -> list[str]:
        """Parameter names, most important first (ties keep space order)."""
        names = list(self.weights)
        return sorted(names, key=lambda n: (-self.weights[n], names.index(n)))

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "kernel_family": self.kernel_family,
            "study_id": self.study_id,
            "weights": self.weights,
        }


def raw_scores(model: GpModel, space: SearchSpace) -> dict[str, float]:
    """Sum of 1/l over the encoded columns of each parameter."""
    inv = 1.0 / np.asarray(model.kernel.length_scales)
    if inv.size != space.dim:
        raise ImportanceError(f"model has {inv.size} length scales, space encodes {space.dim} columns")
    return {name: float(inv[s].sum()) for name, s in space.slices().items()}


def sensitivity_importance(
    model: GpModel, space: SearchSpace, objective: str = "loss", study_id: str = ""
) -> ImportanceReport:
    """Normalized inverse length scales, one-hot blocks folded into their parameter."""
    if model.degenerate:
        raise ImportanceError("surrogate was fitted to constant targets; run more trials before reading importances")
    scores = raw_scores(model, space)
    total = sum(scores.values())
    return ImportanceReport({k: v / total for k, v in scores.items()}, objective, model.kernel.family, study_id)


def moo_importance(study, study_id: str = "") -> tuple[ImportanceReport, ImportanceReport]:
    """Separate importance reports for the energy and time surrogates of a study."""
    if "energy" not in study.models or "time" not in study.models:
        raise ImportanceError("study has no per-objective surrogates; is it a multi-objective study?")
    return (
        sensitivity_importance(study.models["energy"], study.space, "Energy", study_id),
        sensitivity_importance(study.models["time"], study.space, "Time", study_id),
    )
