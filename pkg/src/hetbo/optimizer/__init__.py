"""Bayesian optimization over the design space: objectives, acquisitions, studies."""

from .acquisition import LOG_FLOOR, ehvi, log_expected_improvement
from .evaluator import SimulationEvaluator
from .pareto import ParetoFront, dominates, hypervolume_2d, pareto_front, reference_point
from .study import (
    MULTI_OBJECTIVE,
    SCALARIZED,
    ObjectiveSpec,
    Study,
    Trial,
    candidate_vectors,
    fit_final_models,
    propose_next,
    random_search,
    run_study,
    scalarized_cost,
)

__all__ = [
    "LOG_FLOOR",
    "MULTI_OBJECTIVE",
    "SCALARIZED",
    "ObjectiveSpec",
    "ParetoFront",
    "SimulationEvaluator",
    "Study",
    "Trial",
    "candidate_vectors",
    "dominates",
    "ehvi",
    "fit_final_models",
    "hypervolume_2d",
    "log_expected_improvement",
    "pareto_front",
    "propose_next",
    "random_search",
    "reference_point",
    "run_study",
    "scalarized_cost",
]
