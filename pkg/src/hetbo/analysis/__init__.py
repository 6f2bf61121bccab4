"""Post-hoc interpretation of studies: importances and figures."""

from .importance import ImportanceError, ImportanceReport, moo_importance, raw_scores, sensitivity_importance
from .plots import (
    CONTOUR,
    HISTORY,
    IMPORTANCE,
    PARETO,
    PlotError,
    PlotSeries,
    contour_series,
    emit_plot,
    history_series,
    importance_series,
    pareto_series,
    read_series_csv,
    render_svg,
)

__all__ = [
    "CONTOUR",
    "HISTORY",
    "IMPORTANCE",
    "PARETO",
    "ImportanceError",
    "ImportanceReport",
    "PlotError",
    "PlotSeries",
    "contour_series",
    "emit_plot",
    "history_series",
    "importance_series",
    "moo_importance",
    "pareto_series",
    "raw_scores",
    "read_series_csv",
    "render_svg",
    "sensitivity_importance",
]
