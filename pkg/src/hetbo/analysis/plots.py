"""Static SVG figures with CSV sidecars holding exactly the plotted data."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .. import gp as gplib
from ..optimizer.pareto import pareto_front
from ..searchspace import CATEGORICAL, SearchSpace, encode
from .importance import ImportanceReport

HISTORY = "history"
PARETO = "pareto"
IMPORTANCE = "importance"
CONTOUR = "contour"

_COLUMNS = {
    HISTORY: ("trial", "loss", "best_so_far"),
    PARETO: ("trial", "energy", "time", "on_front"),
    IMPORTANCE: ("parameter", "objective", "importance"),
    CONTOUR: ("x", "y", "mean"),
}

_WIDTH, _HEIGHT = 640, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 60
_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


class PlotError(ValueError):
    pass


@dataclass
class PlotSeries:
    kind: str
    rows: list[tuple]
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _COLUMNS:
            raise PlotError(f"unknown plot kind {self.kind!r}")

    @property
    def columns(self) -> tuple[str, ...]:
        return _COLUMNS[self.kind]

    def validate(self) -> None:
        if not self.rows:
            raise PlotError(f"{self.kind} series is empty")
        for row in self.rows:
            for v in row:
                if isinstance(v, float) and not math.isfinite(v):
                    raise PlotError(f"{self.kind} series contains a non-finite value")


# -- series builders ------------------------------------------------------------


def history_series(study, title: str = "") -> PlotSeries:
    rows = []
    best = math.inf
    for t in study.trials:
        best = min(best, float(t.loss))
        rows.append((t.index, float(t.loss), best))
    meta = {"penalty": study.objective.penalty}
    return PlotSeries(HISTORY, rows, "trial", "objective value", title or "Optimization history", meta)


def pareto_series(study, penalty: float | None = None, quantile: float = 99.0) -> PlotSeries:
    """Objective scatter with front membership; extreme outliers are dropped.

    Points whose energy or time exceeds the ``quantile`` percentile, or that
    carry the penalty sentinel, are left out before the front is computed.
    """
    trials = [t for t in study.trials if not t.penalized]
    if penalty is not None:
        trials = [t for t in trials if penalty not in (t.energy, t.latency)]
    if not trials:
        return PlotSeries(PARETO, [], "energy (J)", "aggregated latency (s)")
    e = np.array([t.energy for t in trials])
    tm = np.array([t.latency for t in trials])
    keep = (e <= np.percentile(e, quantile)) & (tm <= np.percentile(tm, quantile))
    kept = [t for t, k in zip(trials, keep) if k]
    front = pareto_front([(t.energy, t.latency) for t in kept], [t.index for t in kept])
    members = set(front.indices)
    rows = [(t.index, float(t.energy), float(t.latency), int(t.index in members)) for t in kept]
    return PlotSeries(PARETO, rows, "energy (J)", "aggregated latency (s)", "Pareto frontier")


def importance_series(reports: Sequence[ImportanceReport]) -> PlotSeries:
    rows = [(name, r.objective, float(w)) for r in reports for name, w in r.weights.items()]
    return PlotSeries(IMPORTANCE, rows, "parameter", "importance", "Hyperparameter importance")


def contour_series(
    model: gplib.GpModel,
    space: SearchSpace,
    base_point: dict,
    x_param: str,
    y_param: str,
    grid: int = 50,
) -> PlotSeries:
    """Posterior mean over a grid of two numeric parameters, others at ``base_point``."""
    for name in (x_param, y_param):
        if space[name].kind == CATEGORICAL:
            raise PlotError(f"{name} is categorical; contour axes must be numeric")
    px, py = space[x_param], space[y_param]
    xs = np.linspace(px.low, px.high, grid)
    ys = np.linspace(py.low, py.high, grid)
    base = encode(base_point, space)
    sl = space.slices()
    ix, iy = sl[x_param].start, sl[y_param].start
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    enc = np.repeat(base[None, :], grid * grid, axis=0)
    enc[:, ix] = (gx.ravel() - px.low) / (px.high - px.low)
    enc[:, iy] = (gy.ravel() - py.low) / (py.high - py.low)
    mean = gplib.predict(model, enc).mean
    rows = [(float(a), float(b), float(m)) for a, b, m in zip(gx.ravel(), gy.ravel(), mean)]
    return PlotSeries(CONTOUR, rows, x_param, y_param, "Posterior mean")


# -- CSV ------------------------------------------------------------------------


def series_csv(series: PlotSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(series.columns)
    for row in series.rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def read_series_csv(path: str | Path, kind: str) -> PlotSeries:
    """Inverse of the sidecar written by :func:`emit_plot` (labels not stored)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _COLUMNS[kind]:
            raise PlotError(f"columns {header} do not match a {kind} series")
        conv = {
            HISTORY: (int, float, float),
            PARETO: (int, float, float, int),
            IMPORTANCE: (str, str, float),
            CONTOUR: (float, float, float),
        }[kind]
        rows = [tuple(c(v) for c, v in zip(conv, r)) for r in reader]
    return PlotSeries(kind, rows)


# -- SVG ------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.4g}"


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 <= self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5
        self.w = _WIDTH - _LEFT - _RIGHT
        self.h = _HEIGHT - _TOP - _BOTTOM

    def px(self, x):
        return _LEFT + (x - self.x0) / (self.x1 - self.x0) * self.w

    def py(self, y):
        return _TOP + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.h

    def axes(self, x_label, y_label, title, xticks=True) -> list[str]:
        out = [
            f'<rect x="{_LEFT}" y="{_TOP}" width="{self.w}" height="{self.h}" fill="none" stroke="#333"/>',
            f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{_WIDTH / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(x_label)}</text>',
            f'<text x="16" y="{_TOP + self.h / 2:.1f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {_TOP + self.h / 2:.1f})">{escape(y_label)}</text>',
        ]
        for k in range(5):
            yv = self.y0 + (self.y1 - self.y0) * k / 4
            out.append(
                f'<text x="{_LEFT - 6}" y="{_fmt(self.py(yv) + 4)}" text-anchor="end" font-size="10">{_tick(yv)}</text>'
            )
            if xticks:
                xv = self.x0 + (self.x1 - self.x0) * k / 4
                out.append(
                    f'<text x="{_fmt(self.px(xv))}" y="{_TOP + self.h + 16}" text-anchor="middle" font-size="10">{_tick(xv)}</text>'
                )
        return out


def _limits(values, pad=0.05):
    lo, hi = float(min(values)), float(max(values))
    span = hi - lo if hi > lo else max(abs(hi), 1.0)
    return lo - pad * span, hi + pad * span


def _svg_history(s: PlotSeries) -> list[str]:
    penalty = s.meta.get("penalty")
    ys = [r[1] for r in s.rows if penalty is None or r[1] < penalty] or [r[1] for r in s.rows]
    fr = _Frame(_limits([r[0] for r in s.rows]), _limits(ys))
    out = fr.axes(s.x_label, s.y_label, s.title)
    top = fr.y1
    for t, loss, _ in s.rows:
        out.append(
            f'<circle class="marker" cx="{_fmt(fr.px(t))}" cy="{_fmt(fr.py(min(loss, top)))}" r="3" fill="{_PALETTE[0]}" fill-opacity="0.6"/>'
        )
    pts = " ".join(f"{_fmt(fr.px(t))},{_fmt(fr.py(min(b, top)))}" for t, _, b in s.rows)
    out.append(f'<polyline class="running-min" points="{pts}" fill="none" stroke="{_PALETTE[3]}" stroke-width="2"/>')
    return out


def _svg_pareto(s: PlotSeries) -> list[str]:
    fr = _Frame(_limits([r[1] for r in s.rows]), _limits([r[2] for r in s.rows]))
    out = fr.axes(s.x_label, s.y_label, s.title)
    for _, e, t, on in s.rows:
        if on:
            continue
        out.append(f'<circle class="dominated" cx="{_fmt(fr.px(e))}" cy="{_fmt(fr.py(t))}" r="3" fill="#999" fill-opacity="0.6"/>')
    front = sorted((r for r in s.rows if r[3]), key=lambda r: r[1])
    for _, e, t, _on in front:
        out.append(f'<circle class="front" cx="{_fmt(fr.px(e))}" cy="{_fmt(fr.py(t))}" r="4.5" fill="{_PALETTE[3]}"/>')
    if len(front) > 1:
        pts = " ".join(f"{_fmt(fr.px(e))},{_fmt(fr.py(t))}" for _, e, t, _on in front)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{_PALETTE[3]}" stroke-dasharray="4 3"/>')
    return out


def _svg_importance(s: PlotSeries) -> list[str]:
    params = list(dict.fromkeys(r[0] for r in s.rows))
    objectives = list(dict.fromkeys(r[1] for r in s.rows))
    fr = _Frame((0.0, float(len(params))), (0.0, max(r[2] for r in s.rows) * 1.1))
    out = fr.axes(s.x_label, s.y_label, s.title, xticks=False)
    bar = 0.8 / len(objectives)
    lookup = {(r[0], r[1]): r[2] for r in s.rows}
    for i, p in enumerate(params):
        for j, o in enumerate(objectives):
            v = lookup.get((p, o), 0.0)
            x = fr.px(i + 0.1 + j * bar)
            wdt = fr.px(i + 0.1 + (j + 1) * bar) - x
            out.append(
                f'<rect class="bar" x="{_fmt(x)}" y="{_fmt(fr.py(v))}" width="{_fmt(wdt)}" '
                f'height="{_fmt(fr.py(0) - fr.py(v))}" fill="{_PALETTE[j % len(_PALETTE)]}"/>'
            )
        out.append(
            f'<text x="{_fmt(fr.px(i + 0.5))}" y="{_TOP + fr.h + 14}" text-anchor="middle" font-size="9">{escape(p)}</text>'
        )
    for j, o in enumerate(objectives):
        out.append(
            f'<text x="{_WIDTH - _RIGHT - 4}" y="{_TOP + 14 + 14 * j}" text-anchor="end" font-size="11" '
            f'fill="{_PALETTE[j % len(_PALETTE)]}">{escape(o)}</text>'
        )
    return out


def _color(t: float) -> str:
    # dark (low loss) to light, a coarse viridis
    stops = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]
    t = min(max(t, 0.0), 1.0) * (len(stops) - 1)
    i = min(int(t), len(stops) - 2)
    f = t - i
    c = [round(a + (b - a) * f) for a, b in zip(stops[i], stops[i + 1])]
    return f"#{c[0]:02x}{c[1]:02x}{c[2]:02x}"


def _svg_contour(s: PlotSeries) -> list[str]:
    xs = sorted({r[0] for r in s.rows})
    ys = sorted({r[1] for r in s.rows})
    fr = _Frame((xs[0], xs[-1]), (ys[0], ys[-1]))
    out = fr.axes(s.x_label, s.y_label, s.title)
    vals = [r[2] for r in s.rows]
    lo, hi = min(vals), max(vals)
    span = hi - lo if hi > lo else 1.0
    cw = fr.w / len(xs)
    ch = fr.h / len(ys)
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for x, y, m in s.rows:
        out.append(
            f'<rect class="cell" x="{_fmt(_LEFT + xi[x] * cw)}" y="{_fmt(_TOP + fr.h - (yi[y] + 1) * ch)}" '
            f'width="{_fmt(cw + 0.3)}" height="{_fmt(ch + 0.3)}" fill="{_color((m - lo) / span)}"/>'
        )
    return out


_RENDER = {HISTORY: _svg_history, PARETO: _svg_pareto, IMPORTANCE: _svg_importance, CONTOUR: _svg_contour}


def render_svg(series: PlotSeries) -> str:
    series.validate()
    body = _RENDER[series.kind](series)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif">\n'
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def emit_plot(series: PlotSeries, path: str | Path) -> Path:
    """Write ``path`` (SVG) and a CSV sidecar next to it; returns the SVG path."""
    path = Path(path)
    svg = render_svg(series)
    path.write_text(svg)
    path.with_suffix(".csv").write_text(series_csv(series))
    return path
