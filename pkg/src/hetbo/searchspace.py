"""Mixed continuous/integer/categorical design space and its unit-cube encoding.

A design point is a plain ``dict`` mapping parameter name to value. Inactive
conditional parameters (the quantum under FCFS) are stored as ``None`` and
encode to the middle of their range so the encoded dimension never changes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Iterable, Iterator, Mapping

import numpy as np
from scipy.stats import qmc

from .simcore import PowerConstants, SchedulerPolicy, SystemConfig

CONTINUOUS = "continuous"
INTEGER = "integer"
CATEGORICAL = "categorical"

DesignPoint = dict[str, Any]


class SpaceError(ValueError):
    """Malformed space definition, vector or design point."""


@dataclass(frozen=True)
class ParamDef:
    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    options: tuple[str, ...] = ()
    conditional_on: tuple[str, tuple[str, ...]] | None = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, INTEGER, CATEGORICAL):
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CONTINUOUS and not self.low < self.high:
            raise SpaceError(f"{self.name}: need low < high")
        if self.kind == INTEGER and not (int(self.low) == self.low and int(self.high) == self.high and self.low <= self.high):
            raise SpaceError(f"{self.name}: integer bounds must satisfy low <= high")
        if self.kind == CATEGORICAL and len(self.options) < 2:
            raise SpaceError(f"{self.name}: need at least two options")

    @property
    def width(self) -> int:
        return len(self.options) if self.kind == CATEGORICAL else 1

    def contains(self, value: Any) -> bool:
        if self.kind == CATEGORICAL:
            return value in self.options
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return False
        if self.kind == INTEGER and int(value) != value:
            return False
        return self.low <= value <= self.high


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamDef, ...]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate parameter names")
        for p in self.params:
            if p.conditional_on is not None:
                parent, accepted = p.conditional_on
                if parent not in names:
                    raise SpaceError(f"{p.name}: conditional on unknown parameter {parent!r}")
                parent_def = self[parent]
                if parent_def.kind != CATEGORICAL or not set(accepted) <= set(parent_def.options):
                    raise SpaceError(f"{p.name}: conditional values must be options of {parent!r}")

    def __iter__(self) -> Iterator[ParamDef]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def __getitem__(self, name: str) -> ParamDef:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def dim(self) -> int:
        return sum(p.width for p in self.params)

    def slices(self) -> dict[str, slice]:
        """Encoded column range of every parameter."""
        out, i = {}, 0
        for p in self.params:
            out[p.name] = slice(i, i + p.width)
            i += p.width
        return out

    @property
    def count_params(self) -> list[str]:
        return [p.name for p in self.params if p.kind == INTEGER and p.name.startswith("count_")]

    def is_active(self, param: ParamDef, point: Mapping[str, Any]) -> bool:
        if param.conditional_on is None:
            return True
        parent, accepted = param.conditional_on
        return point.get(parent) in accepted

    def with_bounds(self, overrides: Mapping[str, Iterable]) -> SearchSpace:
        """Copy with ``{name: [low, high]}`` or ``{name: [options...]}`` replaced."""
        params = []
        known = set(self.names)
        unknown = set(overrides) - known
        if unknown:
            raise SpaceError(f"unknown parameters in override: {sorted(unknown)}")
        for p in self.params:
            if p.name in overrides:
                vals = list(overrides[p.name])
                if p.kind == CATEGORICAL:
                    p = replace(p, options=tuple(str(v) for v in vals))
                else:
                    if len(vals) != 2:
                        raise SpaceError(f"{p.name}: bounds override needs [low, high]")
                    p = replace(p, low=vals[0], high=vals[1])
            params.append(p)
        return SearchSpace(tuple(params))


def default_space() -> SearchSpace:
    """Core counts/frequencies per class, scheduler and time quantum.

    Frequencies are in GHz and the quantum in ms, as in the experiment
    config files.
    """
    return SearchSpace(
        (
            ParamDef("freq_little", CONTINUOUS, 0.5, 1.5),
            ParamDef("count_little", INTEGER, 0, 4),
            ParamDef("freq_medium", CONTINUOUS, 1.0, 2.5),
            ParamDef("count_medium", INTEGER, 0, 4),
            ParamDef("freq_big", CONTINUOUS, 1.5, 3.5),
            ParamDef("count_big", INTEGER, 0, 4),
            ParamDef("scheduler", CATEGORICAL, options=("FCFS", "RR", "Priority")),
            ParamDef("quantum_ms", CONTINUOUS, 0.5, 5.0, conditional_on=("scheduler", ("RR", "Priority"))),
        )
    )


def space_from_dicts(entries: Iterable[Mapping[str, Any]]) -> SearchSpace:
    """Build a space from records ``{name, type, range | options, conditional}``.

    ``conditional`` is ``{param: <name>, values: [...]}``.
    """
    params = []
    for e in entries:
        extra = set(e) - {"name", "type", "range", "options", "conditional"}
        if extra:
            raise SpaceError(f"unknown keys in parameter definition: {sorted(extra)}")
        cond = None
        if e.get("conditional"):
            c = e["conditional"]
            cond = (c["param"], tuple(c["values"]))
        if e["type"] == CATEGORICAL:
            params.append(ParamDef(e["name"], CATEGORICAL, options=tuple(e["options"]), conditional_on=cond))
        else:
            lo, hi = e["range"]
            params.append(ParamDef(e["name"], e["type"], lo, hi, conditional_on=cond))
    return SearchSpace(tuple(params))


def space_to_dicts(space: SearchSpace) -> list[dict[str, Any]]:
    out = []
    for p in space:
        d: dict[str, Any] = {"name": p.name, "type": p.kind}
        if p.kind == CATEGORICAL:
            d["options"] = list(p.options)
        else:
            d["range"] = [p.low, p.high]
        if p.conditional_on is not None:
            d["conditional"] = {"param": p.conditional_on[0], "values": list(p.conditional_on[1])}
        out.append(d)
    return out


def validate(point: Mapping[str, Any], space: SearchSpace) -> list[str]:
    """All violations of ``point`` against ``space``; empty list when valid."""
    problems = []
    extra = set(point) - set(space.names)
    for name in sorted(extra):
        problems.append(f"{name}: not a parameter of the space")
    for p in space:
        if p.conditional_on is not None and not space.is_active(p, point):
            if point.get(p.name) is not None:
                problems.append(f"{p.name}: must be absent when {p.conditional_on[0]}={point.get(p.conditional_on[0])!r}")
            continue
        if p.name not in point or point[p.name] is None:
            problems.append(f"{p.name}: missing")
        elif not p.contains(point[p.name]):
            if p.kind == CATEGORICAL:
                problems.append(f"{p.name}: {point[p.name]!r} not in {list(p.options)}")
            else:
                problems.append(f"{p.name}: {point[p.name]!r} outside [{p.low}, {p.high}]")
    counts = space.count_params
    if counts and all(isinstance(point.get(c), (int, np.integer)) for c in counts):
        if sum(point[c] for c in counts) < 1:
            problems.append("core counts sum to zero; at least one core is required")
    return problems


def check(point: Mapping[str, Any], space: SearchSpace) -> None:
    problems = validate(point, space)
    if problems:
        raise SpaceError("invalid design point: " + "; ".join(problems))


def encode(point: Mapping[str, Any], space: SearchSpace) -> np.ndarray:
    check(point, space)
    vec = np.empty(space.dim)
    i = 0
    for p in space:
        value = point.get(p.name)
        if p.kind == CATEGORICAL:
            vec[i : i + p.width] = 0.0
            vec[i + p.options.index(value)] = 1.0
        elif value is None:
            vec[i] = 0.5
        else:
            vec[i] = (value - p.low) / (p.high - p.low) if p.high > p.low else 0.5
        i += p.width
    return vec


def decode(vec: np.ndarray, space: SearchSpace) -> DesignPoint:
    """Map a unit-cube vector back to a valid design point.

    Integers round half up, categoricals take the argmax of their one-hot
    block (lowest index on ties). If every core count decodes to zero, the
    count whose coordinate is largest is set to one.
    """
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (space.dim,):
        raise SpaceError(f"expected vector of length {space.dim}, got shape {vec.shape}")
    vec = np.clip(vec, 0.0, 1.0)
    point: DesignPoint = {}
    coord: dict[str, float] = {}
    i = 0
    for p in space:
        block = vec[i : i + p.width]
        if p.kind == CATEGORICAL:
            point[p.name] = p.options[int(np.argmax(block))]
        elif p.kind == INTEGER:
            raw = p.low + block[0] * (p.high - p.low)
            point[p.name] = int(min(max(math.floor(raw + 0.5), p.low), p.high))
            coord[p.name] = float(block[0])
        else:
            point[p.name] = float(min(max(p.low + block[0] * (p.high - p.low), p.low), p.high))
        i += p.width
    for p in space:
        if not space.is_active(p, point):
            point[p.name] = None
    counts = space.count_params
    if counts and sum(point[c] for c in counts) == 0:
        best = max(counts, key=lambda c: (coord[c], -counts.index(c)))
        point[best] = 1
    return point


def project(vec: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Snap a vector onto the encodings of decodable points."""
    return encode(decode(vec, space), space)


def sobol_sample(
    n: int, space: SearchSpace, seed: int | np.random.Generator | None = None, scramble: bool = False
) -> list[DesignPoint]:
    """First ``n`` points of the Sobol sequence, decoded.

    Unscrambled (the default) this is the standard Joe-Kuo sequence as shipped
    by scipy, starting from index 1 so the first point is the cube centre.
    ``seed`` only matters with ``scramble=True``.
    """
    return [decode(v, space) for v in sobol_vectors(n, space.dim, seed, scramble)]


def sobol_vectors(
    n: int, dim: int, seed: int | np.random.Generator | None = None, scramble: bool = False
) -> np.ndarray:
    if n < 0:
        raise SpaceError("n must be non-negative")
    if dim > qmc.Sobol.MAXDIM:
        raise SpaceError(f"Sobol supports at most {qmc.Sobol.MAXDIM} dimensions")
    if n == 0:
        return np.empty((0, dim))
    engine = qmc.Sobol(dim, scramble=scramble, seed=seed if scramble else None)
    if not scramble:
        engine.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(n)


def random_sample(space: SearchSpace, rng: np.random.Generator) -> DesignPoint:
    """Independent uniform draw per parameter; all-zero core counts are redrawn."""
    while True:
        point: DesignPoint = {}
        for p in space:
            if p.kind == CATEGORICAL:
                point[p.name] = p.options[int(rng.integers(len(p.options)))]
            elif p.kind == INTEGER:
                point[p.name] = int(rng.integers(int(p.low), int(p.high), endpoint=True))
            else:
                point[p.name] = float(rng.uniform(p.low, p.high))
        for p in space:
            if not space.is_active(p, point):
                point[p.name] = None
        counts = space.count_params
        if not counts or sum(point[c] for c in counts) >= 1:
            return point


def to_system_config(point: Mapping[str, Any], constants: PowerConstants | None = None) -> SystemConfig:
    """Hardware/scheduler configuration for a point of the default space."""
    classes = {
        cls: (int(point[f"count_{cls}"]), float(point[f"freq_{cls}"]) * 1e9) for cls in ("little", "medium", "big")
    }
    quantum = point.get("quantum_ms")
    policy = SchedulerPolicy(point["scheduler"], None if quantum is None else quantum * 1e-3)
    return SystemConfig.from_classes(classes, policy, constants)


def project_batch(vectors: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Row-wise ``encode(decode(v))`` without building dicts."""
    v = np.clip(np.atleast_2d(np.asarray(vectors, dtype=float)), 0.0, 1.0)
    if v.shape[1] != space.dim:
        raise SpaceError(f"expected vectors of length {space.dim}, got {v.shape[1]}")
    out = v.copy()
    sl = space.slices()
    chosen: dict[str, np.ndarray] = {}
    for p in space:
        s = sl[p.name]
        if p.kind == CATEGORICAL:
            arg = np.argmax(v[:, s], axis=1)
            out[:, s] = 0.0
            out[np.arange(len(v)), s.start + arg] = 1.0
            chosen[p.name] = np.asarray(p.options, dtype=object)[arg]
        elif p.kind == INTEGER:
            raw = p.low + v[:, s.start] * (p.high - p.low)
            val = np.clip(np.floor(raw + 0.5), p.low, p.high)
            out[:, s.start] = (val - p.low) / (p.high - p.low) if p.high > p.low else 0.5
    for p in space:
        if p.conditional_on is not None:
            parent, accepted = p.conditional_on
            inactive = ~np.isin(chosen[parent], list(accepted))
            out[inactive, sl[p.name]] = 0.5
    counts = space.count_params
    if counts:
        cols = [sl[c].start for c in counts]
        spans = np.array([space[c].high - space[c].low for c in counts], dtype=float)
        lows = np.array([space[c].low for c in counts], dtype=float)
        zero = np.all(out[:, cols] * spans + lows == 0, axis=1)
        if np.any(zero):
            rows = np.flatnonzero(zero)
            best = np.argmax(v[np.ix_(rows, cols)], axis=1)
            for r, b in zip(rows, best):
                out[r, cols[b]] = (1 - lows[b]) / spans[b]
    return out
