"""Scenario files: strict JSON schema, validated before anything runs.

A scenario names one model, its phase grid, the Gaussian-mixture ``u0``,
model parameters, snapshot times, solver controls and an optional oracle
block.  Unknown keys and parameters the chosen model does not use are
rejected, because a misspelt rate constant would otherwise fall back to a
default without anyone noticing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .grid import Axis, GridError, PhaseGrid
from .initial import GaussianComponent, InitialDistribution, normalize_to_count

MODEL_AXES = {
    "exponential": [("n", "alpha")],
    "logistic": [("n", "gamma"), ("n", "gamma", "k")],
    "competition": [("n", "beta")],
    "random_migration": [("n",)],
    "biased_migration": [("n", "alpha")],
    "self_interaction": [("n", "alpha")],
}

# (required, optional)
MODEL_PARAMS = {
    "exponential": (set(), set()),
    "logistic": (set(), {"k"}),
    "competition": ({"c0", "gamma"}, set()),
    "random_migration": ({"beta"}, {"nbar"}),
    "biased_migration": ({"beta"}, set()),
    "self_interaction": ({"delta", "epsilon"}, set()),
}

SOLVER_KEYS = {
    "competition": {"dt", "predictor_corrector", "series_every"},
    "biased_migration": {"dt", "predictor_corrector", "series_every"},
    "self_interaction": {"max_iters", "divergence_window", "relaxation"},
}

TOP_REQUIRED = {"model", "grid", "initial", "times"}
TOP_OPTIONAL = {"name", "description", "params", "solver", "oracle", "output_dir", "provenance"}
ORACLE_KEYS = {"enabled", "P", "dt", "bins", "l1_threshold", "refine", "table_dt"}


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class OracleConfig:
    enabled: bool = False
    P: int = 100_000
    dt: float = 1e-5
    bins: int = 200
    l1_threshold: float = 0.05
    refine: int = 2
    table_dt: float = 0.003


@dataclass
class ScenarioConfig:
    model: str
    grid: PhaseGrid
    u0: InitialDistribution
    params: dict
    times: list[float]
    solver: dict = field(default_factory=dict)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output_dir: str = "out"
    name: str = "scenario"
    provenance: dict = field(default_factory=dict)
    path: str | None = None
    initial_spec: dict = field(default_factory=dict, repr=False)

    def with_grid(self, grid: PhaseGrid) -> "ScenarioConfig":
        """Same scenario on another grid; a normalized ``u0`` is renormalized there."""
        u0 = build_u0(self.initial_spec, grid, self.path) if self.initial_spec else self.u0
        return ScenarioConfig(self.model, grid, u0, dict(self.params), list(self.times), dict(self.solver),
                              self.oracle, self.output_dir, self.name, dict(self.provenance), self.path,
                              self.initial_spec)


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _number(value, what, path, text, key, *, positive=False, nonneg=False, integer=False):
    bad = isinstance(value, bool) or not isinstance(value, (int, float))
    if not bad and not math.isfinite(value):
        bad = True
    if not bad and integer and int(value) != value:
        bad = True
    if not bad and positive and not value > 0:
        bad = True
    if not bad and nonneg and value < 0:
        bad = True
    if bad:
        kind = "a positive" if positive else ("a nonnegative" if nonneg else "a finite")
        raise ConfigError(f"{what} must be {kind} {'integer' if integer else 'number'}, got {value!r}",
                          path, _line_of(text, key))
    return int(value) if integer else float(value)


def _check_keys(obj, allowed, required, where, path, text):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object", path, None)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}", path, _line_of(text, key))
    for key in sorted(required - obj.keys()):
        raise ConfigError(f"missing required key {key!r} in {where}", path, None)


def build_u0(spec: dict, grid: PhaseGrid, path=None) -> InitialDistribution:
    comps = tuple(GaussianComponent(tuple(c["center"]), tuple(c["sigma"]), c.get("weight", 1.0))
                  for c in spec["components"])
    support = spec.get("support")
    if support is not None:
        support = tuple((lo, math.inf if hi is None else hi) for lo, hi in support)
    dist = InitialDistribution(comps, ndim=grid.ndim, support=support)
    if "normalize_to" in spec:
        dist = normalize_to_count(dist, spec["normalize_to"], grid)
    return dist


def parse_config(text: str, path=None) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    _check_keys(raw, TOP_REQUIRED | TOP_OPTIONAL, TOP_REQUIRED, "scenario", path, text)

    model = raw["model"]
    if model not in MODEL_AXES:
        raise ConfigError(f"unknown model {model!r}; expected one of {sorted(MODEL_AXES)}",
                          path, _line_of(text, "model"))

    grid_spec = raw["grid"]
    _check_keys(grid_spec, {"axes"}, {"axes"}, "grid", path, text)
    axes = []
    for ax in grid_spec["axes"]:
        _check_keys(ax, {"name", "lo", "hi", "count"}, {"name", "lo", "hi", "count"}, "grid axis", path, text)
        try:
            axes.append(Axis(ax["name"], _number(ax["lo"], "axis lo", path, text, "lo"),
                             _number(ax["hi"], "axis hi", path, text, "hi"),
                             _number(ax["count"], "axis count", path, text, "count", integer=True)))
        except GridError as exc:
            raise ConfigError(str(exc), path, _line_of(text, "axes")) from None
    try:
        grid = PhaseGrid(tuple(axes))
    except GridError as exc:
        raise ConfigError(str(exc), path, _line_of(text, "axes")) from None
    if grid.names not in MODEL_AXES[model]:
        raise ConfigError(f"model {model} needs grid axes {' or '.join(map(str, MODEL_AXES[model]))}, "
                          f"got {grid.names}", path, _line_of(text, "axes"))

    params = raw.get("params", {})
    required, optional = MODEL_PARAMS[model]
    if model == "logistic" and grid.ndim == 2:
        required = {"k"}
    if model == "logistic" and grid.ndim == 3:
        optional = set()
    _check_keys(params, required | optional, required, f"params for model {model}", path, text)
    params = {k: _number(v, f"parameter {k}", path, text, k, nonneg=(k in {"gamma", "beta"}),
                         positive=(k in {"k", "c0", "nbar", "delta", "epsilon"}))
              for k, v in params.items()}
    if model in {"random_migration"} and not params["beta"] > 0:
        raise ConfigError("beta must be positive", path, _line_of(text, "beta"))
    if model == "logistic" and "k" in params and grid.n_axis.hi > params["k"]:
        raise ConfigError(f"n axis reaches {grid.n_axis.hi} beyond k = {params['k']}", path, _line_of(text, "hi"))

    init = raw["initial"]
    _check_keys(init, {"components", "support", "normalize_to"}, {"components"}, "initial", path, text)
    if not isinstance(init["components"], list) or not init["components"]:
        raise ConfigError("initial.components must be a non-empty list", path, _line_of(text, "components"))
    for comp in init["components"]:
        _check_keys(comp, {"center", "sigma", "weight"}, {"center", "sigma"}, "initial component", path, text)
        for key in ("center", "sigma"):
            if not isinstance(comp[key], list) or len(comp[key]) != grid.ndim:
                raise ConfigError(f"component {key} must list {grid.ndim} numbers (one per axis)",
                                  path, _line_of(text, key))
            for v in comp[key]:
                _number(v, f"component {key} entry", path, text, key, positive=(key == "sigma"))
        if "weight" in comp:
            _number(comp["weight"], "component weight", path, text, "weight", positive=True)
    if "support" in init:
        sup = init["support"]
        if not isinstance(sup, list) or len(sup) != grid.ndim or any(
                not isinstance(p, list) or len(p) != 2 for p in sup):
            raise ConfigError("initial.support must hold one [lo, hi] pair per axis (hi may be null)",
                              path, _line_of(text, "support"))
    if "normalize_to" in init:
        _number(init["normalize_to"], "normalize_to", path, text, "normalize_to", positive=True)
    try:
        u0 = build_u0(init, grid, path)
    except ValueError as exc:
        raise ConfigError(str(exc), path, _line_of(text, "initial")) from None

    times = raw["times"]
    if not isinstance(times, list) or not times:
        raise ConfigError("times must be a non-empty list", path, _line_of(text, "times"))
    times = [_number(t, "snapshot time", path, text, "times", nonneg=True) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("snapshot times must be strictly increasing", path, _line_of(text, "times"))

    solver = raw.get("solver", {})
    _check_keys(solver, SOLVER_KEYS.get(model, set()), set(), f"solver for model {model}", path, text)
    for key, v in solver.items():
        if key == "predictor_corrector":
            if not isinstance(v, bool):
                raise ConfigError("predictor_corrector must be true or false", path, _line_of(text, key))
        elif key in {"max_iters", "divergence_window", "series_every"}:
            solver[key] = _number(v, key, path, text, key, positive=True, integer=True)
        else:
            solver[key] = _number(v, key, path, text, key, positive=True)
    if "dt" in SOLVER_KEYS.get(model, ()):
        dt = solver.get("dt", 1e-4)
        for t in times:
            if abs(round(t / dt) * dt - t) > 1e-9 * max(1.0, t):
                raise ConfigError(f"snapshot time {t} is not a multiple of dt = {dt}", path, _line_of(text, "times"))

    oracle_raw = raw.get("oracle", {})
    _check_keys(oracle_raw, ORACLE_KEYS, set(), "oracle", path, text)
    okw = {}
    for key, v in oracle_raw.items():
        if key == "enabled":
            if not isinstance(v, bool):
                raise ConfigError("oracle.enabled must be true or false", path, _line_of(text, key))
            okw[key] = v
        elif key in {"P", "bins", "refine"}:
            okw[key] = _number(v, f"oracle.{key}", path, text, key, positive=True, integer=True)
        elif key == "l1_threshold":
            okw[key] = _number(v, "oracle.l1_threshold", path, text, key, nonneg=True)
        else:
            okw[key] = _number(v, f"oracle.{key}", path, text, key, positive=True)
    if "table_dt" in okw and model != "self_interaction":
        raise ConfigError("oracle.table_dt only applies to self_interaction", path, _line_of(text, "table_dt"))

    for key in ("name", "output_dir", "description"):
        if key in raw and not isinstance(raw[key], str):
            raise ConfigError(f"{key} must be a string", path, _line_of(text, key))
    provenance = raw.get("provenance", {})
    if not isinstance(provenance, dict):
        raise ConfigError("provenance must be an object", path, _line_of(text, "provenance"))

    name = raw.get("name") or (Path(path).stem if path else "scenario")
    return ScenarioConfig(model, grid, u0, params, times, solver, OracleConfig(**okw),
                          raw.get("output_dir", f"out/{name}"), name, provenance,
                          str(path) if path else None, init)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", path) from None
    return parse_config(text, path)
