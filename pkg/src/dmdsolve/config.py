"""Experiment configuration: a flat ``key = value`` text format.

Keys are dotted (section.field), one per line; ``#`` starts a comment.  The
schema is strict: unknown keys, duplicate keys, and malformed values are
rejected with the offending line number, and a config emitted by
:func:`emit_config` parses back to an equal object (the normalized form).
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

SOLVER_CHOICES = ("slstd", "sequential", "kw", "exact")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ModelCfg:
    p: int = 4
    T: int = 10
    beta: float = 0.95
    theta_true: tuple = (1.0, 2.0, 1.0, 9.0)
    reward_kink: bool = False


@dataclass(frozen=True)
class SimCfg:
    n_agents: int = 1000


@dataclass(frozen=True)
class BasisCfg:
    knots_per_dim: int = 5
    degree: int = 3
    ridge: float = 1e-8


@dataclass(frozen=True)
class SlstdCfg:
    c1: float = 20.0
    c2: float = 500.0
    tolerance: float = 1e-2
    max_passes: int = 60


@dataclass(frozen=True)
class BaselinesCfg:
    grid_per_dim: int = 5
    kw_states_per_period: int = 100
    memory_cap_bytes: int = 0   # 0 disables the cap
    time_cap_s: float = 0.0     # 0 disables the cap


@dataclass(frozen=True)
class EstimateCfg:
    solver: str = "slstd"
    theta0: tuple = (1.0, 1.0, 1.0, 1.0)
    xtol: float = 1e-3
    ftol: float = 1e-6
    max_iter: int = 500


@dataclass(frozen=True)
class BenchCfg:
    replications: int = 20
    seed: int = 1234
    methods: tuple = ("slstd", "sequential", "kw")
    cells: tuple = ((4, 20),)
    timing_reps: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelCfg = field(default_factory=ModelCfg)
    sim: SimCfg = field(default_factory=SimCfg)
    basis: BasisCfg = field(default_factory=BasisCfg)
    slstd: SlstdCfg = field(default_factory=SlstdCfg)
    baselines: BaselinesCfg = field(default_factory=BaselinesCfg)
    estimate: EstimateCfg = field(default_factory=EstimateCfg)
    bench: BenchCfg = field(default_factory=BenchCfg)


def _parse_int(s: str) -> int:
    return int(s)


def _parse_float(s: str) -> float:
    return float(s)


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_floats4(s: str) -> tuple:
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated numbers, got {len(parts)}")
    return tuple(float(p) for p in parts)


def _parse_solver(s: str) -> str:
    name = s.strip().lower()
    if name not in SOLVER_CHOICES:
        raise ValueError(f"solver must be one of {SOLVER_CHOICES}, got {s!r}")
    return name


def _parse_methods(s: str) -> tuple:
    names = tuple(_parse_solver(p) for p in s.split(","))
    if not names:
        raise ValueError("empty method list")
    return names


def _parse_cells(s: str) -> tuple:
    cells = []
    for part in s.split(","):
        part = part.strip()
        bits = part.split(":")
        if len(bits) != 2:
            raise ValueError(f"cell {part!r} must look like p:T")
        cells.append((int(bits[0]), int(bits[1])))
    return tuple(cells)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_floats4(xs) -> str:
    return ", ".join(_fmt_float(x) for x in xs)


def _fmt_bool(b: bool) -> str:
    return "true" if b else "false"


def _fmt_methods(ms) -> str:
    return ", ".join(ms)


def _fmt_cells(cs) -> str:
    return ", ".join(f"{p}:{t}" for p, t in cs)


@dataclass(frozen=True)
class _Key:
    section: str
    attr: str
    parse: Callable
    fmt: Callable


_SCHEMA: dict[str, _Key] = {
    "model.p": _Key("model", "p", _parse_int, str),
    "model.T": _Key("model", "T", _parse_int, str),
    "model.beta": _Key("model", "beta", _parse_float, _fmt_float),
    "model.theta_true": _Key("model", "theta_true", _parse_floats4, _fmt_floats4),
    "model.reward_kink": _Key("model", "reward_kink", _parse_bool, _fmt_bool),
    "sim.n_agents": _Key("sim", "n_agents", _parse_int, str),
    "basis.knots_per_dim": _Key("basis", "knots_per_dim", _parse_int, str),
    "basis.degree": _Key("basis", "degree", _parse_int, str),
    "basis.ridge": _Key("basis", "ridge", _parse_float, _fmt_float),
    "slstd.c1": _Key("slstd", "c1", _parse_float, _fmt_float),
    "slstd.c2": _Key("slstd", "c2", _parse_float, _fmt_float),
    "slstd.tolerance": _Key("slstd", "tolerance", _parse_float, _fmt_float),
    "slstd.max_passes": _Key("slstd", "max_passes", _parse_int, str),
    "baselines.grid_per_dim": _Key("baselines", "grid_per_dim", _parse_int, str),
    "baselines.kw_states_per_period": _Key(
        "baselines", "kw_states_per_period", _parse_int, str
    ),
    "baselines.memory_cap_bytes": _Key(
        "baselines", "memory_cap_bytes", _parse_int, str
    ),
    "baselines.time_cap_s": _Key("baselines", "time_cap_s", _parse_float, _fmt_float),
    "estimate.solver": _Key("estimate", "solver", _parse_solver, str),
    "estimate.theta0": _Key("estimate", "theta0", _parse_floats4, _fmt_floats4),
    "estimate.xtol": _Key("estimate", "xtol", _parse_float, _fmt_float),
    "estimate.ftol": _Key("estimate", "ftol", _parse_float, _fmt_float),
    "estimate.max_iter": _Key("estimate", "max_iter", _parse_int, str),
    "bench.replications": _Key("bench", "replications", _parse_int, str),
    "bench.seed": _Key("bench", "seed", _parse_int, str),
    "bench.methods": _Key("bench", "methods", _parse_methods, _fmt_methods),
    "bench.cells": _Key("bench", "cells", _parse_cells, _fmt_cells),
    "bench.timing_reps": _Key("bench", "timing_reps", _parse_int, str),
}

_REQUIRED = ("model.p", "model.T", "model.theta_true")

_SECTIONS = {
    "model": ModelCfg,
    "sim": SimCfg,
    "basis": BasisCfg,
    "slstd": SlstdCfg,
    "baselines": BaselinesCfg,
    "estimate": EstimateCfg,
    "bench": BenchCfg,
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` with line-precise
    messages on unknown keys, duplicates, bad values, or missing required
    keys."""
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        try:
            seen[key] = _SCHEMA[key].parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for '{key}': {exc}")
    for key in _REQUIRED:
        if key not in seen:
            raise ConfigError(f"{source}: missing required key '{key}'")

    per_section: dict[str, dict] = {name: {} for name in _SECTIONS}
    for key, value in seen.items():
        spec = _SCHEMA[key]
        per_section[spec.section][spec.attr] = value
    sections = {
        name: cls(**per_section[name]) for name, cls in _SECTIONS.items()
    }
    return ExperimentConfig(**sections)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config(text, source=str(path))


def emit_config(cfg: ExperimentConfig) -> str:
    """Render the normalized form: every schema key, canonical formatting."""
    lines = []
    for key, spec in _SCHEMA.items():
        value = getattr(getattr(cfg, spec.section), spec.attr)
        lines.append(f"{key} = {spec.fmt(value)}")
    return "\n".join(lines) + "\n"
