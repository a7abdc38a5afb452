"""Run configuration shared by the report pipeline and the command line."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction

from .errors import ConfigError, ParseError
from .rational import format_rational, parse_rational

STAGES = ("partition", "diagram", "spectral", "direct", "box", "esc", "regularity", "core", "limit")


def _default_threads() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    stages: tuple[str, ...] = STAGES
    max_level: int = 50
    max_vertices: int = 2000
    n_max: int = 12
    esc_depth: int = 10
    eps: tuple[Fraction, ...] | None = None
    s_grid: tuple[float, ...] | None = None
    tol: float = 1e-10
    seed: int = 0
    threads: int = field(default_factory=_default_threads)
    budget: int = 1_000_000
    cross_depth: int = 3
    core_depth: int = 8
    tail_horizon: int = 4
    chaos_count: int = 10_000
    regularity_depth: int = 12

    def __post_init__(self):
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise ConfigError(f"unknown stages {bad}; choose from {list(STAGES)}", field="stages")
        object.__setattr__(self, "stages", tuple(s for s in STAGES if s in self.stages))
        for name in ("max_level", "max_vertices", "n_max", "esc_depth", "budget", "threads",
                     "cross_depth", "core_depth", "tail_horizon", "regularity_depth"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}", field=name)
        for name in ("seed", "chaos_count"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{name} must be a nonnegative integer, got {v!r}", field=name)
        if self.n_max < 2:
            raise ConfigError("n_max must be at least 2", field="n_max")
        if not isinstance(self.tol, (int, float)) or not 0 < self.tol < 1:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol!r}", field="tol")
        if self.eps is not None:
            try:
                eps = tuple(parse_rational(e, "eps") for e in self.eps)
            except ParseError as exc:
                raise ConfigError(str(exc), field="eps") from None
            if not eps or any(e <= 0 for e in eps):
                raise ConfigError("eps values must be positive", field="eps")
            object.__setattr__(self, "eps", eps)
        if self.s_grid is not None:
            try:
                grid = tuple(float(s) for s in self.s_grid)
            except (TypeError, ValueError):
                raise ConfigError("s_grid values must be numbers", field="s_grid") from None
            if not grid or any(s < 0 for s in grid):
                raise ConfigError("s_grid values must be nonnegative", field="s_grid")
            object.__setattr__(self, "s_grid", grid)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be an object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}", keys=unknown)
        doc = dict(doc)
        for key in ("stages", "eps", "s_grid"):
            if doc.get(key) is not None:
                if not isinstance(doc[key], (list, tuple)):
                    raise ConfigError(f"{key} must be a list", field=key)
                doc[key] = tuple(doc[key])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        return cls.from_dict(doc)

    def updated(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_json(self) -> dict:
        """Echo for reports; the thread count is left out so output does not depend on it."""
        doc = asdict(self)
        doc.pop("threads")
        doc["stages"] = list(self.stages)
        doc["eps"] = None if self.eps is None else [format_rational(e) for e in self.eps]
        doc["s_grid"] = None if self.s_grid is None else list(self.s_grid)
        return doc
