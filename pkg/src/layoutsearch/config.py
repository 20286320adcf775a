"""Run configuration: defaults, YAML files and the environment default path."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .projection import Intrinsics
from .relations import RelationThresholds
from .retrieval import MatchConfig
from .solver import SolverConfig

CONFIG_ENV = "LAYOUTSEARCH_CONFIG"


@dataclass(frozen=True)
class Paths:
    object_library: Optional[str] = None
    relation_dictionary: Optional[str] = None
    detections: Optional[str] = None
    ground_truth: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    room: tuple[float, float, float] = (5.0, 5.0, 5.0)
    relations: RelationThresholds = field(default_factory=RelationThresholds)
    solver: SolverConfig = field(default_factory=SolverConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    layouts: int = 5
    cameras: int = 1
    intrinsics: Intrinsics = field(default_factory=Intrinsics)
    paths: Paths = field(default_factory=Paths)
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.room) != 3 or min(self.room) <= 0:
            raise ValueError("room needs three positive extents")
        if self.layouts < 1 or self.cameras < 1:
            raise ValueError("layouts and cameras must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["room"] = list(self.room)
        return d


def _build(cls, data: Mapping[str, Any], where: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current) and isinstance(value, Mapping):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        elif name == "room":
            kwargs[name] = tuple(float(v) for v in value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def from_mapping(data: Optional[Mapping[str, Any]]) -> RunConfig:
    return _build(RunConfig, data or {}, "config")


def load_config(path: Optional[str | Path] = None) -> RunConfig:
    """Config from ``path``, else from the file named by the environment, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, Mapping):
        raise ValueError(f"{path}: top level must be a mapping")
    return from_mapping(data)


def override(cfg: RunConfig, **sections: Mapping[str, Any]) -> RunConfig:
    """Replace fields; keyword names are sections, ``top`` for top-level fields."""
    top = dict(sections.pop("top", {}) or {})
    for name, values in sections.items():
        values = {k: v for k, v in (values or {}).items() if v is not None}
        if values:
            top[name] = replace(getattr(cfg, name), **values)
    top = {k: v for k, v in top.items() if v is not None}
    return replace(cfg, **top) if top else cfg
