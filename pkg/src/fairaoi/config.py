"""INI configuration: one section per component, keys named after fields.

``[scenario]`` maps onto :class:`ScenarioConfig`, ``[solver]`` onto the SCA
settings, ``[moead]`` and ``[llm]`` onto the evolutionary solver, ``[sweep]``
onto the experiment grid. ``auto`` leaves an optional value at its rule-based
default. The shipped profile is ``profiles/highway.ini``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError
from .moead import MoeadSettings
from .sca import ScaSettings
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class LlmSettings:
    endpoint: str = ""
    model: str = "default"
    timeout_s: float = 30.0
    budget: int = 100


@dataclass(frozen=True)
class SweepSettings:
    speeds_mps: tuple = (20.0, 22.0, 24.0, 26.0, 28.0, 30.0)
    vehicle_counts: tuple = (2, 3, 4, 5, 6, 7, 8)
    seeds: int = 1
    baseline_window_ms: float = 100.0
    workers: int = 1

    def __post_init__(self):
        if not self.speeds_mps or not self.vehicle_counts:
            raise ConfigurationError("sweep grids must be non-empty")
        if self.seeds < 1:
            raise ConfigurationError("seeds must be >= 1")


@dataclass(frozen=True)
class Settings:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    solver: ScaSettings = field(default_factory=ScaSettings)
    moead: MoeadSettings = field(default_factory=MoeadSettings)
    llm: LlmSettings = field(default_factory=LlmSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def to_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name))
                for name in ("scenario", "solver", "moead", "llm", "sweep")}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_SECTIONS = {"scenario": ScenarioConfig, "solver": ScaSettings, "moead": MoeadSettings,
             "llm": LlmSettings, "sweep": SweepSettings}
_ALIASES = {("solver", "lambda"): "lam"}


def _convert(raw: str, default, name: str):
    raw = raw.strip()
    if raw.lower() in ("auto", "none", ""):
        return "" if isinstance(default, str) else None
    try:
        if isinstance(default, tuple) or name in ("lam",):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], int) and not isinstance(default[0], bool):
                return tuple(int(x) for x in items)
            return tuple(float(x) for x in items)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError(f"{raw} is not an integer")
            return int(value)
        if isinstance(default, float) or default is None:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigurationError(f"{name}: cannot parse {raw!r}: {exc}") from exc


def _section(parser: configparser.ConfigParser, name: str, cls):
    if not parser.has_section(name):
        return cls()
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    values = {}
    for key, raw in parser.items(name):
        attr = _ALIASES.get((name, key), key)
        if attr not in defaults:
            raise ConfigurationError(f"unknown key [{name}] {key}")
        values[attr] = _convert(raw, defaults[attr], attr)
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def parse_settings(text: str, source: str = "<string>") -> Settings:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    unknown = set(parser.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigurationError(f"{source}: unknown sections {sorted(unknown)}")
    return Settings(**{name: _section(parser, name, cls) for name, cls in _SECTIONS.items()})


def default_profile_text() -> str:
    return resources.files("fairaoi").joinpath("profiles/highway.ini").read_text(encoding="utf-8")


def load_settings(path: Optional[str] = None) -> Settings:
    """Bundled defaults, overlaid with ``path`` when given."""
    text = default_profile_text()
    if path is not None:
        try:
            text += "\n" + Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), strict=False)
    try:
        parser.read_string(text, source=str(path or "highway.ini"))
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from exc
    unknown = set(parser.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown sections {sorted(unknown)}")
    return Settings(**{name: _section(parser, name, cls) for name, cls in _SECTIONS.items()})
