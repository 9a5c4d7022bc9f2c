"""Scenario configuration: dataclasses plus a flat dotted-key TOML reader.

A config file is plain TOML whose keys are written dotted, for example::

    grid.ell = 0.5
    params.K3 = [1.0, 1.5]
    run.dt = 0.005

Every key is optional; missing keys keep their defaults. Unknown keys are an
error so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import RodParams
from .grid import GridSpec
from .inner import InnerGains
from .outer import OuterGains

TARGET_FAMILIES = ("arc", "swing", "rest")


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


@dataclass(frozen=True)
class TargetConfig:
    """Desired shape. ``curvature`` wins over ``tip_deflection`` when both are set."""

    family: str = "arc"
    curvature: float | None = None
    tip_deflection: float = 0.15
    swing_amplitude: float = 0.0
    swing_omega: float = 1.0
    regulate: bool = True
    blend_width: float = 0.1

    def __post_init__(self):
        if self.family not in TARGET_FAMILIES:
            raise ValueError(f"target.family must be one of {TARGET_FAMILIES}, got {self.family!r}")
        if not self.blend_width > 0:
            raise ValueError("target.blend_width must be positive")


@dataclass(frozen=True)
class RunConfig:
    dt: float = 0.005
    duration: float = 10.0
    output_stride: int = 10
    snapshot_stride: int = 100
    tolerance: float = 1e-6
    max_iter: int = 200
    kv_max: float = 1e3
    tikhonov: float = 1e-8

    def __post_init__(self):
        if not (self.dt > 0 and self.duration >= 0 and self.tolerance > 0 and self.kv_max > 0):
            raise ValueError("run.dt, run.tolerance and run.kv_max must be positive, run.duration non-negative")
        if self.output_stride < 1 or self.snapshot_stride < 1 or self.max_iter < 1:
            raise ValueError("strides and the iteration cap must be at least 1")
        if self.tikhonov < 0:
            raise ValueError("run.tikhonov must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class InitialConfig:
    """Optional random perturbation of the initial rotation field (zero by default)."""

    theta_amplitude: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    params: RodParams = field(default_factory=RodParams)
    outer: OuterGains = field(default_factory=OuterGains)
    inner: InnerGains = field(default_factory=InnerGains)
    target: TargetConfig = field(default_factory=TargetConfig)
    run: RunConfig = field(default_factory=RunConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    seed: int = 0


_SECTIONS = {
    "grid": GridSpec,
    "params": RodParams,
    "outer": OuterGains,
    "inner": InnerGains,
    "target": TargetConfig,
    "run": RunConfig,
    "initial": InitialConfig,
}


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _coerce(value):
    return tuple(value) if isinstance(value, list) else value


def parse_override(text: str) -> tuple[str, Any]:
    """Split ``KEY=VALUE``; the value is read as a TOML literal, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form KEY=VALUE")
    key, raw = (part.strip() for part in text.split("=", 1))
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def build_config(values: dict[str, Any]) -> ScenarioConfig:
    """Assemble a :class:`ScenarioConfig` from flat dotted keys."""
    grouped: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    top: dict[str, Any] = {}
    for key, value in values.items():
        section, _, name = key.partition(".")
        if section in _SECTIONS and name:
            allowed = {f.name for f in dataclasses.fields(_SECTIONS[section])}
            if name not in allowed:
                raise ConfigError(f"unknown key {key!r}")
            grouped[section][name] = _coerce(value)
        elif key == "seed":
            top["seed"] = value
        else:
            raise ConfigError(f"unknown key {key!r}")
    try:
        parts = {name: cls(**grouped[name]) for name, cls in _SECTIONS.items()}
        seed = int(top.get("seed", 0))
        return ScenarioConfig(**parts, seed=seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> ScenarioConfig:
    """Read a config file (or start from defaults) and apply ``KEY=VALUE`` overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with path.open("rb") as fh:
                values = _flatten(tomllib.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    for text in overrides or []:
        key, value = parse_override(text)
        values[key] = value
    return build_config(values)


def config_to_flat(config: ScenarioConfig) -> dict[str, Any]:
    """Flat dotted-key view of a config, the inverse of :func:`build_config`."""
    flat: dict[str, Any] = {}
    for name in _SECTIONS:
        part = getattr(config, name)
        for f in dataclasses.fields(part):
            value = getattr(part, f.name)
            if hasattr(value, "tolist"):
                value = value.tolist()
            flat[f"{name}.{f.name}"] = value
    flat["seed"] = config.seed
    return flat
