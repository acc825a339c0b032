"""Line-oriented ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored. Keys are the TrainConfig field
names; unknown keys, duplicates and bad values are all reported together,
each with its line number, and no partial config is ever returned.
``phases`` is a comma-separated list of ``batches:learning_rate`` pairs.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .training import TrainConfig


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("\n".join(diagnostics))
        self.diagnostics = diagnostics


def parse_phases(text: str) -> list[tuple[int, float]]:
    phases = []
    for chunk in text.split(","):
        n, sep, lr = chunk.strip().partition(":")
        if not sep:
            raise ValueError(f"phase {chunk.strip()!r} is not batches:learning_rate")
        phases.append((int(n), float(lr)))
    return phases


def format_phases(phases) -> str:
    return ",".join(f"{n}:{lr!r}" for n, lr in phases)


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _convert(key: str, raw: str):
    if key == "phases":
        return parse_phases(raw)
    default = _FIELDS[key].default
    if isinstance(default, bool):
        if raw.lower() not in ("true", "false", "1", "0"):
            raise ValueError(f"expected true/false, got {raw!r}")
        return raw.lower() in ("true", "1")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text: str, source: str = "<config>") -> TrainConfig:
    values: dict = {}
    seen: dict[str, int] = {}
    errors: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        where = f"{source}:{lineno}"
        if not sep or not key:
            errors.append(f"{where}: expected key = value")
            continue
        if key not in _FIELDS:
            errors.append(f"{where}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"{where}: duplicate key {key!r} (first set on line {seen[key]})")
            continue
        seen[key] = lineno
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            errors.append(f"{where}: bad value for {key!r}: {exc}")
    if errors:
        raise ConfigError(errors)
    config = TrainConfig(**values)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc
    return config


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))


def dump_config(config: TrainConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(config, name)
        lines.append(f"{name} = {format_phases(v) if name == 'phases' else v}")
    return "\n".join(lines) + "\n"
