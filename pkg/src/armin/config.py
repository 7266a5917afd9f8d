"""Flat key-value config files for training runs.

One ``key = value`` per line, ``#`` comments, keys mirror TrainConfig
fields.  Unknown and duplicate keys are hard errors (no silent typos);
error messages carry the offending line number.
"""

from __future__ import annotations

import dataclasses

from .errors import ConfigError
from .training import TrainConfig

_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _convert(key: str, raw: str, line_no: int):
    kind = _FIELDS[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"line {line_no}: value {raw!r} for key {key!r} is not a {kind}"
        ) from None


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _convert(key, raw, line_no)
    return values


def load_config(path, overrides: list[str] | None = None) -> TrainConfig:
    """Parse a config file and apply ``key=value`` override strings."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            values = parse_config_text(fh.read())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _convert(key, raw, 0)
    return TrainConfig(**values)
