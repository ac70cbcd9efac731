"""JSON experiment configuration: loading, overrides and validation."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import jsonschema

from .experiments import ExperimentConfig

__all__ = ["SCHEMA_VERSION", "ConfigError", "load_schema", "parse_override", "load_config", "config_from_dict"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration problem; ``str()`` is a ``file:line: message`` string."""


def load_schema() -> dict:
    text = resources.files("phasekit").joinpath(f"schema/config-v{SCHEMA_VERSION}.json").read_text()
    return json.loads(text)


def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return 1


def parse_override(item: str) -> tuple[str, object]:
    """``key=value`` with value parsed as JSON, falling back to a plain string."""
    if "=" not in item:
        raise ConfigError(f"--set {item}: expected key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def config_from_dict(data: dict, *, source: str = "<config>", text: str = "") -> ExperimentConfig:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        key = str(err.path[0]) if err.path else None
        if key is None and err.validator == "additionalProperties":
            key = next((k for k in data if k not in err.schema["properties"]), None)
        where = f"{source}:{_line_of(text, key) if key else 1}"
        label = f"{key}: " if key else ""
        raise ConfigError(f"{where}: {label}{err.message}")
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data.items() if k != "schema_version"}
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        first = str(exc).split(";")[0].strip()
        key = first.split()[0] if first else ""
        raise ConfigError(f"{source}:{_line_of(text, key)}: {exc}") from None


def load_config(path, overrides: Iterable[str] = ()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    known = set(ExperimentConfig.field_names()) | {"schema_version"}
    for item in overrides:
        key, value = parse_override(item)
        if key not in known:
            raise ConfigError(f"--set {item}: unknown key {key!r}")
        data[key] = value
    return config_from_dict(data, source=str(path), text=text)


def dump_config(cfg: ExperimentConfig, path: Optional[Path] = None) -> str:
    d = {"schema_version": SCHEMA_VERSION, **cfg.to_dict()}
    text = json.dumps(d, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
