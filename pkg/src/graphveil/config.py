"""``key = value`` configuration files mapped onto dataclasses."""

from __future__ import annotations

import dataclasses
import typing
from pathlib import Path
from typing import Any, TypeVar

from graphveil.errors import ConfigError

T = TypeVar("T")


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key.replace("-", "_")] = value
    return out


def _coerce(value: Any, hint: Any, key: str) -> Any:
    if not isinstance(value, str):
        return value
    origin = typing.get_origin(hint)
    try:
        if hint is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if hint in (int, float, str):
            return hint(value)
        if origin is tuple:
            (inner, *_rest) = typing.get_args(hint)
            return tuple(_coerce(v.strip(), inner, key) for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    return value


def build(cls: type[T], values: dict[str, Any]) -> T:
    """Instantiate dataclass ``cls`` from ``values``.

    Raises:
        ConfigError: a key is not a field of ``cls`` or a value does not parse.
    """
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        return cls(**{k: _coerce(v, hints[k], k) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(cls: type[T], path: str | Path | None, **overrides: Any) -> T:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            values.update(parse_kv(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build(cls, values)
