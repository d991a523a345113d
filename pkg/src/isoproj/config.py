"""Flat ``key = value`` configuration files (``#`` starts a comment)."""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def parse_field(key: str, value, kind):
    """Convert ``value`` with ``kind``, naming ``key`` on failure."""
    if value is None or not isinstance(value, str):
        return value
    try:
        if kind is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind == "ints":
            return tuple(int(v) for v in value.replace(";", ",").split(",") if v.strip())
        if kind == "floats":
            return tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
        if kind == "truths":
            return tuple(v.strip() for v in value.split(";") if v.strip())
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key!r}: {value!r}") from None
