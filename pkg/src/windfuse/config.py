"""Flat key=value configuration files.

Precedence everywhere is: command-line flag, then config file, then the
built-in default.
"""

from __future__ import annotations

from .errors import DataError

__all__ = ["load_config", "resolve"]


def load_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise DataError(f"{path}:{ln}: expected key=value, got {line!r}")
            out[key.strip()] = value.strip()
    return out


def resolve(defaults: dict, config: dict, flags: dict) -> dict:
    """Merge three layers; flag values of None mean "not given"."""
    merged = dict(defaults)
    merged.update({k: v for k, v in config.items() if v is not None})
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged
