"""Plain-text run configuration.

The format is a list of sections holding ``key = value`` lines::

    # comment
    [emitter]
    preset = coupled
    lifetime = 2.6

Blank lines and ``#`` comments are ignored.  Every problem is reported as
:class:`~plasmonsps.errors.ConfigError` carrying the offending line number.
Which keys a section accepts, and their types, is declared by a
:data:`Schema`; anything else is rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Mapping

from .errors import ConfigError


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


Config = dict[str, dict[str, Entry]]
Schema = Mapping[str, Mapping[str, Callable[[str], object]]]


def parse_config(text: str) -> Config:
    """Split configuration text into sections of raw entries."""
    out: Config = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", n)
            section = line[1:-1].strip().lower()
            if section in out:
                raise ConfigError(f"section [{section}] appears twice", n)
            out[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", n)
        if section is None:
            raise ConfigError("key outside of any [section]", n)
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if not key:
            raise ConfigError("empty key", n)
        if key in out[section]:
            raise ConfigError(f"key {key!r} repeated in [{section}]", n)
        out[section][key] = Entry(value.strip(), n)
    return out


def read_config(path: str | os.PathLike) -> Config:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def validate(cfg: Config, schema: Schema) -> dict[str, dict[str, object]]:
    """Convert entries to typed values, rejecting unknown sections and keys."""
    typed: dict[str, dict[str, object]] = {}
    for section, entries in cfg.items():
        if section not in schema:
            first = min((e.line for e in entries.values()), default=None)
            raise ConfigError(f"unknown section [{section}]", first)
        typed[section] = {}
        for key, entry in entries.items():
            if key not in schema[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", entry.line)
            try:
                typed[section][key] = schema[section][key](entry.value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", entry.line) from exc
    return typed


def as_bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def dump_config(values: Mapping[str, Mapping[str, object]]) -> str:
    """Format typed values back into configuration text."""
    lines = []
    for section, entries in values.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in entries.items())
        lines.append("")
    return "\n".join(lines)
