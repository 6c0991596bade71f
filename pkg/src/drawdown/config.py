"""Flat key-value configuration files.

Format: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines ignored.  Keys may be section-qualified (``model.mu``).  Values are
kept as strings; callers coerce.
"""

from __future__ import annotations

import os

from .errors import ConfigError


def parse_kv_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def parse_kv_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


def section(kv: dict, name: str) -> dict:
    """Extract keys prefixed by ``name.`` with the prefix stripped."""
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in kv.items() if k.startswith(prefix)}
