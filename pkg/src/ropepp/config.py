"""Flat ``key = value`` config files with dotted section names.

Example::

    # 376M reference model
    model.hidden = 1024
    model.attn_heads = 8
    scaling.kind = linear_pi
    scaling.factor = 8

Blank lines and ``#`` comments are ignored. Values stay strings; callers
convert them. Unknown keys are rejected against an allow-list.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Union

__all__ = ["ConfigError", "parse_config", "load_config", "dump_config"]


class ConfigError(ValueError):
    pass


def parse_config(text: str, allowed: Optional[Iterable[str]] = None) -> dict:
    allowed = None if allowed is None else set(allowed)
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(not seg for seg in key.split(".")):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if allowed is not None and key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: Union[str, Path], allowed: Optional[Iterable[str]] = None) -> dict:
    return parse_config(Path(path).read_text(), allowed)


def dump_config(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())
