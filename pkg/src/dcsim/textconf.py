"""Flat ``key = value`` text with repeated named blocks.

    # comment
    mode = dc
    enb {
        id = 1
        kind = LTE
    }

Values are kept as strings; callers convert and validate them.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid configuration value or malformed configuration text."""


@dataclass
class ParsedText:
    values: dict[str, str] = field(default_factory=dict)
    blocks: list[tuple[str, dict[str, str]]] = field(default_factory=list)


def _split_assignment(line: str, lineno: int, source: str) -> tuple[str, str]:
    if "=" not in line:
        raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
    key, value = line.split("=", 1)
    key, value = key.strip(), value.strip()
    if not key:
        raise ConfigError(f"{source}:{lineno}: empty key")
    return key, value


def parse_text(text: str, source: str = "<text>") -> ParsedText:
    out = ParsedText()
    current: dict[str, str] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.endswith("{"):
            if current is not None:
                raise ConfigError(f"{source}:{lineno}: nested blocks are not supported")
            current_name = line[:-1].strip()
            if not current_name:
                raise ConfigError(f"{source}:{lineno}: block without a name")
            current = {}
            continue
        if line == "}":
            if current is None:
                raise ConfigError(f"{source}:{lineno}: unmatched '}}'")
            out.blocks.append((current_name, current))
            current = None
            continue
        key, value = _split_assignment(line, lineno, source)
        target = out.values if current is None else current
        if key in target:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        target[key] = value
    if current is not None:
        raise ConfigError(f"{source}: block {current_name!r} is not closed")
    return out


def parse_file(path) -> ParsedText:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), source=str(path))
