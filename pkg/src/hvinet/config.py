"""Flat ``key = value`` text files used for parameters, sidecars and
training configs. Blank lines and ``#`` comments are ignored."""
from __future__ import annotations


class ConfigError(ValueError):
    pass


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def format_kv(d: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in d.items())


def read_kv(path) -> dict:
    with open(path) as fh:
        return parse_kv(fh.read())


def write_kv(path, d: dict):
    with open(path, "w") as fh:
        fh.write(format_kv(d))
