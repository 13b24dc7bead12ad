"""Flat key = value text format shared by config files, audit reports and
run manifests. Lines starting with # and blank lines are ignored."""

from __future__ import annotations


def format_kv(pairs):
    return "".join(f"{key} = {value}\n" for key, value in pairs)


def parse_kv(text):
    """Parse into an ordered dict; raises ValueError with the bad line."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key in {raw!r}")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out
