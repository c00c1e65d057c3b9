"""Allowed attribute/extras value closure and canonical serialization.

Values are restricted to null, bool, 64-bit int, finite float, str, list
and string-keyed map, arbitrarily nested: exactly what survives a JSON
round trip without surprises. Canonical form (sorted keys, no whitespace)
is what content hashes and checkpoints are computed over.
"""

from __future__ import annotations

import json
import math

from provflow.exceptions import InvalidValueError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def validate_value(value, path: str = "$") -> None:
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise InvalidValueError(f"{path}: integer outside 64-bit range")
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidValueError(f"{path}: non-finite float")
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            validate_value(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise InvalidValueError(f"{path}: map keys must be strings")
            validate_value(item, f"{path}.{key}")
        return
    raise InvalidValueError(f"{path}: unsupported type {type(value).__name__}")


def validate_document(doc: dict, what: str = "attributes") -> dict:
    """Validate a top-level key-value document. Returns it unchanged."""
    if not isinstance(doc, dict):
        raise InvalidValueError(f"{what} must be a map, got {type(doc).__name__}")
    validate_value(doc, what)
    return doc


def canonical_json(value) -> str:
    """Deterministic serialization: sorted keys, minimal separators."""
    return json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def get_path(doc, dotted: str):
    """Resolve ``a.b.c`` inside nested maps; raises KeyError when absent."""
    current = doc
    for part in dotted.split("."):
        if not isinstance(current, dict) or part not in current:
            raise KeyError(dotted)
        current = current[part]
    return current


def set_path(doc: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    current = doc
    for part in parts[:-1]:
        nxt = current.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            current[part] = nxt
        current = nxt
    current[parts[-1]] = value


def delete_path(doc: dict, dotted: str) -> bool:
    """Remove a dotted key; returns False (a no-op) when it is absent."""
    parts = dotted.split(".")
    current = doc
    for part in parts[:-1]:
        current = current.get(part)
        if not isinstance(current, dict):
            return False
    return current.pop(parts[-1], _MISSING) is not _MISSING


_MISSING = object()
