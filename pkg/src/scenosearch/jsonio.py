"""Canonical JSON writing shared by scenario and trace files.

Canonical form: keys keep the order in which the serializer inserted them,
floats always print with 6 decimal digits, and equal values therefore
produce byte-identical documents.
"""

from __future__ import annotations

import json
import math
from typing import Any

from .errors import DocumentSyntaxError


def format_float(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError(f"non-finite float in canonical document: {value!r}")
    if value == 0.0:  # avoid "-0.000000"
        return "0.000000"
    return f"{value:.6f}"


def _emit(value: Any, out: list, indent: int, level: int) -> None:
    pad = " " * (indent * level)
    child_pad = " " * (indent * (level + 1))
    if value is None:
        out.append("null")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            if not isinstance(key, str):
                raise ValueError(f"non-string key in canonical document: {key!r}")
            out.append(child_pad)
            out.append(json.dumps(key))
            out.append(": ")
            _emit(item, out, indent, level + 1)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(child_pad)
            _emit(item, out, indent, level + 1)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise ValueError(f"unsupported type in canonical document: {type(value)}")


def canonical_dumps(value: Any, indent: int = 2) -> str:
    """Serialize ``value`` to canonical JSON text (trailing newline included)."""
    out: list = []
    _emit(value, out, indent, 0)
    out.append("\n")
    return "".join(out)


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"malformed JSON document: {exc}") from exc
