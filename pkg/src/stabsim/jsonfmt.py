"""Deterministic JSON emission: 17-significant-digit floats, sorted keys."""

from __future__ import annotations

import math


def _fmt_float(x: float) -> str:
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if math.isnan(x):
        return '"nan"'
    return format(float(x), ".17g")


def dumps17(obj, indent: int = 0, _level: int = 0) -> str:
    """Serialize with every float at 17 significant digits (bit-faithful)."""
    pad = " " * (indent * (_level + 1)) if indent else ""
    close_pad = " " * (indent * _level) if indent else ""
    sep = ",\n" if indent else ","
    nl = "\n" if indent else ""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    if isinstance(obj, dict):
        items = [
            f"{pad}{dumps17(str(k))}: {dumps17(v, indent, _level + 1)}"
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        ]
        return "{" + nl + sep.join(items) + nl + close_pad + "}" if items else "{}"
    if isinstance(obj, (list, tuple)):
        items = [f"{pad}{dumps17(v, indent, _level + 1)}" for v in obj]
        return "[" + nl + sep.join(items) + nl + close_pad + "]" if items else "[]"
    try:
        return dumps17(float(obj), indent, _level)
    except (TypeError, ValueError) as err:
        raise TypeError(f"cannot serialize {type(obj).__name__}") from err
