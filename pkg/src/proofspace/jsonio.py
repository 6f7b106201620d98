"""Canonical JSON rendering and atomic file writes.

Every serialized artifact (tactic databases, ablation configs, distance
matrices, MDS solutions, GMM models) goes through ``dumps_canonical`` so
that identical values always produce identical bytes: UTF-8, LF line
endings, two-space indentation, insertion-ordered keys, and floats rendered
with 17 significant digits (enough to round-trip IEEE-754 doubles).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any


def format_float(value: float) -> str:
    """Render a float with 17 significant digits, never as NaN/Inf."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r} cannot be serialized")
    if value == int(value) and abs(value) < 1e16:
        # Keep integral floats readable and stable: 1.0 -> "1.0", not "1".
        return f"{value:.1f}"
    return format(value, ".17g")


def _render(value: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if value is None or isinstance(value, bool):
        out.append(json.dumps(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, (list, tuple)):
        if len(value) == 0:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(pad + "  ")
            _render(item, indent + 1, out)
            out.append(",\n" if i + 1 < len(value) else "\n")
        out.append(pad + "]")
    elif isinstance(value, dict):
        if len(value) == 0:
            out.append("{}")
            return
        out.append("{\n")
        items = list(value.items())
        for i, (key, item) in enumerate(items):
            if not isinstance(key, str):
                raise TypeError(f"non-string key {key!r}")
            out.append(pad + "  " + json.dumps(key, ensure_ascii=False) + ": ")
            _render(item, indent + 1, out)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    else:
        raise TypeError(f"unserializable value of type {type(value).__name__}")


def dumps_canonical(value: Any) -> str:
    """Serialize ``value`` to canonical JSON text ending in a single LF."""
    out: list[str] = []
    _render(value, 0, out)
    return "".join(out) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a same-directory temp file + rename."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_text(path: str | os.PathLike) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()
