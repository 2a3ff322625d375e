"""JSON emission with 17-significant-digit reals.

Standard ``json.dumps`` prints floats with shortest round-trip repr; run
artifacts instead pin a fixed 17-significant-digit decimal encoding so that
documents are byte-stable across Python versions and round-trip bit-exactly.
Parsing is plain ``json.loads``.
"""

from __future__ import annotations

import json
import math

__all__ = ["dumps", "loads", "dump_path", "load_path"]


def _fmt_float(x):
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite reals are not serializable")
    if x == int(x) and abs(x) < 1e16:
        # keep integral floats readable but unambiguous
        return f"{x:.1f}"
    return f"{x:.17g}"


def _emit(obj, parts, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(_fmt_float(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            if not isinstance(k, str):
                raise TypeError("object keys must be strings")
            parts.append(pad_in + json.dumps(k) + ": ")
            _emit(v, parts, indent, level + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not len(obj):
            parts.append("[]")
            return
        parts.append("[\n")
        for i, v in enumerate(obj):
            parts.append(pad_in)
            _emit(v, parts, indent, level + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "]")
    else:
        try:
            import numpy as np
        except ImportError:  # pragma: no cover
            raise TypeError(f"not JSON-serializable: {type(obj)}")
        if isinstance(obj, np.ndarray):
            _emit(obj.tolist(), parts, indent, level)
        elif isinstance(obj, (np.floating,)):
            _emit(float(obj), parts, indent, level)
        elif isinstance(obj, (np.integer,)):
            _emit(int(obj), parts, indent, level)
        elif isinstance(obj, (np.bool_,)):
            _emit(bool(obj), parts, indent, level)
        else:
            raise TypeError(f"not JSON-serializable: {type(obj)}")


def dumps(obj, indent=2):
    parts = []
    _emit(obj, parts, indent, 0)
    return "".join(parts)


def loads(text):
    return json.loads(text)


def dump_path(obj, path, indent=2):
    with open(path, "w") as fh:
        fh.write(dumps(obj, indent))
        fh.write("\n")


def load_path(path):
    with open(path) as fh:
        return json.loads(fh.read())
