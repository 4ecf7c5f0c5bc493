"""Deterministic CSV/JSON report writing.

Every float is written in scientific notation with 12 significant digits;
non-finite values become ``null`` in JSON and ``nan``/``inf`` in CSV.
"""

import json
import math

import numpy as np

__all__ = ["fmt_float", "to_json", "write_json"]


def fmt_float(x):
    x = float(x)
    if not math.isfinite(x):
        return repr(x)
    return f"{x:.11e}"


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt_float(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _quote(s):
    return json.dumps(s)


def to_json(obj, indent=2):
    """Serialise nested dicts/lists/numbers with the fixed float format."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path):
    with open(path, "w") as fh:
        fh.write(to_json(obj))
