"""Small shared result containers and serialization helpers."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, is_dataclass


@dataclass
class CheckResult:
    """Outcome of a sanity check: a verdict plus the numbers behind it."""

    name: str
    passed: bool
    value: float
    lower: float
    upper: float
    details: dict

    def __str__(self):
        state = "PASS" if self.passed else "FAIL"
        return "%s: %s (value=%.6g, band=[%.6g, %.6g])" % (
            self.name,
            state,
            self.value,
            self.lower,
            self.upper,
        )


def format_float(x):
    """Render a float with 17 significant digits (round-trip exact)."""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def jsonable(obj):
    """Recursively convert dataclasses / tuples / numpy scalars for json."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        try:
            return obj.item()
        except (TypeError, ValueError):
            return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return obj
    return obj


def canonical_json(payload, indent=0):
    """JSON text with sorted keys and 17-significant-digit floats.

    The stdlib encoder renders floats by repr, which is round-trip exact
    but shortest-form; artifacts promise a fixed digit count instead, so
    this walks the structure itself.  Output is byte-identical for equal
    payloads regardless of dict construction order.
    """
    pad = " " * indent
    obj = jsonable(payload)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            '%s  %s: %s' % (pad, json.dumps(str(k)), canonical_json(v, indent + 2))
            for k, v in sorted(obj.items())
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [pad + "  " + canonical_json(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_float(obj) if math.isfinite(obj) else json.dumps(str(obj))
    return json.dumps(obj)


def write_json_atomic(path, payload):
    """Serialize payload canonically; never leaves a partial file behind."""
    write_text_atomic(path, canonical_json(payload) + "\n")


def write_text_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
