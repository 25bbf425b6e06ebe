"""JSON file format for operators and states.

    {"layout": [{"label": "A", "dim": 2}, ...],
     "matrix": [[[re, im], ...], ...]}

The matrix is row-major over the layout's basis ordering.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .tensor_algebra import Operator, SystemLayout


def layout_from_json(obj) -> SystemLayout:
    if not isinstance(obj, list) or not obj:
        raise ValidationError("must be a nonempty list of {label, dim}", field="layout")
    pairs = []
    for i, entry in enumerate(obj):
        if not isinstance(entry, dict) or "label" not in entry or "dim" not in entry:
            raise ValidationError(f"entry {i} needs 'label' and 'dim'", field="layout")
        dim = entry["dim"]
        if isinstance(dim, bool) or not isinstance(dim, int):
            raise ValidationError(f"entry {i} dim must be an integer", field="layout")
        pairs.append((str(entry["label"]), dim))
    return SystemLayout(tuple(pairs))


def layout_to_json(layout: SystemLayout):
    return [{"label": label, "dim": dim} for label, dim in layout.subsystems]


def operator_from_json(obj) -> Operator:
    if not isinstance(obj, dict):
        raise ValidationError("operator document must be an object", field="operator")
    for key in ("layout", "matrix"):
        if key not in obj:
            raise ValidationError("missing", field=key)
    layout = layout_from_json(obj["layout"])
    rows = obj["matrix"]
    n = layout.total_dim
    if not isinstance(rows, list) or len(rows) != n:
        raise ValidationError(f"expected {n} rows", field="matrix")
    m = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ValidationError(f"row {i} must have {n} entries", field="matrix")
        for j, entry in enumerate(row):
            if not isinstance(entry, list) or len(entry) != 2:
                raise ValidationError(f"entry [{i}][{j}] must be [re, im]", field="matrix")
            re, im = entry
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
                raise ValidationError(f"entry [{i}][{j}] must be numeric", field="matrix")
            if not (math.isfinite(re) and math.isfinite(im)):
                raise ValidationError(f"entry [{i}][{j}] is not finite", field="matrix")
            m[i, j] = complex(re, im)
    return Operator(layout, m)


def _clean(x: float) -> float:
    # normalise negative zero so output is byte-stable
    return float(x) + 0.0


def operator_to_json(op: Operator):
    return {
        "layout": layout_to_json(op.layout),
        "matrix": [[[_clean(z.real), _clean(z.imag)] for z in row] for row in op.matrix],
    }


def load_operator(path) -> Operator:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", field="input") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON ({exc.msg})", field="input") from None
    return operator_from_json(obj)


def save_operator(op: Operator, path):
    Path(path).write_text(json.dumps(operator_to_json(op)) + "\n")
