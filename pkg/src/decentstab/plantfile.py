"""JSON plant files.

A plant file is a JSON object::

    {"name": "demo", "n": 3, "m": 2,
     "A": [[...], [...], [...]], "B": [[...], ...], "C": [[...], ...]}

Matrices are nested row-major arrays.  Floats are written with ``repr``
precision, so a parse/serialize round trip is exact.
"""

import json

import numpy as np

from .decomposition import validate_plant
from .errors import DecentStabError

__all__ = ['PlantFileError', 'parse_plant', 'load_plant', 'plant_to_dict', 'dump_plant']


class PlantFileError(DecentStabError, ValueError):
    """Malformed plant file; `field` names the offending entry when known."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"field {field!r}: {message}")
        self.field = field


def _matrix(data, key):
    if key not in data:
        raise PlantFileError("missing", key)
    rows = data[key]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise PlantFileError("expected a non-empty list of rows", key)
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise PlantFileError(f"row {i} has {len(row)} entries, expected {width}", key)
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise PlantFileError(f"entry [{i}][{j}] is not a number: {v!r}", key)
    arr = np.array(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise PlantFileError("non-finite entry", key)
    return arr


def _count(data, key):
    v = data.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise PlantFileError(f"expected a positive integer, got {v!r}", key)
    return v


def parse_plant(text):
    """Parse plant JSON text into a validated `Plant`.

    Raises
    ------
    PlantFileError
        Syntax errors (with line and column) or bad fields.
    AssumptionViolation
        The matrices fail the rank conditions.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlantFileError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                             f"{exc.msg}") from exc
    if not isinstance(data, dict):
        raise PlantFileError("top level must be an object")
    name = data.get('name', 'plant')
    if not isinstance(name, str):
        raise PlantFileError("expected a string", 'name')
    n, m = _count(data, 'n'), _count(data, 'm')
    A, B, C = _matrix(data, 'A'), _matrix(data, 'B'), _matrix(data, 'C')
    for key, arr, shape in (('A', A, (n, n)), ('B', B, (n, m)), ('C', C, (m, n))):
        if arr.shape != shape:
            raise PlantFileError(f"shape {arr.shape} does not match n={n}, m={m}", key)
    return validate_plant(A, B, C, name)


def load_plant(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise PlantFileError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_plant(text)


def plant_to_dict(p):
    return {'name': p.name, 'n': p.n, 'm': p.m,
            'A': p.A.tolist(), 'B': p.B.tolist(), 'C': p.C.tolist()}


def dump_plant(p, path=None):
    text = json.dumps(plant_to_dict(p), indent=2) + "\n"
    if path is not None:
        with open(path, 'w') as fh:
            fh.write(text)
    return text
