"""Small helpers for reading application problem documents."""

from __future__ import annotations

import math
from typing import Any, Mapping

import numpy as np

from ..errors import InvalidModel, ParseError
from ..model import PROB_TOL


def require(doc: Mapping[str, Any], key: str):
    if not isinstance(doc, Mapping):
        raise ParseError("problem document must be an object")
    if key not in doc:
        raise ParseError(f"missing field '{key}'")
    return doc[key]


def labels(doc: Mapping[str, Any], key: str) -> tuple:
    value = require(doc, key)
    if not isinstance(value, list) or not value:
        raise ParseError(f"field '{key}' must be a non-empty list")
    out = tuple(str(s) for s in value)
    if len(set(out)) != len(out):
        raise InvalidModel(f"labels in '{key}' are not unique")
    return out


def vector(value, name: str, size: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{name}' is not a numeric list") from exc
    if arr.shape != (size,):
        raise InvalidModel(f"{name} has shape {arr.shape}, expected ({size},)")
    return arr


def matrix(value, name: str, rows: int, cols: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{name}' is not a numeric matrix") from exc
    if arr.shape != (rows, cols):
        raise InvalidModel(f"{name} has shape {arr.shape}, expected ({rows}, {cols})")
    return arr


def real(doc: Mapping[str, Any], key: str, default=None) -> float:
    if key not in doc:
        if default is None:
            raise ParseError(f"missing field '{key}'")
        return float(default)
    try:
        return float(doc[key])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{key}' is not a number") from exc


def check_distribution(arr: np.ndarray, name: str):
    """Raise unless ``arr`` is a probability vector (or each row of one is)."""
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidModel(f"{name} has a negative or non-finite entry")
    sums = np.atleast_2d(arr).sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > PROB_TOL)[0]
    if bad.size:
        where = f" (row {int(bad[0])})" if arr.ndim == 2 else ""
        raise InvalidModel(f"{name}{where} sums to {sums[bad[0]]:.15g}")


def temperature(beta: float, k: float) -> float:
    return math.inf if beta == 0 else 1.0 / (k * beta)
