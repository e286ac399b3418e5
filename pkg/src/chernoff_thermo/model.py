"""Problem data shared by every other module: the weighted model.

A :class:`WeightedModel` holds a composition ``p`` over subsystems ``v``, a
conditional distribution ``q(u|v)`` over microstates, and an energy table
``f(u, v)`` measured in units of ``epsilon0``.  Arrays are indexed
``[v]`` and ``[v, u]`` following the order of the two alphabets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .errors import InconsistentCounts, InvalidModel, ParseError

PROB_TOL = 1e-12
COUNT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class WeightCounts:
    """Integer multiplicities ``M(u|v)`` with common total ``M``."""

    m: np.ndarray
    m_total: int

    def __post_init__(self):
        m = np.array(self.m, dtype=np.int64)
        if m.ndim != 2:
            raise InvalidModel("weight_counts.m must be a matrix")
        if self.m_total < 1:
            raise InvalidModel("weight_counts.total must be a positive integer")
        if np.any(m < 0):
            raise InvalidModel("weight_counts.m entries must be non-negative")
        sums = m.sum(axis=1)
        bad = np.nonzero(sums != self.m_total)[0]
        if bad.size:
            raise InvalidModel(
                f"weight_counts row {int(bad[0])} sums to {int(sums[bad[0]])}, "
                f"expected total {self.m_total}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "m_total", int(self.m_total))

    @property
    def log_total(self) -> float:
        return math.log(self.m_total)


@dataclass(frozen=True)
class WeightedModel:
    """Subsystem weights, conditional microstate probabilities and energies.

    Instances are immutable: the arrays are read-only after validation.
    """

    v_alphabet: tuple
    u_alphabet: tuple
    p: np.ndarray
    q: np.ndarray
    f: np.ndarray
    epsilon0: float = 1.0
    k_boltzmann: float = 1.0
    counts: Optional[WeightCounts] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "v_alphabet", tuple(str(s) for s in self.v_alphabet))
        object.__setattr__(self, "u_alphabet", tuple(str(s) for s in self.u_alphabet))
        object.__setattr__(self, "p", _frozen(self.p))
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "f", _frozen(self.f))
        object.__setattr__(self, "epsilon0", float(self.epsilon0))
        object.__setattr__(self, "k_boltzmann", float(self.k_boltzmann))
        self._validate()
        with np.errstate(divide="ignore"):
            logq = np.log(self.q)
        logq.flags.writeable = False
        object.__setattr__(self, "_logq", logq)

    def _validate(self):
        nv, nu = len(self.v_alphabet), len(self.u_alphabet)
        if nv == 0:
            raise InvalidModel("v_alphabet is empty")
        if nu == 0:
            raise InvalidModel("u_alphabet is empty")
        if len(set(self.v_alphabet)) != nv:
            raise InvalidModel("v_alphabet labels are not unique")
        if len(set(self.u_alphabet)) != nu:
            raise InvalidModel("u_alphabet labels are not unique")
        if self.p.shape != (nv,):
            raise InvalidModel(f"p has shape {self.p.shape}, expected ({nv},)")
        for name in ("q", "f"):
            arr = getattr(self, name)
            if arr.shape != (nv, nu):
                raise InvalidModel(f"{name} has shape {arr.shape}, expected ({nv}, {nu})")
        if not np.all(np.isfinite(self.p)) or np.any(self.p < 0):
            raise InvalidModel("p has a negative or non-finite weight")
        if abs(self.p.sum() - 1.0) > PROB_TOL:
            raise InvalidModel(f"p sums to {self.p.sum():.15g}")
        if not np.all(np.isfinite(self.q)) or np.any(self.q < 0):
            raise InvalidModel("q has a negative or non-finite entry")
        for i, row in enumerate(self.q):
            if abs(row.sum() - 1.0) > PROB_TOL:
                raise InvalidModel(
                    f"q row for v={self.v_alphabet[i]} sums to {row.sum():.15g}"
                )
        if not np.all(np.isfinite(self.f)):
            raise InvalidModel("f has a non-finite energy")
        if not (self.epsilon0 > 0 and math.isfinite(self.epsilon0)):
            raise InvalidModel("epsilon0 must be positive")
        if not (self.k_boltzmann > 0 and math.isfinite(self.k_boltzmann)):
            raise InvalidModel("k must be positive")
        if self.counts is not None:
            _check_counts(self, self.counts)

    @property
    def logq(self) -> np.ndarray:
        """``ln q(u|v)``, with ``-inf`` where ``q`` vanishes."""
        return self._logq

    @property
    def n_v(self) -> int:
        return len(self.v_alphabet)

    @property
    def n_u(self) -> int:
        return len(self.u_alphabet)

    def v_index(self, v) -> int:
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            if not 0 <= v < self.n_v:
                raise KeyError(v)
            return int(v)
        return self.v_alphabet.index(str(v))

    def __eq__(self, other):
        if not isinstance(other, WeightedModel):
            return NotImplemented
        return (
            self.v_alphabet == other.v_alphabet
            and self.u_alphabet == other.u_alphabet
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.q, other.q)
            and np.array_equal(self.f, other.f)
            and self.epsilon0 == other.epsilon0
            and self.k_boltzmann == other.k_boltzmann
        )

    __hash__ = None


@dataclass(frozen=True)
class EnergyRange:
    """Endpoints of the admissible energy range, aggregate and per subsystem."""

    e_min: float
    e_mean: float
    per_v: dict


def energy_range(model: WeightedModel) -> EnergyRange:
    lows = model.f.min(axis=1)
    highs = (model.q * model.f).sum(axis=1)
    # rounding can put a degenerate mean a hair below the minimum
    highs = np.maximum(highs, lows)
    per_v = {
        v: (float(lo), float(hi)) for v, lo, hi in zip(model.v_alphabet, lows, highs)
    }
    e_min = float(model.p @ lows)
    e_mean = max(float(model.p @ highs), e_min)
    return EnergyRange(e_min=e_min, e_mean=e_mean, per_v=per_v)


def _check_counts(model: WeightedModel, counts: WeightCounts):
    if counts.m.shape != model.q.shape:
        raise InconsistentCounts(
            f"weight_counts has shape {counts.m.shape}, expected {model.q.shape}"
        )
    ratio = counts.m / counts.m_total
    err = np.abs(ratio - model.q)
    if np.max(err) > COUNT_TOL:
        i, j = np.unravel_index(np.argmax(err), err.shape)
        raise InconsistentCounts(
            f"M(u|v)/M = {ratio[i, j]:.12g} but q = {model.q[i, j]:.12g} "
            f"at v={model.v_alphabet[i]}, u={model.u_alphabet[j]}"
        )


def attach_weight_counts(model: WeightedModel, counts: WeightCounts) -> WeightedModel:
    """Return a copy of ``model`` carrying integer counts ``M(u|v)`` and ``M``."""
    _check_counts(model, counts)
    return replace(model, counts=counts)


def make_model(
    p: Sequence[float],
    q: Sequence[Sequence[float]],
    f: Sequence[Sequence[float]],
    v_alphabet: Optional[Sequence] = None,
    u_alphabet: Optional[Sequence] = None,
    epsilon0: float = 1.0,
    k: float = 1.0,
) -> WeightedModel:
    """Convenience constructor with default integer labels."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    f = np.atleast_2d(np.asarray(f, dtype=float))
    if v_alphabet is None:
        v_alphabet = [str(i) for i in range(q.shape[0])]
    if u_alphabet is None:
        u_alphabet = [str(j) for j in range(q.shape[1])]
    return WeightedModel(
        v_alphabet=v_alphabet,
        u_alphabet=u_alphabet,
        p=p,
        q=q,
        f=f,
        epsilon0=epsilon0,
        k_boltzmann=k,
    )


def _require(doc: Mapping, key: str):
    if key not in doc:
        raise ParseError(f"missing field '{key}'")
    return doc[key]


def _real_matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field '{name}' is not a numeric matrix") from exc
    if arr.ndim != 2:
        raise ParseError(f"field '{name}' must be a row-per-v matrix")
    return arr


def model_from_dict(doc: Mapping[str, Any]) -> WeightedModel:
    if not isinstance(doc, Mapping):
        raise ParseError("model document must be an object")
    v_alpha = _require(doc, "v_alphabet")
    u_alpha = _require(doc, "u_alphabet")
    if not isinstance(v_alpha, list) or not isinstance(u_alpha, list):
        raise ParseError("alphabets must be lists of strings")
    try:
        p = np.array(_require(doc, "p"), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError("field 'p' is not a numeric list") from exc
    if p.ndim != 1:
        raise ParseError("field 'p' must be a list")
    q = _real_matrix(_require(doc, "q"), "q")
    f = _real_matrix(_require(doc, "f"), "f")
    model = WeightedModel(
        v_alphabet=v_alpha,
        u_alphabet=u_alpha,
        p=p,
        q=q,
        f=f,
        epsilon0=doc.get("epsilon0", 1.0),
        k_boltzmann=doc.get("k", 1.0),
    )
    wc = doc.get("weight_counts")
    if wc is not None:
        if not isinstance(wc, Mapping) or "m" not in wc or "total" not in wc:
            raise ParseError("weight_counts must be an object with 'm' and 'total'")
        try:
            m = np.array(wc["m"], dtype=float)
            total = int(wc["total"])
        except (TypeError, ValueError) as exc:
            raise ParseError("weight_counts entries must be integers") from exc
        if m.ndim != 2 or np.any(m != np.round(m)):
            raise ParseError("weight_counts.m must be an integer matrix")
        model = attach_weight_counts(model, WeightCounts(m.astype(np.int64), total))
    return model


def load_model(source: str) -> WeightedModel:
    """Parse a JSON model document and validate it."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg} at line {exc.lineno}") from exc
    return model_from_dict(doc)


def model_to_dict(model: WeightedModel) -> dict:
    doc = {
        "v_alphabet": list(model.v_alphabet),
        "u_alphabet": list(model.u_alphabet),
        "p": model.p.tolist(),
        "q": model.q.tolist(),
        "f": model.f.tolist(),
        "epsilon0": model.epsilon0,
        "k": model.k_boltzmann,
    }
    if model.counts is not None:
        doc["weight_counts"] = {
            "m": model.counts.m.tolist(),
            "total": model.counts.m_total,
        }
    return doc


def serialize_model(model: WeightedModel) -> str:
    return json.dumps(model_to_dict(model))
