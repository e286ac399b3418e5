"""Channel exponents from the output-as-subsystem representation.

The channel outputs ``y`` act as subsystems with weights ``p(y)``, the input
distribution ``q(x)`` is the microstate prior, and the energy is either the
log-likelihood ``-ln W(y|x)`` (matched decoding) or an additive decoding
metric ``m(x, y)`` (mismatched decoding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np

from ..errors import InvalidModel, NonConvergence
from ..thermo import solve_dual
from . import _doc

BETA_TOL = 1e-8
VALUE_TOL = 1e-9


@dataclass(frozen=True)
class ChannelProblem:
    """Input distribution ``q(x)``, transition matrix ``W[x, y]``, optional metric."""

    input_q: np.ndarray
    channel_W: np.ndarray
    metric: Optional[np.ndarray] = None
    x_alphabet: tuple = ()
    y_alphabet: tuple = ()
    epsilon0: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.input_q, dtype=float)
        W = np.atleast_2d(np.asarray(self.channel_W, dtype=float))
        object.__setattr__(self, "input_q", q)
        object.__setattr__(self, "channel_W", W)
        xs = self.x_alphabet or tuple(str(i) for i in range(W.shape[0]))
        ys = self.y_alphabet or tuple(str(j) for j in range(W.shape[1]))
        object.__setattr__(self, "x_alphabet", tuple(map(str, xs)))
        object.__setattr__(self, "y_alphabet", tuple(map(str, ys)))
        if W.shape != (len(xs), len(ys)) or q.shape != (len(xs),):
            raise InvalidModel(
                f"channel has shape {W.shape}, expected ({len(xs)}, {len(ys)})"
            )
        _doc.check_distribution(q, "q")
        _doc.check_distribution(W, "channel")
        if self.metric is not None:
            m = np.asarray(self.metric, dtype=float)
            if m.shape != W.shape:
                raise InvalidModel(f"metric has shape {m.shape}, expected {W.shape}")
            if not np.all(np.isfinite(m)):
                raise InvalidModel("metric has a non-finite entry")
            object.__setattr__(self, "metric", m)

    @property
    def output_p(self) -> np.ndarray:
        return self.input_q @ self.channel_W


@dataclass(frozen=True)
class ChannelResult:
    value: float
    beta_star: float
    is_matched: bool
    energy: float


def channel_problem_from_dict(doc: Mapping[str, Any]) -> ChannelProblem:
    xs = _doc.labels(doc, "x_alphabet")
    ys = _doc.labels(doc, "y_alphabet")
    metric = doc.get("metric")
    if metric is not None:
        metric = _doc.matrix(metric, "metric", len(xs), len(ys))
    return ChannelProblem(
        input_q=_doc.vector(_doc.require(doc, "q"), "q", len(xs)),
        channel_W=_doc.matrix(_doc.require(doc, "channel"), "channel", len(xs), len(ys)),
        metric=metric,
        x_alphabet=xs,
        y_alphabet=ys,
        epsilon0=_doc.real(doc, "epsilon0", 1.0),
    )


def mutual_information(q: np.ndarray, W: np.ndarray) -> float:
    """``I(X;Y)`` in nats for input ``q`` and transition matrix ``W``."""
    joint = q[:, None] * W
    py = joint.sum(axis=0)
    mask = joint > 0
    ratio = W[mask] / np.broadcast_to(py, W.shape)[mask]
    return float(np.sum(joint[mask] * np.log(ratio)))


def channel_exponent(problem: ChannelProblem) -> ChannelResult:
    """``-S_bar(E)`` for the channel model at ``E = sum q W f``.

    In the matched case the minimizing ``beta * eps0`` is 1 and the value is
    the mutual information; both facts are checked on every call.  Zero
    transition probabilities are allowed: for ``beta > 0`` an input that
    cannot produce ``y`` contributes nothing to that output's partition
    function, so each output sees ``q`` restricted to the inputs that reach it.
    """
    q, W = problem.input_q, problem.channel_W
    py = problem.output_p
    ys = py > 0
    xs = q > 0
    qx, Wxy, py_act = q[xs], W[xs][:, ys], py[ys]
    matched = problem.metric is None
    with np.errstate(divide="ignore"):
        logq = np.broadcast_to(np.log(qx), (py_act.size, qx.size)).copy()

    if matched:
        reach = Wxy.T > 0
        log_mass = np.log((qx[None, :] * reach).sum(axis=1))
        logq = np.where(reach, logq - log_mass[:, None], -np.inf)
        with np.errstate(divide="ignore"):
            f = np.where(reach, -np.log(np.where(reach, Wxy.T, 1.0)), 0.0)
        f = f / problem.epsilon0
        offset = float(py_act @ log_mass)
    else:
        f = problem.metric[xs][:, ys].T
        offset = 0.0

    joint = qx[:, None] * Wxy
    E = float(np.sum(joint.T * f))
    sol = solve_dual(py_act, logq, f, problem.epsilon0, E, strict=False)
    value = -sol.value - offset
    beta = sol.beta_star

    if matched:
        degenerate = sol.status == "mean" and _flat(py_act, logq, f)
        if degenerate:
            # every beta > 0 attains the same value; report the equilibrium point
            beta = 1.0 / problem.epsilon0
        info = mutual_information(qx, Wxy)
        if abs(beta * problem.epsilon0 - 1.0) > BETA_TOL:
            raise NonConvergence(
                f"matched channel solved at beta*eps0={beta * problem.epsilon0:.12g}, expected 1"
            )
        if abs(value - info) > VALUE_TOL:
            raise NonConvergence(
                f"matched channel value {value:.15g} differs from I(X;Y)={info:.15g}"
            )
    return ChannelResult(max(value, 0.0) + 0.0, beta, matched, E)


def _flat(p: np.ndarray, logq: np.ndarray, f: np.ndarray) -> bool:
    """True when ``f`` is constant on the support of every row."""
    live = np.isfinite(logq)
    lo = np.where(live, f, np.inf).min(axis=1)
    hi = np.where(live, f, -np.inf).max(axis=1)
    return bool(np.all((hi - lo)[p > 0] <= 1e-12 * np.maximum(1.0, np.abs(hi))))


def bsc(crossover: float) -> np.ndarray:
    """Binary symmetric channel matrix."""
    e = float(crossover)
    return np.array([[1.0 - e, e], [e, 1.0 - e]])


def capacity_bsc(crossover: float) -> float:
    """``ln 2 - h(e)`` in nats (uniform input is optimal)."""
    e = crossover
    if e in (0.0, 1.0):
        return math.log(2.0)
    return math.log(2.0) + e * math.log(e) + (1.0 - e) * math.log1p(-e)
