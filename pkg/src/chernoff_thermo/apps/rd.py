"""Rate-distortion as an entropy of a weighted model.

With the source letters as subsystems, a fixed reproduction distribution
``q*(xhat)`` as the microstate prior and the distortion as energy, the rate
at distortion ``D`` is ``R(D) = -S_bar(D)`` and the minimizing ``beta`` plays
the role of an inverse temperature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import integrate

from ..errors import (
    InvalidModel,
    NonConvergence,
    OutOfRange,
    ParseError,
    QuadratureFailure,
    ValidityWarning,
)
from ..model import WeightedModel, energy_range, make_model
from ..thermo import solve_beta
from . import _doc

QUAD_ABS_TOL = 1e-10
CLOSED_FORM_TOL = 1e-8
BINARY_TOL = 1e-10
EQUIPARTITION_TOL = 0.02
MONOTONE_STEP = 1e-4
# beyond |z|^theta = 745 the Boltzmann factor underflows a double
UNDERFLOW_EXPONENT = 745.0


@dataclass(frozen=True)
class RdProblem:
    """Discrete source ``p(x)``, reproduction prior ``q*(xhat)``, distortion table."""

    source_p: np.ndarray
    coding_q: np.ndarray
    distortion: np.ndarray
    level_D: float
    x_alphabet: tuple = ()
    xhat_alphabet: tuple = ()
    epsilon0: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.source_p, dtype=float)
        q = np.asarray(self.coding_q, dtype=float)
        d = np.asarray(self.distortion, dtype=float)
        xs = self.x_alphabet or tuple(str(i) for i in range(p.size))
        xh = self.xhat_alphabet or tuple(str(j) for j in range(q.size))
        object.__setattr__(self, "source_p", p)
        object.__setattr__(self, "coding_q", q)
        object.__setattr__(self, "distortion", d)
        object.__setattr__(self, "x_alphabet", tuple(map(str, xs)))
        object.__setattr__(self, "xhat_alphabet", tuple(map(str, xh)))
        object.__setattr__(self, "level_D", float(self.level_D))
        if p.shape != (len(xs),) or q.shape != (len(xh),):
            raise InvalidModel("p and q must match their alphabets")
        if d.shape != (p.size, q.size):
            raise InvalidModel(f"distortion has shape {d.shape}, expected ({p.size}, {q.size})")
        _doc.check_distribution(p, "p")
        _doc.check_distribution(q, "q")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InvalidModel("distortion entries must be finite and non-negative")

    def to_model(self) -> WeightedModel:
        q_rows = np.tile(self.coding_q, (self.source_p.size, 1))
        return make_model(
            self.source_p,
            q_rows,
            self.distortion,
            self.x_alphabet,
            self.xhat_alphabet,
            epsilon0=self.epsilon0,
            k=self.k,
        )


@dataclass(frozen=True)
class RdResult:
    R: float
    beta_star: float
    temperature: float


def rd_problem_from_dict(doc: Mapping[str, Any]) -> RdProblem:
    xs = _doc.labels(doc, "x_alphabet")
    xh = _doc.labels(doc, "xhat_alphabet")
    return RdProblem(
        source_p=_doc.vector(_doc.require(doc, "p"), "p", len(xs)),
        coding_q=_doc.vector(_doc.require(doc, "q"), "q", len(xh)),
        distortion=_doc.matrix(_doc.require(doc, "distortion"), "distortion", len(xs), len(xh)),
        level_D=_doc.real(doc, "D"),
        x_alphabet=xs,
        xhat_alphabet=xh,
        epsilon0=_doc.real(doc, "epsilon0", 1.0),
        k=_doc.real(doc, "k", 1.0),
    )


def rate_distortion(problem: RdProblem) -> RdResult:
    """``R(D) = -S_bar(D)`` for the model ``(p, q*, d)``.

    Raises :class:`OutOfRange` unless ``D`` lies between the smallest
    achievable average distortion and the mean distortion under ``q*``.
    """
    model = problem.to_model()
    sol = solve_beta(model, problem.level_D)
    R = max(-sol.value, 0.0)
    return RdResult(R, sol.beta_star, _doc.temperature(sol.beta_star, problem.k))


def _binary_entropy(D: float) -> float:
    return -D * math.log(D) - (1.0 - D) * math.log1p(-D)


def binary_hamming_rd(D: float, epsilon0: float = 1.0, k: float = 1.0) -> RdResult:
    """Closed forms for the binary symmetric source under Hamming distortion.

    ``T = eps0 / (k ln((1-D)/D))`` and ``R = ln 2 - h(D)`` in nats.  The
    result is cross-checked against :func:`rate_distortion`.
    """
    if not 0.0 < D < 0.5:
        raise OutOfRange(f"binary Hamming distortion must be in (0, 1/2), got {D}")
    log_odds = math.log1p(-D) - math.log(D)
    beta = log_odds / epsilon0
    T = _doc.temperature(beta, k)
    R = math.log(2.0) - _binary_entropy(D)
    generic = rate_distortion(
        RdProblem([0.5, 0.5], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]], D, epsilon0=epsilon0, k=k)
    )
    if abs(generic.R - R) > BINARY_TOL:
        raise NonConvergence(
            f"closed form R={R:.15g} disagrees with the solver's {generic.R:.15g}"
        )
    return RdResult(R, beta, T)


# ---------------------------------------------------------------------------
# high-resolution L_theta distortion with a uniform reproduction density


@dataclass(frozen=True)
class HighResProblem:
    """Uniform reproduction density on ``[-A, A]`` with ``|xhat - x|^theta`` distortion."""

    theta: float
    half_width: float
    source_points: tuple
    epsilon0: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        pts = tuple((float(x), float(w)) for x, w in self.source_points)
        object.__setattr__(self, "source_points", pts)
        if not self.theta > 0:
            raise InvalidModel(f"theta must be positive, got {self.theta}")
        if not self.half_width > 0:
            raise InvalidModel(f"A must be positive, got {self.half_width}")
        if not pts:
            raise InvalidModel("source_points is empty")
        w = np.array([w for _, w in pts])
        _doc.check_distribution(w, "source weights")
        if any(abs(x) >= self.half_width for x, _ in pts):
            raise InvalidModel("every source point must satisfy |x| < A")


@dataclass(frozen=True)
class HighResDistortion:
    D: float
    equipartition_ratio: float
    monotone: bool


def highres_problem_from_dict(doc: Mapping[str, Any]) -> HighResProblem:
    pts = doc.get("source_points", [[0.0, 1.0]])
    try:
        pts = [(float(x), float(w)) for x, w in pts]
    except (TypeError, ValueError) as exc:
        raise ParseError("source_points must be a list of [x, weight] pairs") from exc
    return HighResProblem(
        theta=_doc.real(doc, "theta"),
        half_width=_doc.real(doc, "A"),
        source_points=tuple(pts),
        epsilon0=_doc.real(doc, "epsilon0", 1.0),
        k=_doc.real(doc, "k", 1.0),
    )


def _quad(fn, upper: float) -> float:
    if upper <= 0.0:
        return 0.0
    value, err, *rest = integrate.quad(
        fn, 0.0, upper, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=500, full_output=1
    )
    if rest and err > QUAD_ABS_TOL:
        raise QuadratureFailure(f"quadrature error {err:.3g} on [0, {upper:.6g}]")
    return value


def _point_distortion(theta: float, A: float, x: float, bt: float) -> float:
    """Mean of ``|xhat - x|^theta`` under the tilt ``exp(-bt |xhat - x|^theta)``
    restricted to ``[-A, A]``, with ``bt = beta * eps0``.

    In the scaled variable ``z = bt^(1/theta) (xhat - x)`` the interval becomes
    ``[-a, b]`` and the mean is ``(1/bt) * int |z|^theta e^{-|z|^theta} / int e^{-|z|^theta}``;
    both integrals are split at the cusp ``z = 0``.
    """
    s = bt ** (1.0 / theta)
    zcap = UNDERFLOW_EXPONENT ** (1.0 / theta)
    ends = (min(s * (A + x), zcap), min(s * (A - x), zcap))

    def weight(z):
        return math.exp(-(z**theta))

    def moment(z):
        zt = z**theta
        return zt * math.exp(-zt)

    G = sum(_quad(weight, c) for c in ends)
    N = sum(_quad(moment, c) for c in ends)
    if not G > 0:
        raise QuadratureFailure("normalizing integral vanished")
    # N / s^theta keeps full precision as bt -> 0, where both integrals shrink
    return (N / G) / (s**theta)


def theta1_closed_form(beta: float, A: float, epsilon0: float = 1.0) -> float:
    """Exact distortion for ``theta = 1`` and a source point at the origin."""
    bt = beta * epsilon0
    x = bt * A
    # A / (e^x - 1) written to stay finite for large x
    return 1.0 / bt - A * math.exp(-x) / -math.expm1(-x)


def _average_distortion(problem: HighResProblem, beta: float) -> float:
    bt = beta * problem.epsilon0
    return sum(
        w * _point_distortion(problem.theta, problem.half_width, x, bt)
        for x, w in problem.source_points
        if w > 0
    )


def highres_distortion(problem: HighResProblem, beta: float) -> HighResDistortion:
    """Average distortion at inverse temperature ``beta`` and its equipartition ratio.

    ``equipartition_ratio = D * beta * eps0 * theta`` tends to 1 at low
    temperature.  A :class:`ValidityWarning` is issued when ``D`` fails to
    increase with temperature at ``beta``.
    """
    if not (beta > 0 and math.isfinite(beta)):
        raise OutOfRange(f"beta must be positive and finite, got {beta}")
    D = _average_distortion(problem, beta)
    if problem.theta == 1.0 and all(x == 0.0 for x, w in problem.source_points if w > 0):
        bt = beta * problem.epsilon0
        # the closed form cancels catastrophically as bt*A -> 0
        if bt * problem.half_width >= 1e-3:
            exact = theta1_closed_form(beta, problem.half_width, problem.epsilon0)
            if abs(exact - D) > CLOSED_FORM_TOL:
                raise QuadratureFailure(
                    f"quadrature {D:.15g} disagrees with the closed form {exact:.15g}"
                )
    hotter = _average_distortion(problem, beta / (1.0 + MONOTONE_STEP))
    colder = _average_distortion(problem, beta / (1.0 - MONOTONE_STEP))
    monotone = hotter - colder >= -1e-12 * max(D, 1e-300)
    if not monotone:
        warnings.warn(
            f"distortion is not increasing in temperature at beta={beta:.6g}",
            ValidityWarning,
            stacklevel=2,
        )
    ratio = D * beta * problem.epsilon0 * problem.theta
    return HighResDistortion(D, ratio, bool(monotone))


@dataclass(frozen=True)
class HighResRate:
    R: float
    beta_star: float
    equipartition_ratio: float


def highres_rate(problem: HighResProblem, D: float) -> HighResRate:
    """Low-temperature rate ``ln(A theta / Gamma(1/theta)) - ln(theta e D) / theta``.

    The rate uses the infinite-interval approximation; the finite-interval
    distortion at ``beta* = 1/(theta eps0 D)`` is checked against ``D`` and a
    :class:`ValidityWarning` is issued when they differ by more than 2%.
    """
    if not (D > 0 and math.isfinite(D)):
        raise OutOfRange(f"D must be positive, got {D}")
    theta, A = problem.theta, problem.half_width
    R = math.log(A * theta) - math.lgamma(1.0 / theta) - math.log(theta * math.e * D) / theta
    beta = 1.0 / (theta * problem.epsilon0 * D)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        ratio = highres_distortion(problem, beta).D / D
    if abs(ratio - 1.0) > EQUIPARTITION_TOL:
        warnings.warn(
            f"D={D:.6g} is outside the low-temperature regime "
            f"(finite-interval distortion ratio {ratio:.4f})",
            ValidityWarning,
            stacklevel=2,
        )
    return HighResRate(R, beta, ratio)


def rd_curve(problem: RdProblem, levels: Sequence[float]) -> list:
    """Rate at each distortion level (same problem, varying ``D``)."""
    return [rate_distortion(replace(problem, level_D=D)) for D in levels]


def distortion_range(problem: RdProblem) -> tuple:
    """``(smallest achievable, mean)`` average distortion under ``q*``."""
    rng = energy_range(problem.to_model())
    return rng.e_min, rng.e_mean
