"""Hypothesis-testing exponents: signal detection and temperature tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy import integrate

from ..errors import InvalidModel, OutOfRange, QuadratureFailure
from ..ldp import rate_function
from ..model import WeightedModel, make_model
from ..thermo import EDGE_TOL, avg_heat_capacity, solve_beta, tilt_stats
from . import _doc

QUAD_TOL = 1e-10


# ---------------------------------------------------------------------------
# signal detection with a likelihood-ratio threshold


@dataclass(frozen=True)
class DetectionResult:
    false_alarm_exp: float
    missed_detection_exp: float
    beta_false_alarm: float
    beta_missed_detection: float
    band: tuple


def _detection_models(p, noise, signal):
    p = np.asarray(p, dtype=float)
    noise = np.asarray(noise, dtype=float)
    signal = np.atleast_2d(np.asarray(signal, dtype=float))
    if signal.shape != (p.size, noise.size):
        raise InvalidModel(
            f"signal table has shape {signal.shape}, expected ({p.size}, {noise.size})"
        )
    _doc.check_distribution(p, "p")
    _doc.check_distribution(noise, "noise")
    _doc.check_distribution(signal, "signal")
    live = p > 0
    mismatch = (signal[live] > 0) != (noise[None, :] > 0)
    if np.any(mismatch):
        i, j = np.argwhere(mismatch)[0]
        raise InvalidModel(
            f"noise and signal supports differ at x-row {int(np.flatnonzero(live)[i])}, y={int(j)}"
        )
    both = (signal > 0) & (noise[None, :] > 0)
    # a difference of logs so that swapping the hypotheses negates f bit for bit
    llr = np.where(
        both, np.log(np.where(both, noise, 1.0)) - np.log(np.where(both, signal, 1.0)), 0.0
    )
    rows = np.tile(noise, (p.size, 1))
    fa = make_model(p, rows, llr)
    md = make_model(p, signal, -llr)
    return fa, md


def detection_exponents(p, noise, signal, threshold_E0: float) -> DetectionResult:
    """False-alarm and missed-detection exponents of a threshold test.

    ``f = ln[q(y) / q(y|x)]`` is averaged over a received sequence whose
    composition is ``p(x)``; a false alarm is ``sum f <= n E0`` under noise,
    a miss is the opposite inequality under the signal.  ``E0`` must lie in
    the closed band between the two hypothesis means of ``f``.
    """
    fa, md = _detection_models(p, noise, signal)
    lo = 0.0 - float(md.p @ (md.q * md.f).sum(axis=1))
    hi = float(fa.p @ (fa.q * fa.f).sum(axis=1))
    tol = EDGE_TOL * max(1.0, abs(lo), abs(hi))
    E0 = float(threshold_E0)
    if not lo - tol <= E0 <= hi + tol:
        raise OutOfRange(f"threshold {E0:.12g} is outside the band [{lo:.12g}, {hi:.12g}]")
    E0 = min(max(E0, lo), hi)
    fa_rate = rate_function(fa, E0)
    md_rate = rate_function(md, -E0)
    return DetectionResult(
        fa_rate.rate,
        md_rate.rate,
        _beta(fa, E0, fa_rate.regime),
        _beta(md, -E0, md_rate.regime),
        (lo, hi),
    )


def _beta(model: WeightedModel, E: float, regime: str) -> float:
    return 0.0 if regime == "zero" else solve_beta(model, E).beta_star


def detection_problem_from_dict(doc: Mapping[str, Any]) -> dict:
    xs = _doc.labels(doc, "x_alphabet")
    ys = _doc.labels(doc, "y_alphabet")
    return {
        "p": _doc.vector(_doc.require(doc, "p"), "p", len(xs)),
        "noise": _doc.vector(_doc.require(doc, "noise"), "noise", len(ys)),
        "signal": _doc.matrix(_doc.require(doc, "signal"), "signal", len(xs), len(ys)),
        "threshold_E0": _doc.real(doc, "E0"),
    }


# ---------------------------------------------------------------------------
# deciding between two temperatures


@dataclass(frozen=True)
class TempTestProblem:
    """States ``x`` with weights ``p(x)`` and Hamiltonians ``H[x, y]``.

    ``beta1 >= beta2 >= 0`` are the two hypothesized inverse temperatures and
    ``threshold_E0`` the energy threshold of the test.
    """

    state_p: np.ndarray
    hamiltonian: np.ndarray
    beta1: float
    beta2: float
    threshold_E0: float
    k: float = 1.0
    x_alphabet: tuple = ()
    y_alphabet: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.state_p, dtype=float)
        H = np.atleast_2d(np.asarray(self.hamiltonian, dtype=float))
        object.__setattr__(self, "state_p", p)
        object.__setattr__(self, "hamiltonian", H)
        for name in ("beta1", "beta2", "threshold_E0", "k"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if H.shape[0] != p.size:
            raise InvalidModel(f"hamiltonian has {H.shape[0]} rows, expected {p.size}")
        if not np.all(np.isfinite(H)):
            raise InvalidModel("hamiltonian has a non-finite entry")
        _doc.check_distribution(p, "p")
        if not (self.beta1 >= self.beta2 >= 0) or not math.isfinite(self.beta1):
            raise OutOfRange(
                f"need beta1 >= beta2 >= 0, got beta1={self.beta1}, beta2={self.beta2}"
            )
        if not self.k > 0:
            raise InvalidModel("k must be positive")

    def to_model(self) -> WeightedModel:
        """Weighted model with uniform prior; ``ln zeta = ln Z + ln |Y|``."""
        ny = self.hamiltonian.shape[1]
        q = np.full(self.hamiltonian.shape, 1.0 / ny)
        xs = self.x_alphabet or None
        ys = self.y_alphabet or None
        return make_model(self.state_p, q, self.hamiltonian, xs, ys, k=self.k)

    @property
    def log_states(self) -> float:
        return math.log(self.hamiltonian.shape[1])


@dataclass(frozen=True)
class TempTestResult:
    I1: float
    I2: float
    E0: float
    E1: float
    E2: float
    T0: float
    T1: float
    T2: float
    sigma0: float
    sigma1: float
    sigma2: float


def temp_test_problem_from_dict(doc: Mapping[str, Any]) -> TempTestProblem:
    xs = _doc.labels(doc, "x_alphabet")
    ys = _doc.labels(doc, "y_alphabet")
    return TempTestProblem(
        state_p=_doc.vector(_doc.require(doc, "p"), "p", len(xs)),
        hamiltonian=_doc.matrix(_doc.require(doc, "hamiltonian"), "hamiltonian", len(xs), len(ys)),
        beta1=_doc.real(doc, "beta1"),
        beta2=_doc.real(doc, "beta2"),
        threshold_E0=_doc.real(doc, "E0"),
        k=_doc.real(doc, "k", 1.0),
        x_alphabet=xs,
        y_alphabet=ys,
    )


def mean_energy_at(problem: TempTestProblem, beta: float) -> float:
    model = problem.to_model()
    _, mean, _ = tilt_stats(model.logq, model.f, 1.0, beta)
    return float(model.p @ mean)


def _sigma_at_beta(model: WeightedModel, log_states: float, beta: float):
    """``(E(beta), Sigma_bar(E(beta)))`` straight from the tangent point."""
    lnz, mean, _ = tilt_stats(model.logq, model.f, 1.0, beta)
    E = float(model.p @ mean)
    return E, beta * E + float(model.p @ lnz) + log_states


def ordinary_entropy(problem: TempTestProblem, E: float):
    """``(Sigma_bar(E), beta(E))`` with the ordinary partition function."""
    sol = solve_beta(problem.to_model(), E)
    return sol.value + problem.log_states, sol.beta_star


def temperature_test_exponents(problem: TempTestProblem) -> TempTestResult:
    """Exponents ``I1`` (under ``beta1``) and ``I2`` (under ``beta2``).

    Each is the vertical gap at ``E0`` between the entropy curve and its
    tangent at ``E_i``.  ``E0`` may sit on either end of ``[E1, E2]``.
    """
    model = problem.to_model()
    E1, s1 = _sigma_at_beta(model, problem.log_states, problem.beta1)
    E2, s2 = _sigma_at_beta(model, problem.log_states, problem.beta2)
    E0 = problem.threshold_E0
    tol = EDGE_TOL * max(1.0, abs(E1), abs(E2))
    if not E1 - tol <= E0 <= E2 + tol:
        raise OutOfRange(f"E0={E0:.12g} is outside [E1, E2] = [{E1:.12g}, {E2:.12g}]")
    if abs(E0 - E1) <= tol:
        s0, b0 = s1, problem.beta1
    elif abs(E0 - E2) <= tol:
        s0, b0 = s2, problem.beta2
    else:
        s0, b0 = ordinary_entropy(problem, E0)
    I2 = s2 - s0 - problem.beta2 * (E2 - E0)
    I1 = s1 - s0 - problem.beta1 * (E1 - E0)
    assert I1 >= -1e-12 and I2 >= -1e-12, (I1, I2)
    k = problem.k
    return TempTestResult(
        I1=max(I1, 0.0),
        I2=max(I2, 0.0),
        E0=E0,
        E1=E1,
        E2=E2,
        T0=_doc.temperature(b0, k),
        T1=_doc.temperature(problem.beta1, k),
        T2=_doc.temperature(problem.beta2, k),
        sigma0=s0,
        sigma1=s1,
        sigma2=s2,
    )


def heat_capacity_integral(problem: TempTestProblem, which: str) -> float:
    """Exponent as a heat-capacity integral over temperature.

    ``I2 = (1/k) int_{T0}^{T2} (1/T - 1/T2) C(T) dT`` and
    ``I1 = (1/k) int_{T1}^{T0} (1/T1 - 1/T) C(T) dT`` with ``C`` the average
    heat capacity per particle.  An infinite ``T2`` (``beta2 = 0``) makes the
    upper limit infinite; the integrand decays like ``T^-3`` there.
    """
    if which not in ("I1", "I2"):
        raise ValueError(f"which must be 'I1' or 'I2', got {which!r}")
    res = temperature_test_exponents(problem)
    model = problem.to_model()
    k = problem.k

    def inv(T):
        return 0.0 if math.isinf(T) else 1.0 / T

    if which == "I2":
        lo, hi, ref = res.T0, res.T2, inv(res.T2)

        def integrand(T):
            return (1.0 / T - ref) * avg_heat_capacity(model, T) / k

    else:
        lo, hi, ref = res.T1, res.T0, inv(res.T1)

        def integrand(T):
            return (ref - 1.0 / T) * avg_heat_capacity(model, T) / k

    if lo >= hi:
        return 0.0
    value, err, *rest = integrate.quad(
        integrand, lo, hi, epsabs=QUAD_TOL, epsrel=1e-10, limit=500, full_output=1
    )
    if rest and err > 1e-8:
        raise QuadratureFailure(f"heat-capacity integral error estimate {err:.3g}")
    return value
