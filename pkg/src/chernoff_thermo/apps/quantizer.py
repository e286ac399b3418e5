"""Time-sharing between fixed-rate scalar quantizers.

Quantizer ``s`` is used a fraction ``p(s)`` of the time.  The source letters
are the microstates (prior ``q(x)``), the quantizers are the subsystems, and
the per-letter distortion ``d(x, F_s(x))`` is the energy.  The search runs
over sharing distributions supported on one or two quantizers that respect
the rate budget ``sum_s p(s) R_s <= R``.  In the small-distortion direction
with a binding budget the true optimum can occasionally mix three
quantizers; such optima lie outside this search and are underestimated.

Two directions are supported:

``small-distortion``
    ``exponent = max_p min_beta [beta D + sum_s p(s) ln sum_x q(x) e^{-beta d_s(x)}]``,
    which is ``<= 0``; the probability of ``sum d < n D`` behaves like
    ``e^{n exponent}``.  ``rate_function`` is its negation.
``excess-distortion``
    energies ``-d`` and level ``-D``; ``exponent`` is the largest rate
    function of ``sum d > n D`` over the admissible sharings (``>= 0``) and
    ``rate_function`` equals it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from ..errors import ChernoffError, InfeasibleBudget, InvalidModel, OutOfRange, ParseError
from ..ldp import default_workers
from ..thermo import solve_dual
from . import _doc

DIRECTIONS = ("small-distortion", "excess-distortion")
TIE_TOL = 1e-10
RATE_TOL = 1e-12
WEIGHT_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Quantizer:
    """A quantizer's per-letter distortion ``d(x, F_s(x))`` and its rate ``R_s``."""

    label: str
    distortions: np.ndarray
    rate: float

    def __post_init__(self):
        d = np.asarray(self.distortions, dtype=float)
        d.flags.writeable = False
        object.__setattr__(self, "distortions", d)
        object.__setattr__(self, "label", str(self.label))
        object.__setattr__(self, "rate", float(self.rate))
        if not np.all(np.isfinite(d)):
            raise InvalidModel(f"quantizer {self.label} has a non-finite distortion")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise InvalidModel(f"quantizer {self.label} has rate {self.rate}, expected >= 0")


DISTORTIONS = {
    "squared": lambda x, y: (x - y) ** 2,
    "absolute": lambda x, y: abs(x - y),
    "hamming": lambda x, y: float(x != y),
}


def quantizer_from_map(
    label: str,
    x_values: Sequence[float],
    reproductions: Sequence[float],
    rate: float,
    distortion: str = "squared",
) -> Quantizer:
    """Build a quantizer from its reproduction map ``x -> F_s(x)``."""
    if distortion not in DISTORTIONS:
        raise InvalidModel(f"unknown distortion {distortion!r}")
    if len(x_values) != len(reproductions):
        raise InvalidModel(f"quantizer {label} maps {len(reproductions)} letters, expected {len(x_values)}")
    d = DISTORTIONS[distortion]
    return Quantizer(label, [d(float(x), float(y)) for x, y in zip(x_values, reproductions)], rate)


@dataclass(frozen=True)
class QuantizerProblem:
    source_q: np.ndarray
    quantizers: tuple
    budget_R: float
    level_D: float
    direction: str = "small-distortion"

    def __post_init__(self):
        q = np.asarray(self.source_q, dtype=float)
        object.__setattr__(self, "source_q", q)
        object.__setattr__(self, "quantizers", tuple(self.quantizers))
        object.__setattr__(self, "budget_R", float(self.budget_R))
        object.__setattr__(self, "level_D", float(self.level_D))
        _doc.check_distribution(q, "q")
        if not self.quantizers:
            raise InvalidModel("no quantizers given")
        for quant in self.quantizers:
            if quant.distortions.shape != q.shape:
                raise InvalidModel(
                    f"quantizer {quant.label} has {quant.distortions.size} distortions, "
                    f"expected {q.size}"
                )
        labels = [quant.label for quant in self.quantizers]
        if len(set(labels)) != len(labels):
            raise InvalidModel("quantizer labels are not unique")
        if self.direction not in DIRECTIONS:
            raise InvalidModel(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if not math.isfinite(self.level_D):
            raise OutOfRange("D must be finite")

    @property
    def distortion_table(self) -> np.ndarray:
        return np.array([quant.distortions for quant in self.quantizers])

    @property
    def rates(self) -> np.ndarray:
        return np.array([quant.rate for quant in self.quantizers])


@dataclass(frozen=True)
class QuantizerPlan:
    """Optimal sharing; ``exponent`` follows the direction's convention."""

    exponent: float
    sharing_p: dict
    support: list
    rate_used: float
    beta_star: float
    rate_function: float
    direction: str
    support_index: tuple = field(default=(), repr=False)


def quantizer_problem_from_dict(doc: Mapping[str, Any]) -> QuantizerProblem:
    q = np.array(_doc.require(doc, "q"), dtype=float)
    entries = _doc.require(doc, "quantizers")
    if not isinstance(entries, list) or not entries:
        raise ParseError("field 'quantizers' must be a non-empty list")
    x_values = doc.get("x_values")
    kind = doc.get("distortion", "squared")
    quants = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, Mapping):
            raise ParseError(f"quantizer entry {i} must be an object")
        label = entry.get("label", f"F{i + 1}")
        rate = _doc.real(entry, "rate")
        if "distortions" in entry:
            d = _doc.vector(entry["distortions"], f"quantizers[{i}].distortions", q.size)
            quants.append(Quantizer(label, d, rate))
        elif "map" in entry:
            if x_values is None:
                raise ParseError("quantizer maps need the 'x_values' field")
            quants.append(quantizer_from_map(label, x_values, entry["map"], rate, kind))
        else:
            raise ParseError(f"quantizer entry {i} needs 'distortions' or 'map'")
    return QuantizerProblem(
        source_q=q,
        quantizers=tuple(quants),
        budget_R=_doc.real(doc, "budget_R"),
        level_D=_doc.real(doc, "D"),
        direction=doc.get("direction", "small-distortion"),
    )


class _Objective:
    """Direction-aware objective of a sharing vector (to be maximized)."""

    def __init__(self, problem: QuantizerProblem):
        d = problem.distortion_table
        self.small = problem.direction == "small-distortion"
        self.f = d if self.small else -d
        self.E = problem.level_D if self.small else -problem.level_D
        with np.errstate(divide="ignore"):
            logq = np.log(problem.source_q)
        self.logq = np.broadcast_to(logq, d.shape)

    def solve(self, p: np.ndarray):
        live = p > 0
        sol = solve_dual(p[live], self.logq[live], self.f[live], 1.0, self.E, strict=False)
        value = sol.value if self.small else -sol.value
        return value, sol.beta_star

    def __call__(self, p: np.ndarray) -> float:
        return self.solve(p)[0]

    def floors(self) -> np.ndarray:
        """Smallest energy of each quantizer over the source support."""
        live = np.isfinite(self.logq)
        return np.where(live, self.f, np.inf).min(axis=1)


def _reachable(fs: float, ft: float, E: float, lo: float, hi: float):
    """Sub-interval of weights ``w`` on ``t`` with ``(1-w) fs + w ft <= E``.

    Outside it the objective is ``-inf``, which would mislead golden section.
    """
    slack = RATE_TOL * max(1.0, abs(E))
    if ft == fs:
        return (lo, hi) if fs <= E + slack else (1.0, 0.0)
    w = (E - fs) / (ft - fs)
    if ft > fs:
        return lo, min(hi, w)
    return max(lo, w), hi


def _golden_max(h, a: float, b: float, tol: float = 1e-10):
    """Maximize a concave (possibly ``-inf``-valued) function on ``[a, b]``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    hc, hd = h(c), h(d)
    while b - a > tol:
        if hc >= hd:
            b, d, hd = d, c, hc
            c = b - _GOLDEN * (b - a)
            hc = h(c)
        else:
            a, c, hc = c, d, hd
            d = a + _GOLDEN * (b - a)
            hd = h(d)
    return (c, hc) if hc >= hd else (d, hd)


def _pair_candidates(rates: np.ndarray, R: float):
    """Feasible pairs ``(s, t, w_max)`` where ``w`` is the weight of ``t``."""
    for s, t in combinations(range(rates.size), 2):
        rs, rt = rates[s], rates[t]
        if rs > R + RATE_TOL and rt > R + RATE_TOL:
            continue
        if rs <= R + RATE_TOL and rt <= R + RATE_TOL:
            yield s, t, 0.0, 1.0
        elif rs <= R + RATE_TOL:
            # weight on t is capped where the budget binds
            yield s, t, 0.0, min(1.0, (R - rs) / (rt - rs))
        else:
            yield s, t, 1.0 - min(1.0, (R - rt) / (rs - rt)), 1.0


def _snap(p: np.ndarray) -> np.ndarray:
    p = np.where(p <= WEIGHT_TOL, 0.0, p)
    return p / p.sum()


def _better(cand, best) -> bool:
    """Larger value wins; within ``TIE_TOL`` the smaller support tuple wins."""
    if best is None:
        return True
    v, sup = cand[0], cand[1]
    bv, bsup = best[0], best[1]
    if math.isinf(v) or math.isinf(bv):
        if v != bv:
            return v > bv
        return sup < bsup
    if v > bv + TIE_TOL:
        return True
    if v < bv - TIE_TOL:
        return False
    return sup < bsup


def quantizer_exponent(problem: QuantizerProblem) -> QuantizerPlan:
    """Best sharing among supports of size at most two.

    Every quantizer with ``R_s <= R`` is tried alone, and every pair that can
    meet the budget is searched over its whole feasible weight segment:
    golden section for the concave small-distortion objective, the two
    segment ends for the convex excess-distortion objective.
    """
    rates = problem.rates
    R = problem.budget_R
    S = rates.size
    if not np.any(rates <= R + RATE_TOL):
        raise InfeasibleBudget(
            f"every quantizer rate exceeds the budget R={R:.12g} (min rate {rates.min():.12g})"
        )
    obj = _Objective(problem)
    best = None

    def consider(p):
        nonlocal best
        p = _snap(p)
        support = tuple(int(i) for i in np.flatnonzero(p))
        cand = (obj(p), support, p)
        if _better(cand, best):
            best = cand

    for s in range(S):
        if rates[s] <= R + RATE_TOL:
            p = np.zeros(S)
            p[s] = 1.0
            consider(p)

    def mix(s, t, w):
        p = np.zeros(S)
        p[s] = 1.0 - w
        p[t] = w
        return p

    floors = obj.floors()
    for s, t, lo, hi in _pair_candidates(rates, R):
        if obj.small:
            lo, hi = _reachable(floors[s], floors[t], obj.E, lo, hi)
            if lo > hi:
                continue
        ends = [lo, hi]
        if obj.small and hi - lo > 0:
            w, _ = _golden_max(lambda w: obj(mix(s, t, w)), lo, hi)
            ends.append(w)
        for w in ends:
            consider(mix(s, t, w))

    value, support, p = best
    if obj.small and value == -math.inf:
        raise OutOfRange(
            f"D={problem.level_D:.12g} is below the smallest distortion reachable within the budget"
        )
    _, beta = obj.solve(p)
    labels = [problem.quantizers[i].label for i in support]
    sharing = {problem.quantizers[i].label: float(p[i]) for i in support}
    value += 0.0
    return QuantizerPlan(
        exponent=value,
        sharing_p=sharing,
        support=labels,
        rate_used=float(p @ rates),
        beta_star=beta,
        rate_function=(0.0 - value) if obj.small else value,
        direction=problem.direction,
        support_index=support,
    )


@dataclass(frozen=True)
class ScanPoint:
    D: float
    support: Optional[list]
    exponent: Optional[float]
    beta_star: Optional[float]
    sharing_p: Optional[dict] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class PhaseScan:
    points: list
    transitions: list


def phase_transition_scan(
    problem: QuantizerProblem, D_grid: Sequence[float], workers: Optional[int] = None
) -> PhaseScan:
    """Optimal support along a sorted grid of distortion levels.

    Points are solved in parallel and reported in grid order.  Index ``i``
    is a transition when its support differs from that of the closest
    earlier point that solved successfully.
    """
    grid = [float(D) for D in D_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise OutOfRange("D_grid must be sorted in increasing order")

    def run(D: float) -> ScanPoint:
        try:
            plan = quantizer_exponent(replace(problem, level_D=D))
        except ChernoffError as exc:
            return ScanPoint(D, None, None, None, error=f"{type(exc).__name__}: {exc}")
        return ScanPoint(D, plan.support, plan.exponent, plan.beta_star, plan.sharing_p)

    workers = workers or default_workers()
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(run, grid))
    else:
        points = [run(D) for D in grid]

    transitions, last = [], None
    for i, pt in enumerate(points):
        if pt.support is None:
            continue
        if last is not None and pt.support != last:
            transitions.append(i)
        last = pt.support
    return PhaseScan(points, transitions)
