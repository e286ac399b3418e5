"""Partition functions, the inverse-temperature solve and entropy functions.

For each subsystem ``v`` the weighted partition function is

    Z_v(beta) = sum_u q(u|v) exp(-beta * eps0 * f(u, v)),

and the per-subsystem and aggregate entropies are the Legendre-type minima

    S_v(E_v) = min_{beta >= 0} [beta * eps0 * E_v + ln Z_v(beta)]
    S_bar(E) = min_{beta >= 0} [beta * eps0 * E + sum_v p(v) ln Z_v(beta)].

``solve_beta`` finds the single inverse temperature of the aggregate problem.
``lhs_entropy`` maximizes ``sum_v p(v) S_v(E_v)`` over energy allocations
without ever sharing a temperature between subsystems, so comparing the two
(``verify_identity``) is a non-circular check of the equilibrium identity.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MissingCounts, NonConvergence, OutOfRange, SearchBudgetExceeded
from .model import WeightedModel, energy_range

BETA_REL_TOL = 1e-12
RESIDUAL_TOL = 1e-10
MAX_ITER = 200
BETA_CAP = 1e6
# relative slack used when deciding that an energy sits exactly on an endpoint
EDGE_TOL = 1e-12

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ThermoSolution:
    """Result of a one-dimensional inverse-temperature solve.

    ``status`` is ``"interior"`` for a regular root, ``"mean"`` when the energy
    sits at (or, for the extended solve, above) the untilted mean, ``"ground"``
    at the ground-state boundary and ``"unreachable"`` when the energy lies
    below every state of positive probability (``value`` is then ``-inf``).
    """

    beta_star: float
    value: float
    allocation: Optional[dict] = None
    iterations: int = 0
    residual: float = 0.0
    status: str = "interior"


@dataclass(frozen=True)
class AllocationBox:
    """Per-subsystem energy bounds and the aggregate budget ``E``."""

    bounds: dict
    budget: float

    def contains(self, energies: dict, p: dict, tol: float = 1e-12) -> bool:
        total = 0.0
        for v, (lo, hi) in self.bounds.items():
            e = energies[v]
            if e < lo - tol or e > hi + tol:
                return False
            total += p[v] * e
        return total <= self.budget + tol


@dataclass(frozen=True)
class SearchControl:
    """Knobs for the allocation search in :func:`lhs_entropy`."""

    grid_points: int = 200
    max_grid_size: int = 10**7
    min_rounds: int = 3
    max_rounds: int = 400
    table_points: int = 401


# ---------------------------------------------------------------------------
# array-level primitives shared with the application calculators


def tilt_stats(logq: np.ndarray, f: np.ndarray, eps0: float, beta: float):
    """Return ``(ln Z, mean f, variance of eps0*f)`` row-wise at ``beta``."""
    a = logq - (beta * eps0) * f
    mx = np.max(a, axis=-1, keepdims=True)
    w = np.exp(a - mx)
    s = w.sum(axis=-1)
    lnz = np.log(s) + mx[..., 0]
    t = w / s[..., None]
    mean = (t * f).sum(axis=-1)
    var = (eps0 * eps0) * (t * (f - mean[..., None]) ** 2).sum(axis=-1)
    return lnz, mean, var


def _support_floor(logq: np.ndarray, f: np.ndarray):
    """Row-wise minimum energy over states of positive probability and the
    log of the probability mass sitting at that minimum."""
    masked = np.where(np.isfinite(logq), f, np.inf)
    fmin = masked.min(axis=-1)
    tol = EDGE_TOL * np.maximum(1.0, np.abs(fmin))
    at_min = np.isfinite(logq) & (f <= (fmin + tol)[..., None])
    with np.errstate(divide="ignore"):
        lnmass = np.log(np.where(at_min, np.exp(logq), 0.0).sum(axis=-1))
    return fmin, lnmass


def solve_dual(
    p: np.ndarray,
    logq: np.ndarray,
    f: np.ndarray,
    eps0: float,
    E: float,
    e_min: Optional[float] = None,
    e_mean: Optional[float] = None,
    strict: bool = True,
) -> ThermoSolution:
    """Minimize ``beta*eps0*E + sum_v p_v ln Z_v(beta)`` over ``beta >= 0``.

    With ``strict`` the energy must lie in ``[e_min, e_mean]``; otherwise an
    energy above the mean returns ``beta = 0`` and value 0, and one below the
    nominal minimum returns ``-inf``.
    """
    p = np.asarray(p, dtype=float)
    active = p > 0
    p, logq, f = p[active], logq[active], f[active]
    if e_min is None:
        e_min = float(p @ f.min(axis=1))
    if e_mean is None:
        e_mean = float(p @ (np.exp(logq) * f).sum(axis=1))
    scale = max(1.0, abs(e_min), abs(e_mean))
    tol = EDGE_TOL * scale

    if E > e_mean + tol:
        if strict:
            raise OutOfRange(f"E={E:.12g} is above the mean energy {e_mean:.12g}")
        return ThermoSolution(0.0, 0.0, status="mean")
    if E >= e_mean - tol * 1e-2:
        return ThermoSolution(0.0, 0.0, status="mean")
    if E < e_min - tol:
        if strict:
            raise OutOfRange(f"E={E:.12g} is below the minimum energy {e_min:.12g}")
        return ThermoSolution(BETA_CAP / eps0, -math.inf, status="unreachable")

    fmin, lnmass = _support_floor(logq, f)
    e_floor = float(p @ fmin)
    if E < e_floor - tol:
        return ThermoSolution(BETA_CAP / eps0, -math.inf, status="unreachable")
    if E <= e_floor + tol:
        return ThermoSolution(BETA_CAP / eps0, float(p @ lnmass), status="ground")

    def agg_mean(beta):
        _, m, _ = tilt_stats(logq, f, eps0, beta)
        return float(p @ m)

    cap = BETA_CAP / eps0
    it = 0
    lo, hi = 0.0, min(1.0, cap)
    while agg_mean(hi) >= E and hi < cap:
        lo = hi
        hi = min(2.0 * hi, cap)
        it += 1
    if agg_mean(hi) >= E:
        beta = hi
    else:
        for _ in range(MAX_ITER):
            it += 1
            mid = 0.5 * (lo + hi)
            if agg_mean(mid) > E:
                lo = mid
            else:
                hi = mid
            if hi - lo <= BETA_REL_TOL * hi:
                break
        beta = 0.5 * (lo + hi)
    lnz, m, _ = tilt_stats(logq, f, eps0, beta)
    residual = abs(float(p @ m) - E)
    if residual > RESIDUAL_TOL * scale:
        raise NonConvergence(
            f"beta solve stopped at beta={beta:.6g} with residual {residual:.3g}"
        )
    value = beta * eps0 * E + float(p @ lnz)
    return ThermoSolution(beta, value, iterations=it, residual=residual)


# ---------------------------------------------------------------------------
# per-subsystem quantities


def _row(model: WeightedModel, v):
    i = model.v_index(v)
    return model.logq[i], model.f[i]


def log_partition(model: WeightedModel, v, beta: float) -> float:
    logq, f = _row(model, v)
    lnz, _, _ = tilt_stats(logq, f, model.epsilon0, beta)
    return float(lnz)


def mean_energy(model: WeightedModel, v, beta: float) -> float:
    """Tilted mean of ``f(., v)``, i.e. ``-d ln Z_v / d beta`` in units of eps0."""
    logq, f = _row(model, v)
    _, m, _ = tilt_stats(logq, f, model.epsilon0, beta)
    return float(m)


def energy_variance(model: WeightedModel, v, beta: float) -> float:
    """``d^2 ln Z_v / d beta^2``: the tilted variance of ``eps0 * f(., v)``."""
    logq, f = _row(model, v)
    _, _, var = tilt_stats(logq, f, model.epsilon0, beta)
    return float(var)


def solve_beta(model: WeightedModel, E: float) -> ThermoSolution:
    """Aggregate inverse temperature and ``S_bar(E)`` by bisection."""
    rng = energy_range(model)
    return solve_dual(
        model.p, model.logq, model.f, model.epsilon0, E, rng.e_min, rng.e_mean
    )


def entropy_sv(model: WeightedModel, v, E_v: float) -> ThermoSolution:
    i = model.v_index(v)
    lo, hi = energy_range(model).per_v[model.v_alphabet[i]]
    return solve_dual(
        np.ones(1), model.logq[i : i + 1], model.f[i : i + 1], model.epsilon0, E_v, lo, hi
    )


def equilibrium_allocation(model: WeightedModel, E: float) -> ThermoSolution:
    """Energies ``E_v*`` that all share the aggregate inverse temperature."""
    sol = solve_beta(model, E)
    rng = energy_range(model)
    if sol.status == "ground":
        fmin, _ = _support_floor(model.logq, model.f)
        energies = fmin
    else:
        _, energies, _ = tilt_stats(model.logq, model.f, model.epsilon0, sol.beta_star)
    alloc = {}
    for v, e in zip(model.v_alphabet, energies):
        lo, hi = rng.per_v[v]
        alloc[v] = float(min(max(e, lo), hi))
    return ThermoSolution(
        sol.beta_star, sol.value, alloc, sol.iterations, sol.residual, sol.status
    )


def allocation_box(model: WeightedModel, E: float) -> AllocationBox:
    return AllocationBox(bounds=dict(energy_range(model).per_v), budget=float(E))


# ---------------------------------------------------------------------------
# left-hand side of the identity: search over allocations


class _Subsystem:
    """Scalar ``S_v`` for one subsystem, extended by 0 above its mean.

    Pure-Python Newton with a bisection safeguard; keeps the last root as a
    warm start since the allocation search queries nearby energies.
    """

    def __init__(self, q_row, f_row, eps0):
        keep = q_row > 0
        self.lq = [math.log(x) for x in q_row[keep]]
        self.f = [float(x) for x in f_row[keep]]
        self.eps0 = eps0
        self.lo = float(f_row.min())
        self.mean = max(float((q_row * f_row).sum()), self.lo)
        self.floor = min(self.f)
        self.scale = max(1.0, abs(self.lo), abs(self.mean))
        tol = EDGE_TOL * max(1.0, abs(self.floor))
        self.ln_floor_mass = math.log(
            sum(math.exp(l) for l, e in zip(self.lq, self.f) if e <= self.floor + tol)
        )
        self.constant = max(self.f) - self.floor <= tol
        self._beta = 1.0

    def _stats(self, beta):
        be = beta * self.eps0
        a = [l - be * (e - self.floor) for l, e in zip(self.lq, self.f)]
        mx = max(a)
        w = [math.exp(x - mx) for x in a]
        s = sum(w)
        m = sum(wi * e for wi, e in zip(w, self.f)) / s
        var = sum(wi * (e - m) ** 2 for wi, e in zip(w, self.f)) / s
        lnz = math.log(s) + mx - be * self.floor
        return lnz, m, var * self.eps0 * self.eps0

    def value(self, E: float) -> float:
        tol = EDGE_TOL * self.scale
        if E >= self.mean - tol * 1e-2:
            return 0.0
        if E < self.floor - tol:
            return -math.inf
        if E <= self.floor + tol or self.constant:
            return self.ln_floor_mass
        lo, hi = 0.0, math.inf
        beta = self._beta
        lnz, m, var = self._stats(beta)
        for _ in range(MAX_ITER):
            r = m - E
            if r > 0:
                lo = beta
            else:
                hi = beta
            if abs(r) <= 1e-15 * self.scale:
                break
            nxt = beta + r * self.eps0 / var if var > 0 else math.nan
            if not (lo < nxt < hi):
                nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * beta + 1.0
            if math.isfinite(hi) and hi - lo <= 1e-15 * hi:
                break
            beta = nxt
            lnz, m, var = self._stats(beta)
        self._beta = beta
        return beta * self.eps0 * E + lnz


def _golden_max(h, a: float, b: float, tol: float):
    """Maximize a unimodal ``h`` on ``[a, b]``; returns ``(x, h(x))``."""
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


def lhs_entropy(
    model: WeightedModel, E: float, search: Optional[SearchControl] = None
) -> float:
    """``max sum_v p(v) S_v(E_v)`` over allocations with ``sum_v p(v) E_v <= E``.

    A dense grid over the allocation box seeds pairwise budget-exchange
    refinement by golden-section search.  Only per-subsystem entropies are
    used; no common temperature is ever computed.
    """
    search = search or SearchControl()
    rng = energy_range(model)
    scale = max(1.0, abs(rng.e_min), abs(rng.e_mean))
    if E < rng.e_min - EDGE_TOL * scale:
        raise OutOfRange(f"E={E:.12g} is below the minimum energy {rng.e_min:.12g}")
    active = [i for i in range(model.n_v) if model.p[i] > 0]
    subs = [_Subsystem(model.q[i], model.f[i], model.epsilon0) for i in active]
    p = np.array([model.p[i] for i in active])
    if E >= rng.e_mean:
        return 0.0
    if len(active) == 1:
        return float(subs[0].value(E))

    lo = np.array([s.lo for s in subs])
    hi = np.array([s.mean for s in subs])
    x = _grid_start(subs, p, lo, hi, E, search)
    return _refine(subs, p, lo, hi, x, E, scale, search)


def _objective(subs, p, x) -> float:
    return float(sum(pi * s.value(xi / pi) for s, pi, xi in zip(subs, p, x)))


def _grid_start(subs, p, lo, hi, E, search: SearchControl) -> np.ndarray:
    n = len(subs)
    last = int(np.argmax(p))
    free = [i for i in range(n) if i != last]
    g = search.grid_points
    if g ** len(free) > search.max_grid_size:
        raise SearchBudgetExceeded(
            f"{g}^{len(free)} grid points exceed the budget {search.max_grid_size}"
        )

    grids, vals = [], []
    for i in free:
        e = np.linspace(lo[i], hi[i], g)
        grids.append(p[i] * e)
        vals.append(p[i] * np.array([subs[i].value(x) for x in e]))
    # S_last on a table, linear interpolation: concave so this under-estimates
    t_e = np.linspace(lo[last], hi[last], search.table_points)
    t_s = np.array([subs[last].value(x) for x in t_e])

    def last_value(budget):
        e_last = np.minimum(budget / p[last], hi[last])
        out = p[last] * np.interp(e_last, t_e, t_s)
        return np.where(e_last >= lo[last] - 1e-12, out, -np.inf)

    base_x = np.zeros(1)
    base_v = np.zeros(1)
    for gx, gv in zip(grids[:-1], vals[:-1]):
        base_x = np.add.outer(base_x, gx).ravel()
        base_v = np.add.outer(base_v, gv).ravel()
    # rows that leave the last subsystem below its floor for every k are dropped
    keep = np.nonzero(E - base_x - grids[-1][0] >= p[last] * lo[last] - 1e-12)[0]
    base_x, base_v = base_x[keep], base_v[keep]
    best, best_idx = -np.inf, None
    with np.errstate(invalid="ignore"):
        for k in range(g):
            tot = base_v + vals[-1][k] + last_value(E - base_x - grids[-1][k])
            if tot.size == 0:
                break
            j = int(np.argmax(tot))
            if tot[j] > best:
                best, best_idx = tot[j], (int(keep[j]), k)

    # proportional allocation is always feasible
    lam = (E - float(p @ lo)) / float(p @ (hi - lo))
    candidates = [p * (lo + lam * (hi - lo))]
    if best_idx is not None:
        j, k = best_idx
        idx = list(np.unravel_index(j, (g,) * (len(free) - 1))) if len(free) > 1 else []
        idx.append(k)
        x = np.zeros(n)
        for i, gi, pos in zip(free, grids, idx):
            x[i] = gi[pos]
        x[last] = E - x[free].sum()
        candidates.append(_repair(x, p * lo, p * hi, E))
    return max(candidates, key=lambda c: _objective(subs, p, c))


def _repair(x, xlo, xhi, E):
    """Clip into the box and hand any surplus budget to coordinates below
    their upper bound (entropies are non-decreasing, so this never hurts)."""
    x = np.clip(x, xlo, xhi)
    surplus = E - x.sum()
    for i in range(len(x)):
        if surplus <= 0:
            break
        add = min(surplus, xhi[i] - x[i])
        x[i] += add
        surplus -= add
    return x


def _refine(subs, p, lo, hi, x, E, scale, search: SearchControl) -> float:
    n = len(subs)
    xlo, xhi = p * lo, p * hi
    pairs = list(itertools.combinations(range(n), 2))
    width = {pr: max(float(np.max(xhi - xlo)) / max(search.grid_points - 1, 1), 1e-9)
             for pr in pairs}
    # value error is quadratic in the location error
    tol = 1e-9 * scale
    current = _objective(subs, p, x)
    for rnd in range(search.max_rounds):
        start = current
        biggest = 0.0
        for i, j in pairs:
            a = max(xlo[i] - x[i], x[j] - xhi[j], -width[(i, j)])
            b = min(xhi[i] - x[i], x[j] - xlo[j], width[(i, j)])
            if b - a <= tol:
                continue
            si, sj, pi, pj, xi, xj = subs[i], subs[j], p[i], p[j], x[i], x[j]

            def h(t):
                return pi * si.value((xi + t) / pi) + pj * sj.value((xj - t) / pj)

            base = h(0.0)
            t, ht = _golden_max(h, a, b, tol)
            w = width[(i, j)]
            if ht > base:
                x[i] += t
                x[j] -= t
                biggest = max(biggest, abs(t))
                width[(i, j)] = 4.0 * w if abs(t) > 0.9 * w else max(4.0 * abs(t), 1e-11)
            else:
                width[(i, j)] = max(0.5 * w, 1e-11)
        current = _objective(subs, p, x)
        if rnd + 1 >= search.min_rounds and current - start <= 1e-15 and biggest <= 1e-8:
            break
    return current


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    gap: float
    passed: bool
    ordered: bool = True
    tolerance: float = 1e-6
    extra: dict = field(default_factory=dict)


def verify_identity(
    model: WeightedModel,
    E: float,
    tolerance: float = 1e-6,
    search: Optional[SearchControl] = None,
) -> IdentityCheck:
    """Compare the allocation maximum with the single-temperature minimum."""
    lhs = lhs_entropy(model, E, search)
    rhs = solve_beta(model, E).value
    if math.isinf(lhs) and math.isinf(rhs) and lhs == rhs:
        gap = 0.0
    else:
        gap = abs(lhs - rhs)
    ordered = lhs <= rhs + 1e-12
    return IdentityCheck(lhs, rhs, gap, bool(gap <= tolerance and ordered), ordered, tolerance)


@dataclass(frozen=True)
class SigmaBar:
    sigma_bar: float
    s_bar: float
    log_m: float
    rate: float


def sigma_bar(model: WeightedModel, E: float) -> SigmaBar:
    """Ordinary-partition-function entropy ``S_bar(E) + ln M``."""
    if model.counts is None:
        raise MissingCounts("sigma_bar needs weight_counts attached to the model")
    s = solve_beta(model, E).value
    log_m = model.counts.log_total
    sig = s + log_m
    rate = log_m - sig
    assert rate >= -1e-12, rate
    return SigmaBar(sig, s, log_m, max(rate, 0.0))


def heat_capacity(model: WeightedModel, v, T: float) -> float:
    """``C_v(T) = (1/(k T^2)) d^2 ln Z_v / d beta^2`` at ``beta = 1/(k T)``."""
    if not T > 0:
        raise OutOfRange(f"temperature must be positive, got {T}")
    k = model.k_boltzmann
    return energy_variance(model, v, 1.0 / (k * T)) / (k * T * T)


def avg_heat_capacity(model: WeightedModel, T: float) -> float:
    if not T > 0:
        raise OutOfRange(f"temperature must be positive, got {T}")
    k = model.k_boltzmann
    _, _, var = tilt_stats(model.logq, model.f, model.epsilon0, 1.0 / (k * T))
    return float(model.p @ var) / (k * T * T)


def fisher_information(model: WeightedModel, beta: float) -> float:
    """``J(beta) = sum_v p(v) d^2 ln Z_v / d beta^2``.

    The constant ``M`` relating weighted and ordinary partition functions
    drops out of the second derivative, so the weighted form is used.
    """
    _, _, var = tilt_stats(model.logq, model.f, model.epsilon0, beta)
    return float(model.p @ var)
