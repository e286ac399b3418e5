"""Large-deviations layer: rate function, exact finite-n oracle, Monte Carlo.

The event of interest is ``sum_i f(U_i, v_i) <= n E`` where ``v^n`` contains
``n_v = n p(v)`` copies of each subsystem and ``U_i ~ q(.|v_i)`` independently.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BinBudgetExceeded, RoundingError
from .model import WeightedModel, energy_range
from .thermo import EDGE_TOL, SearchControl, lhs_entropy, solve_beta

MAX_BINS = 10**8
# snapping slack when values sit on the quantization lattice
LATTICE_TOL = 1e-9
Z95 = 1.959963984540054


@dataclass(frozen=True)
class RateResult:
    energy: float
    rate: float
    regime: str  # "zero" | "interior" | "boundary" | "infeasible"


@dataclass(frozen=True)
class ProbabilityEstimate:
    n: int
    log_prob: float
    method: str
    log_prob_upper: Optional[float] = None
    trials: Optional[int] = None
    hits: Optional[int] = None
    ci95_log: Optional[tuple] = None
    seed: Optional[int] = None
    bin_width: Optional[float] = None


def rate_function(model: WeightedModel, E: float) -> RateResult:
    """``I(E) = -S_bar(E)`` with the regime of ``E`` relative to the range."""
    rng = energy_range(model)
    tol = EDGE_TOL * max(1.0, abs(rng.e_min), abs(rng.e_mean))
    if E >= rng.e_mean - tol * 1e-2:
        return RateResult(E, 0.0, "zero")
    if E < rng.e_min - tol:
        return RateResult(E, math.inf, "infeasible")
    sol = solve_beta(model, E)
    regime = "boundary" if E <= rng.e_min + tol else "interior"
    return RateResult(E, max(-sol.value, 0.0), regime)


def composition(model: WeightedModel, n: int) -> np.ndarray:
    """Subsystem counts ``n_v = n p(v)``; raises if any is not integral."""
    if n < 1:
        raise RoundingError(f"n must be positive, got {n}")
    raw = n * model.p
    counts = np.rint(raw)
    bad = np.abs(raw - counts) > 1e-9
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RoundingError(
            f"n*p(v) = {raw[i]:.12g} is not an integer for v={model.v_alphabet[i]}"
        )
    return counts.astype(np.int64)


def smallest_integral_n(model: WeightedModel, max_n: int = 10**6) -> int:
    """Smallest ``n`` making every ``n p(v)`` integral (within 1e-9)."""
    for n in range(1, max_n + 1):
        raw = n * model.p
        if np.all(np.abs(raw - np.rint(raw)) <= 1e-9):
            return n
    raise RoundingError(f"no n <= {max_n} makes every n*p(v) integral")


# ---------------------------------------------------------------------------
# exact oracle: log-domain convolution on a lattice


def log_convolve(a: np.ndarray, b: np.ndarray, block: int = 1 << 22) -> np.ndarray:
    """Log-domain linear convolution: ``out[k] = log sum_j exp(a[j] + b[k-j])``.

    Every output bin is reduced with its own max shift, so deep tails keep
    full relative precision instead of underflowing against the bulk.
    """
    if len(a) > len(b):
        a, b = b, a
    la, lb = len(a), len(b)
    pad = np.full(la - 1, -np.inf)
    bpad = np.concatenate([pad, b, pad])
    windows = np.lib.stride_tricks.sliding_window_view(bpad, la)
    arev = a[::-1]
    out = np.empty(la + lb - 1)
    rows = max(1, block // la)
    with np.errstate(invalid="ignore", divide="ignore"):
        for s in range(0, len(out), rows):
            blk = windows[s : s + rows] + arev
            mx = blk.max(axis=1)
            safe = np.where(np.isfinite(mx), mx, 0.0)
            out[s : s + rows] = np.log(np.exp(blk - safe[:, None]).sum(axis=1)) + safe
    return out


def _log_power(a: np.ndarray, n: int) -> np.ndarray:
    """``n``-fold self-convolution by repeated squaring."""
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else log_convolve(result, base)
        n >>= 1
        if n:
            base = log_convolve(base, base)
    return result


def _lattice_pmf(logq_row, f_row, delta, rounding):
    k = f_row / delta
    if rounding == "floor":
        k = np.floor(k + LATTICE_TOL)
    else:
        k = np.ceil(k - LATTICE_TOL)
    k = k.astype(np.int64)
    keep = np.isfinite(logq_row)
    k, lq = k[keep], logq_row[keep]
    kmin = int(k.min())
    pmf = np.full(int(k.max()) - kmin + 1, -np.inf)
    for kk, l in zip(k, lq):
        pmf[kk - kmin] = np.logaddexp(pmf[kk - kmin], l)
    return kmin, pmf


def _log_tail(model, counts, delta, E, rounding) -> float:
    n = int(counts.sum())
    threshold = math.floor(n * E / delta + LATTICE_TOL)
    total, offset = None, 0
    for i, nv in enumerate(counts):
        if nv == 0:
            continue
        kmin, pmf = _lattice_pmf(model.logq[i], model.f[i], delta, rounding)
        dist = _log_power(pmf, int(nv))
        offset += kmin * int(nv)
        total = dist if total is None else log_convolve(total, dist)
    cut = threshold - offset
    if cut < 0:
        return -math.inf
    if cut >= len(total) - 1:
        return 0.0
    tail = total[: cut + 1]
    mx = tail.max()
    if not np.isfinite(mx):
        return -math.inf
    return min(0.0, float(mx + np.log(np.exp(tail - mx).sum())))


def exact_probability(
    model: WeightedModel, n: int, E: float, bin_width: Optional[float] = None
) -> ProbabilityEstimate:
    """Two-sided bounds on ``ln Pr{sum_i f(U_i, v_i) <= n E}``.

    Energies are snapped to a lattice of spacing ``bin_width``: rounding every
    value up can only shrink the event (lower bound), rounding down can only
    grow it (upper bound).  When all energies lie on the lattice the two
    coincide and the result is exact.  ``bin_width`` defaults to 1 for
    integer-valued energies and 1e-3 otherwise.
    """
    counts = composition(model, n)
    if bin_width is None:
        integral = np.all(np.abs(model.f - np.rint(model.f)) <= LATTICE_TOL)
        bin_width = 1.0 if integral else 1e-3
    if not bin_width > 0:
        raise BinBudgetExceeded(f"bin width must be positive, got {bin_width}")
    span = float(np.ptp(model.f)) if model.f.size else 0.0
    bins = n * span / bin_width
    if bins > MAX_BINS:
        raise BinBudgetExceeded(
            f"n*span/delta = {bins:.3g} bins exceeds the budget of {MAX_BINS:.0e}"
        )
    if E >= float(model.f.max()):
        return ProbabilityEstimate(n, 0.0, "exact-dp", 0.0, bin_width=bin_width)
    lower = _log_tail(model, counts, bin_width, E, "ceil")
    upper = _log_tail(model, counts, bin_width, E, "floor")
    return ProbabilityEstimate(n, lower, "exact-dp", upper, bin_width=bin_width)


# ---------------------------------------------------------------------------
# Monte Carlo with a counter-based generator


def default_workers() -> int:
    env = os.environ.get("CHERNOFF_THERMO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _count_hits(model, positions, n, threshold, seed, start, stop) -> int:
    """Hits among trials ``start..stop-1``; trial ``t`` reads Philox blocks
    ``t*B .. (t+1)*B - 1`` of the stream keyed by ``seed``."""
    blocks = (n + 3) // 4
    bg = np.random.Philox(key=seed)
    bg.advance(start * blocks)
    words = bg.random_raw((stop - start) * blocks * 4).reshape(stop - start, blocks * 4)
    u = (words[:, :n] >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    total = np.zeros(stop - start)
    col = 0
    for i, nv in positions:
        cum = np.cumsum(model.q[i])
        cum[-1] = np.inf
        idx = np.searchsorted(cum, u[:, col : col + nv], side="right")
        total += model.f[i][idx].sum(axis=1)
        col += nv
    return int(np.count_nonzero(total <= threshold))


def monte_carlo_probability(
    model: WeightedModel,
    n: int,
    E: float,
    trials: int,
    seed: int,
    workers: Optional[int] = None,
    chunk: int = 1 << 16,
) -> ProbabilityEstimate:
    """Empirical ``ln Pr{sum f <= n E}`` with a normal-approximation 95% CI.

    Trial ``t`` always consumes the same slice of the counter-based stream,
    so the estimate does not depend on ``workers`` or ``chunk``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    counts = composition(model, n)
    positions = [(i, int(c)) for i, c in enumerate(counts) if c > 0]
    threshold = n * E + LATTICE_TOL * max(1.0, abs(n * E))
    workers = workers or default_workers()
    chunk = max(1, min(chunk, max(1, (1 << 22) // max(n, 1))))
    spans = [(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]
    args = (model, positions, n, threshold, seed)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(lambda sp: _count_hits(*args, *sp), spans))
    else:
        hits = sum(_count_hits(*args, *sp) for sp in spans)

    if hits == 0:
        return ProbabilityEstimate(
            n, -math.inf, "monte-carlo", trials=trials, hits=0,
            ci95_log=(-math.inf, math.log(3.0 / trials)), seed=seed,
        )
    phat = hits / trials
    se = math.sqrt(phat * (1.0 - phat) / trials)
    lo = phat - Z95 * se
    hi = min(1.0, phat + Z95 * se)
    ci = (math.log(lo) if lo > 0 else -math.inf, math.log(hi))
    return ProbabilityEstimate(
        n, math.log(phat), "monte-carlo", trials=trials, hits=hits, ci95_log=ci, seed=seed
    )


@dataclass(frozen=True)
class DualRateCheck:
    per_symbol_rate: float
    block_rate: float
    gap: float


def dual_rate_check(
    model: WeightedModel, E: float, search: Optional[SearchControl] = None
) -> DualRateCheck:
    """Rate by per-symbol allocation versus the single-block Chernoff bound.

    The block route with period ``l`` collapses analytically to the aggregate
    solve, so no block is ever materialized.
    """
    per_symbol = -lhs_entropy(model, E, search)
    block = -solve_beta(model, E).value
    # adding 0.0 turns -0.0 into 0.0
    per_symbol += 0.0
    block += 0.0
    return DualRateCheck(per_symbol, block, abs(per_symbol - block))
