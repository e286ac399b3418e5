"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Reference values are either closed forms evaluated here or come from the
independent oracles in ``oracles.py``.  Six-decimal constants quoted in the
criteria are also compared with those references to one unit in their last
printed place, except the Chernoff information (see criterion 9).
"""

import math
import time

import numpy as np
import pytest

from chernoff_thermo import (
    energy_range,
    exact_probability,
    lhs_entropy,
    make_model,
    monte_carlo_probability,
    rate_function,
    solve_beta,
)
from chernoff_thermo.apps import (
    ChannelProblem,
    HighResProblem,
    Quantizer,
    QuantizerProblem,
    RdProblem,
    TempTestProblem,
    binary_hamming_rd,
    channel_exponent,
    detection_exponents,
    heat_capacity_integral,
    highres_distortion,
    highres_rate,
    mutual_information,
    phase_transition_scan,
    quantizer_exponent,
    quantizer_from_map,
    rate_distortion,
    temperature_test_exponents,
)
from chernoff_thermo.apps.channel import bsc
from chernoff_thermo.apps.quantizer import DIRECTIONS
from chernoff_thermo.apps.rd import theta1_closed_form
from chernoff_thermo.thermo import avg_heat_capacity, fisher_information

from conftest import random_model, record_criterion
from oracles import binary_entropy, entropy_grid, polish_optimum, quantizer_grid_optimum

LN2 = math.log(2.0)
LN3 = math.log(3.0)
PRINTED = 1e-6  # one unit in the sixth decimal of a quoted constant


def verdict(number, title, checks):
    """``checks`` maps a label to a bool; record and assert them together."""
    failed = [label for label, ok in checks.items() if not ok]
    detail = "all checks met" if not failed else "failed: " + "; ".join(failed)
    record_criterion(number, title, not failed, detail)
    assert not failed, detail


def test_criterion_01_identity_on_random_models():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        model = random_model(rng, max_v=4, max_u=5, f_max=3.0)
        er = energy_range(model)
        for frac in (1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6):
            E = er.e_min + frac * (er.e_mean - er.e_min)
            worst = max(worst, abs(lhs_entropy(model, E) - solve_beta(model, E).value))
    elapsed = time.perf_counter() - start
    verdict(
        1,
        "allocation maximum equals the 1-D solve on 100 random models",
        {
            f"worst gap {worst:.2e} <= 1e-6": worst <= 1e-6,
            f"runtime {elapsed:.1f}s < 60s": elapsed < 60.0,
        },
    )


def test_criterion_02_exact_oracle_converges():
    coin = make_model([1.0], [[0.5, 0.5]], [[0.0, 1.0]])
    rate = 0.25 * math.log(0.5) + 0.75 * math.log(1.5)
    start = time.perf_counter()
    errors = {}
    for n in (64, 128, 256, 512, 1024, 2048, 4096):
        errors[n] = abs(-exact_probability(coin, n, 0.25).log_prob / n - rate)
    elapsed = time.perf_counter() - start
    checks = {f"n={n} error {e:.2e} within 2ln(n)/n": e <= 2 * math.log(n) / n for n, e in errors.items()}
    checks[f"n=4096 error {errors[4096]:.2e} < 0.005"] = errors[4096] < 0.005
    checks[f"quoted I(E)=0.130812 vs {rate:.9f}"] = abs(0.130812 - rate) <= PRINTED
    checks[f"runtime {elapsed:.2f}s < 10s"] = elapsed < 10.0
    verdict(2, "exact convolution approaches I(0.25) for the fair coin", checks)


def test_criterion_03_monte_carlo_against_exact():
    coin = make_model([1.0], [[0.5, 0.5]], [[0.0, 1.0]])
    start = time.perf_counter()
    first = monte_carlo_probability(coin, 4, 0.25, 10**6, seed=42)
    elapsed = time.perf_counter() - start
    second = monte_carlo_probability(coin, 4, 0.25, 10**6, seed=42)
    target = math.log(5 / 16)
    lo, hi = first.ci95_log
    verdict(
        3,
        "Monte Carlo CI contains ln(5/16) and reruns are bit-identical",
        {
            f"CI [{lo:.5f}, {hi:.5f}] contains {target:.5f}": lo <= target <= hi,
            "rerun identical": (first.hits, first.log_prob, first.ci95_log)
            == (second.hits, second.log_prob, second.ci95_log),
            f"runtime {elapsed:.2f}s < 5s": elapsed < 5.0,
        },
    )


def test_criterion_04_binary_rate_distortion():
    exact_R = LN2 - binary_entropy(0.1)
    exact_T = 1.0 / math.log(9.0)
    res = binary_hamming_rd(0.1)
    worst = 0.0
    for D in np.arange(0.05, 0.451, 0.05):
        generic = rate_distortion(RdProblem([0.5, 0.5], [0.5, 0.5], [[0, 1], [1, 0]], D))
        worst = max(worst, abs(generic.R - binary_hamming_rd(D).R))
    verdict(
        4,
        "binary Hamming rate-distortion closed forms",
        {
            f"R(0.1) within 1e-9 of ln2 - h(0.1) ({abs(res.R - exact_R):.1e})": abs(res.R - exact_R) <= 1e-9,
            f"T(0.1) within 1e-9 of 1/ln 9 ({abs(res.temperature - exact_T):.1e})": abs(res.temperature - exact_T) <= 1e-9,
            "quoted 0.368064 and 0.455120 match": abs(0.368064 - exact_R) <= PRINTED and abs(0.455120 - exact_T) <= PRINTED,
            f"generic vs closed form {worst:.1e} <= 1e-10": worst <= 1e-10,
        },
    )


def test_criterion_05_channel_equilibrium():
    rng = np.random.default_rng(0)
    worst_beta = worst_value = 0.0
    for _ in range(50):
        nx, ny = rng.integers(1, 6), rng.integers(1, 6)
        q = rng.dirichlet(np.ones(nx))
        W = rng.dirichlet(np.ones(ny), size=nx)
        res = channel_exponent(ChannelProblem(q, W))
        worst_beta = max(worst_beta, abs(res.beta_star - 1.0))
        worst_value = max(worst_value, abs(res.value - mutual_information(q, W)))
    bsc_value = channel_exponent(ChannelProblem(np.array([0.5, 0.5]), bsc(0.1))).value
    exact = LN2 - binary_entropy(0.1)
    verdict(
        5,
        "matched channels solve at beta*=1 with value I(X;Y)",
        {
            f"worst |beta*-1| {worst_beta:.1e} <= 1e-8": worst_beta <= 1e-8,
            f"worst |value-I| {worst_value:.1e} <= 1e-9": worst_value <= 1e-9,
            f"BSC(0.1) within 1e-9 ({abs(bsc_value - exact):.1e})": abs(bsc_value - exact) <= 1e-9,
            "quoted 0.368064 matches": abs(0.368064 - exact) <= PRINTED,
        },
    )


def test_criterion_06_equipartition():
    ratios = {
        theta: highres_distortion(HighResProblem(theta, 1.0, ((0.0, 1.0),)), 100.0).equipartition_ratio
        for theta in (1.0, 2.0, 3.0)
    }
    quad = highres_distortion(HighResProblem(1.0, 1.0, ((0.0, 1.0),)), 2.0).D
    exact = 0.5 - 1.0 / (math.e**2 - 1.0)
    checks = {f"theta={t:g} ratio {r:.6f} in [0.99, 1.01]": 0.99 <= r <= 1.01 for t, r in ratios.items()}
    checks[f"theta=1 beta=2 quadrature vs closed form {abs(quad - exact):.1e} <= 1e-8"] = abs(quad - exact) <= 1e-8
    checks["closed form matches 0.343482"] = abs(theta1_closed_form(2.0, 1.0) - 0.343482) <= PRINTED
    verdict(6, "low-temperature equipartition and the exact theta=1 form", checks)


def test_criterion_07_high_resolution_rate():
    problem = HighResProblem(2.0, 1.0, ((0.0, 1.0),))
    R = highres_rate(problem, 0.005).R
    step = highres_rate(problem, 0.0025).R - R
    verdict(
        7,
        "high-resolution rate and its half-log-2 slope",
        {
            f"R={R:.9f} within 1e-6 of 1.923367": abs(R - 1.923367) <= 1e-6,
            f"halving D adds {step:.12f}, within 1e-9 of ln2/2": abs(step - 0.5 * LN2) <= 1e-9,
        },
    )


def test_criterion_08_temperature_test():
    problem = TempTestProblem([1.0], [[0.0, 1.0]], LN3, 0.0, 0.375)
    res = temperature_test_exponents(problem)
    I2 = binary_entropy(0.5) - binary_entropy(0.375)
    I1 = binary_entropy(0.25) - binary_entropy(0.375) + 0.125 * LN3
    hc2 = heat_capacity_integral(problem, "I2")
    hc1 = heat_capacity_integral(problem, "I1")
    edge = temperature_test_exponents(TempTestProblem([1.0], [[0.0, 1.0]], LN3, 0.0, 0.5)).I1
    kl = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)
    model = problem.to_model()
    fisher_gap = max(
        abs(fisher_information(model, b) - avg_heat_capacity(model, 1.0 / b) / b**2)
        for b in (0.1, 0.5, LN3, 2.0, 5.0)
    )
    verdict(
        8,
        "two-level temperature test exponents",
        {
            f"I2 within 1e-9 of h(1/2)-h(3/8) ({abs(res.I2 - I2):.1e})": abs(res.I2 - I2) <= 1e-9,
            f"I1 within 1e-9 of closed form ({abs(res.I1 - I1):.1e})": abs(res.I1 - I1) <= 1e-9,
            "quoted 0.031584 and 0.038099 match": abs(0.031584 - I2) <= PRINTED and abs(0.038099 - I1) <= PRINTED,
            f"heat-capacity I2 gap {abs(hc2 - I2):.1e} <= 1e-4": abs(hc2 - I2) <= 1e-4,
            f"heat-capacity I1 gap {abs(hc1 - I1):.1e} <= 1e-4": abs(hc1 - I1) <= 1e-4,
            f"boundary I1 within 1e-9 of D(P2||P1) ({abs(edge - kl):.1e})": abs(edge - kl) <= 1e-9,
            "quoted 0.143841 matches": abs(0.143841 - kl) <= PRINTED,
            f"J = kT^2 C gap {fisher_gap:.1e} <= 1e-10": fisher_gap <= 1e-10,
        },
    )


def test_criterion_09_chernoff_information():
    res = detection_exponents([1.0], [0.5, 0.5], [[0.9, 0.1]], 0.0)
    # beta-grid oracle on ln(0.5 * 1.8^b + 0.5 * 0.2^b), written as a model
    # with f = ln(noise / signal) under the noise law
    f = np.log(np.array([[0.5 / 0.9, 0.5 / 0.1]]))
    value, beta = entropy_grid(np.ones(1), np.log(np.array([[0.5, 0.5]])), f, 0.0, beta_max=5.0, step=1e-4)
    oracle = -value
    # The quoted 0.112385 is not compared: the exact minimum is 0.1123774...,
    # which both this oracle and a bounded scalar minimization reproduce.
    gap = abs(res.false_alarm_exp - oracle)
    verdict(
        9,
        "false-alarm exponent at zero threshold is the Chernoff information",
        {
            f"exponent {res.false_alarm_exp:.9f} within 1e-6 of grid oracle {oracle:.9f}": gap <= 1e-6,
            f"tilt {res.beta_false_alarm:.5f} matches 0.45843": abs(res.beta_false_alarm - 0.45843) <= 1e-5,
        },
    )


def _random_instances(seed=0, count=30):
    """The pre-committed S = 3 family: |X| = 4, Dirichlet source, d ~ U[0, 3],
    rates ~ U[0, ln 4], R between the smallest and largest rate, and D drawn
    from the admissible band of each direction."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        q = rng.dirichlet(np.ones(4))
        d = rng.uniform(0, 3, (3, 4))
        rates = rng.uniform(0, math.log(4), 3)
        R = rng.uniform(rates.min(), rates.max())
        means, floors = d @ q, d.min(axis=1)
        ok = rates <= R
        for direction in DIRECTIONS:
            if direction == "small-distortion":
                D = rng.uniform(floors[ok].min(), means.max())
            else:
                D = rng.uniform(means.min(), d.max(axis=1)[ok].max())
            yield q, d, rates, R, D, direction


def test_criterion_10_quantizer_support():
    value_gaps, support_gaps = [], []
    for q, d, rates, R, D, direction in _random_instances():
        quants = tuple(Quantizer(f"F{i}", d[i], rates[i]) for i in range(3))
        plan = quantizer_exponent(QuantizerProblem(q, quants, R, D, direction))
        grid_best, p, best_two = quantizer_grid_optimum(q, d, rates, R, D, direction, step=1e-3)
        polished, _ = polish_optimum(q, d, rates, R, D, direction, p, step=1e-3)
        value_gaps.append(0.0 if plan.exponent == polished else abs(plan.exponent - polished))
        support_gaps.append(0.0 if grid_best == best_two else grid_best - best_two)

    f1 = quantizer_from_map("F1", [0, 1, 2, 3], [1.5] * 4, 0.0)
    f2 = quantizer_from_map("F2", [0, 1, 2, 3], [0.5, 0.5, 2.5, 2.5], LN2)
    problem = QuantizerProblem(np.full(4, 0.25), (f1, f2), 0.5 * LN2, 0.5)
    grid = np.round(np.arange(0.30, 0.701, 0.05), 2)
    scans = [phase_transition_scan(problem, grid, workers=w) for w in (1, 1, 2, 4, 8)]
    verdict(
        10,
        "time-sharing search on 30 random three-quantizer instances",
        {
            f"worst plan vs grid gap {max(value_gaps):.1e} <= 1e-5": max(value_gaps) <= 1e-5,
            f"grid optimum reached with <= 2 quantizers (worst excess {max(support_gaps):.1e})": max(support_gaps) <= 1e-9,
            "scan identical across runs and thread counts": all(s == scans[0] for s in scans),
        },
    )
