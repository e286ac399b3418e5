import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chernoff_thermo.apps import (
    TempTestProblem,
    detection_exponents,
    heat_capacity_integral,
    temperature_test_exponents,
)
from chernoff_thermo.apps.detection import (
    detection_problem_from_dict,
    ordinary_entropy,
    temp_test_problem_from_dict,
)
from chernoff_thermo.errors import InvalidModel, OutOfRange
from chernoff_thermo.thermo import avg_heat_capacity, fisher_information

from oracles import binary_entropy

LN3 = math.log(3.0)
# frozen from a bounded scalar minimization of ln(0.5 * 1.8^b + 0.5 * 0.2^b)
CHERNOFF_INFO = 0.11237744635283677
CHERNOFF_BETA = 0.4584311442727054
I2_TWO_LEVEL = binary_entropy(0.5) - binary_entropy(0.375)
I1_TWO_LEVEL = binary_entropy(0.25) - binary_entropy(0.375) + 0.125 * LN3
KL_UNIFORM_GIBBS = 0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25)


def two_level(E0=0.375, beta1=LN3, beta2=0.0):
    return TempTestProblem([1.0], [[0.0, 1.0]], beta1, beta2, E0)


def test_chernoff_information():
    res = detection_exponents([1.0], [0.5, 0.5], [[0.9, 0.1]], 0.0)
    assert res.false_alarm_exp == pytest.approx(CHERNOFF_INFO, abs=1e-10)
    assert res.beta_false_alarm == pytest.approx(CHERNOFF_BETA, abs=1e-7)
    # at zero threshold both exponents equal the Chernoff information
    assert res.missed_detection_exp == pytest.approx(CHERNOFF_INFO, abs=1e-10)


def test_indistinguishable_hypotheses():
    res = detection_exponents([0.4, 0.6], [0.3, 0.7], [[0.3, 0.7], [0.3, 0.7]], 0.0)
    assert res.false_alarm_exp == 0.0 and res.missed_detection_exp == 0.0


def test_threshold_at_noise_mean():
    noise, signal = [0.5, 0.5], [[0.9, 0.1]]
    band = detection_exponents([1.0], noise, signal, 0.0).band
    res = detection_exponents([1.0], noise, signal, band[1])
    assert res.false_alarm_exp == 0.0
    with pytest.raises(OutOfRange):
        detection_exponents([1.0], noise, signal, band[1] + 0.01)


def test_support_mismatch():
    with pytest.raises(InvalidModel):
        detection_exponents([1.0], [0.5, 0.5], [[1.0, 0.0]], 0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.05, 0.95))
def test_swapping_hypotheses_mirrors_exponents(seed, frac):
    rng = np.random.default_rng(seed)
    ny = int(rng.integers(2, 5))
    noise = rng.dirichlet(np.ones(ny))
    signal = rng.dirichlet(np.ones(ny))
    band = detection_exponents([1.0], noise, [signal], 0.0).band
    E0 = band[0] + frac * (band[1] - band[0])
    a = detection_exponents([1.0], noise, [signal], E0)
    b = detection_exponents([1.0], signal, [noise], -E0)
    assert a.false_alarm_exp == b.missed_detection_exp
    assert a.missed_detection_exp == b.false_alarm_exp


def test_detection_document():
    doc = {
        "x_alphabet": ["s"],
        "y_alphabet": ["0", "1"],
        "p": [1.0],
        "noise": [0.5, 0.5],
        "signal": [[0.9, 0.1]],
        "E0": 0.0,
    }
    res = detection_exponents(**detection_problem_from_dict(doc))
    assert res.false_alarm_exp == pytest.approx(CHERNOFF_INFO, abs=1e-10)


def test_two_level_exponents():
    res = temperature_test_exponents(two_level())
    assert res.E1 == pytest.approx(0.25, abs=1e-15)
    assert res.E2 == 0.5
    assert res.I2 == pytest.approx(I2_TWO_LEVEL, abs=1e-12)
    assert res.I1 == pytest.approx(I1_TWO_LEVEL, abs=1e-12)
    assert res.T2 == math.inf and res.T1 == pytest.approx(1 / LN3)


def test_two_level_edges():
    assert temperature_test_exponents(two_level(E0=0.5)).I2 == 0.0
    at_top = temperature_test_exponents(two_level(E0=0.5))
    assert at_top.I1 == pytest.approx(KL_UNIFORM_GIBBS, abs=1e-12)
    near = temperature_test_exponents(two_level(E0=0.25 + 1e-7))
    assert near.I1 < 1e-12
    with pytest.raises(OutOfRange):
        temperature_test_exponents(two_level(E0=0.6))
    with pytest.raises(OutOfRange):
        TempTestProblem([1.0], [[0.0, 1.0]], 0.5, 1.0, 0.3)


def test_ordinary_entropy_is_binary_entropy():
    problem = two_level()
    for E in (0.05, 0.2, 0.375, 0.49):
        sigma, _ = ordinary_entropy(problem, E)
        assert sigma == pytest.approx(binary_entropy(E), abs=1e-12)


@pytest.mark.parametrize("which, expected", [("I2", I2_TWO_LEVEL), ("I1", I1_TWO_LEVEL)])
def test_heat_capacity_integrals(which, expected):
    assert heat_capacity_integral(two_level(), which) == pytest.approx(expected, abs=1e-4)


def test_heat_capacity_integral_degenerate_band():
    problem = two_level(E0=0.375, beta1=0.5108256237659907, beta2=0.5108256237659907)
    assert heat_capacity_integral(problem, "I2") == 0.0
    assert heat_capacity_integral(problem, "I1") == 0.0


def test_random_temperature_test():
    rng = np.random.default_rng(4)
    for _ in range(5):
        H = rng.uniform(0, 2, size=(2, 3))
        p = rng.dirichlet(np.ones(2))
        b1, b2 = sorted(rng.uniform(0.1, 3, 2), reverse=True)
        model = TempTestProblem(p, H, b1, b2, 0.0).to_model()
        E1 = float(model.p @ _tilted_mean(H, b1))
        E2 = float(model.p @ _tilted_mean(H, b2))
        problem = TempTestProblem(p, H, b1, b2, 0.5 * (E1 + E2))
        res = temperature_test_exponents(problem)
        assert res.I1 >= 0 and res.I2 >= 0
        assert heat_capacity_integral(problem, "I2") == pytest.approx(res.I2, abs=1e-4)
        assert heat_capacity_integral(problem, "I1") == pytest.approx(res.I1, abs=1e-4)
        for beta in (0.3, 1.0, 2.5):
            T = 1.0 / beta
            assert fisher_information(model, beta) == pytest.approx(
                T * T * avg_heat_capacity(model, T), abs=1e-10
            )


def _tilted_mean(H, beta):
    w = np.exp(-beta * (H - H.min(axis=1, keepdims=True)))
    return (w * H).sum(axis=1) / w.sum(axis=1)


def test_temp_document():
    doc = {
        "x_alphabet": ["a"],
        "y_alphabet": ["0", "1"],
        "p": [1.0],
        "hamiltonian": [[0, 1]],
        "beta1": LN3,
        "beta2": 0,
        "E0": 0.375,
    }
    res = temperature_test_exponents(temp_test_problem_from_dict(doc))
    assert res.I2 == pytest.approx(I2_TWO_LEVEL, abs=1e-12)
