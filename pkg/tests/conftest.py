import numpy as np
import pytest

from chernoff_thermo import make_model


@pytest.fixture
def fair_coin():
    return make_model([1.0], [[0.5, 0.5]], [[0.0, 1.0]], ["a"], ["0", "1"])


@pytest.fixture
def two_subsystem():
    return make_model(
        [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.0, 1.0], [0.0, 2.0]], ["a", "b"], ["0", "1"]
    )


def random_model(rng, max_v=4, max_u=5, f_max=3.0):
    nv = int(rng.integers(1, max_v + 1))
    nu = int(rng.integers(2, max_u + 1))
    p = rng.dirichlet(np.ones(nv))
    q = rng.dirichlet(np.ones(nu), size=nv)
    f = rng.uniform(0.0, f_max, size=(nv, nu))
    return make_model(p, q, f)


ACCEPTANCE = {}


def record_criterion(number, title, passed, detail):
    """Store and print a one-line verdict for an acceptance criterion."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
