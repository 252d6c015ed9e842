import numpy as np
import pytest

from ivrules.model import CellSpec, StructuralModel
from ivrules.sampler import Dataset


def make_m1():
    return StructuralModel.create(
        [CellSpec.create(u_probs=[0.5, 0.5], m_plus=[0.9, 0.5], m_minus=[0.5, 0.3],
                         q_plus=[0.9, 0.7], q_minus=[0.3, 0.5], pi_z=0.5)],
        [1.0])


def make_m2():
    return StructuralModel.create(
        [CellSpec.create(u_probs=[0.5, 0.5], m_plus=[0.9, 0.3], m_minus=[0.5, 0.5],
                         q_plus=[0.6, 0.9], q_minus=[0.5, 0.2], pi_z=0.5)],
        [1.0])


def make_d8():
    rows = [(1, 1, 1), (1, 1, 1), (1, 1, 0), (1, -1, 1),
            (-1, 1, 1), (-1, -1, 0), (-1, -1, 0), (-1, -1, 1)]
    z, a, y = zip(*rows)
    return Dataset.from_columns([0] * 8, z, a, y)


def zero_effect_model(m=0.4):
    return StructuralModel.create(
        [CellSpec.create([0.3, 0.7], [m, m], [m, m], [0.8, 0.6], [0.2, 0.3], 0.5),
         CellSpec.create([1.0], [m], [m], [0.7], [0.1], 0.4)],
        [0.5, 0.5])


@pytest.fixture
def m1():
    return make_m1()


@pytest.fixture
def m2():
    return make_m2()


@pytest.fixture
def d8():
    return make_d8()


@pytest.fixture
def rng():
    return np.random.default_rng(20200928)


# acceptance criteria report: test_acceptance.py appends (number, title, passed, detail)
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} -- {detail}")
