import numpy as np
import pytest

from gravcomp.excitation import default_plans
from gravcomp.gravity import default_spec
from gravcomp.kinematics import default_model
from gravcomp.plant import Plant, mtm_plant_spec

ACCEPTANCE_LINES: list[str] = []


def collect_all(plant):
    return [
        plant.collect(p.configs, p.dirs, {"estimated_joint": p.estimated_joint})
        for p in default_plans(plant.model)
    ]


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def gspec(model):
    return default_spec(model)


@pytest.fixture(scope="session")
def clean_plant():
    return Plant(mtm_plant_spec("in-class", 0.0, seed=1))


@pytest.fixture(scope="session")
def clean_data(clean_plant):
    return collect_all(clean_plant)


@pytest.fixture(scope="session")
def clean_mlse(clean_data, gspec):
    from gravcomp.disturbance import DEFAULT_ORDERS
    from gravcomp.estimation import mlse

    return mlse(clean_data, gspec, DEFAULT_ORDERS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
