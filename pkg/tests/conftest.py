import numpy as np
import pytest

from strhc.geometry import Polytope
from strhc.model import SystemModel, example_model
from strhc.sim import build_costs, bundled_scenario, load_or_synthesize


@pytest.fixture(scope="session")
def model():
    return example_model()


@pytest.fixture(scope="session")
def scenario():
    return bundled_scenario()


@pytest.fixture(scope="session")
def family(scenario):
    return load_or_synthesize(scenario.model, scenario.synth)


@pytest.fixture(scope="session")
def costs(scenario, family):
    return build_costs(scenario, family)


def scalar_model(a=1.0, b=1.0, xb=1.0, ub=0.1, dx=0.0, dy=0.0):
    """``x+ = a x + b u + dx`` on ``|x| <= xb``, ``|u| <= ub``."""
    return SystemModel(
        A=[[a]], B=[[b]], Bd=[[1.0]],
        X=Polytope.symmetric_box([xb]), U=Polytope.symmetric_box([ub]),
        Dx=Polytope.symmetric_box([dx]), Dy=Polytope.symmetric_box([dy]), name="scalar",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
