import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ergolab.maps import make_map

settings.register_profile("ergolab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ergolab")


@pytest.fixture(scope="session")
def doubling():
    return make_map("doubling")


@pytest.fixture(scope="session")
def intermittent():
    return make_map("intermittent", gamma=0.5)


@pytest.fixture(scope="session")
def quadratic():
    return make_map("quadratic", a=2.0)


@pytest.fixture(scope="session")
def markov3():
    return make_map("markov3")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
