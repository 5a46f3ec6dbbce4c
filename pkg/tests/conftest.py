import numpy as np
import pytest

from capa_isac.core import Scenario
from capa_isac.em import ApertureGeometry, Medium, User
from capa_isac.evaluation import UserDisk, constellation
from capa_isac.reference import TargetSet, design_reference

PT = 5.0
DEFAULT_TARGETS = [(45.0, 15.0), (-60.0, 45.0), (30.0, 60.0)]


@pytest.fixture(scope="session")
def aperture():
    return ApertureGeometry(0.6, 0.6)


@pytest.fixture(scope="session")
def medium():
    return Medium.from_frequency(2.4e9)


@pytest.fixture(scope="session")
def targets():
    return TargetSet.from_degrees(DEFAULT_TARGETS)


@pytest.fixture(scope="session")
def reference(targets, aperture, medium):
    return design_reference(targets, PT, aperture, medium)


def random_users(rng, k=4, const="QPSK"):
    c = constellation(const)
    pos = UserDisk().sample(rng, k)
    return [User(p, symbol=c.points[rng.integers(c.order)]) for p in pos]


@pytest.fixture
def scenario(aperture, medium, targets):
    rng = np.random.default_rng(2024)
    return Scenario(aperture, medium, random_users(rng), targets, PT, 0.5, 20)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    lines = [test_acceptance.RESULTS[k] for k in sorted(test_acceptance.RESULTS)]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
