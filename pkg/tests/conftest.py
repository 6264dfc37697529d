import pytest

from pcsmt.geometry import Marker, TripletGeometry, round_point
from pcsmt.logs import extract_seed, synthesize_log

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def geometry():
    return TripletGeometry()


def exact_triplet(center=(60000, 60000), geometry=None):
    g = geometry or TripletGeometry()
    return [round_point(p) for p in g.instance(center)]


@pytest.fixture(scope="session")
def seed625():
    return extract_seed(synthesize_log(625, rng_seed=7))


@pytest.fixture(scope="session")
def small_seed():
    return extract_seed(synthesize_log(20, rng_seed=3))
