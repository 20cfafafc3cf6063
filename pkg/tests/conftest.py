import numpy as np
import pytest

from sammrf.synthetic import make_scene
from sammrf.unary import UnaryField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scene():
    return make_scene(24, 20, classes=3, bands=12, regions=6, separation=0.2, noise=0.15, seed=3)


def random_unary(rng, width, height, classes, low=0.0, high=1.0):
    return UnaryField(rng.uniform(low, high, (width * height, classes)), width, height)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
