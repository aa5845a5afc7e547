import numpy as np
import pytest

from adeqclust.quality import default_calibration

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table():
    return default_calibration()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_blobs(rng, n=(150, 100), sep=12.0, p=2):
    a = rng.standard_normal((n[0], p))
    b = rng.standard_normal((n[1], p))
    b[:, 0] += sep
    X = np.vstack([a, b])
    y = np.repeat([1, 2], n)
    return X, y


@pytest.fixture
def blobs(rng):
    return two_blobs(rng)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
