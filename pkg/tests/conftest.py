import numpy as np
import pytest

from lcs.imaging import Image


def quadrants(n=64, values=(40, 90, 160, 220)):
    """Four constant quadrants: top-left, top-right, bottom-left, bottom-right."""
    u = np.empty((n, n))
    h = n // 2
    u[:h, :h], u[:h, h:], u[h:, :h], u[h:, h:] = values
    return Image(u)


def cameraman(n):
    """The standard cameraman test image, block-averaged down to n x n."""
    from skimage.data import camera

    c = camera().astype(np.float64)
    f = c.shape[0] // n
    return Image(c.reshape(n, f, n, f).mean(axis=(1, 3)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def quad64():
    return quadrants(64)


@pytest.fixture(scope="session")
def camera64():
    return cameraman(64)


@pytest.fixture(scope="session")
def camera128():
    return cameraman(128)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][3:])):
            terminalreporter.write_line(line)
