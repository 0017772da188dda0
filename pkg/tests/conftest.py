import numpy as np
import pytest

from polyvem.mesh import Polygon

ACCEPTANCE_LINES = {}


def random_star_polygon(rng, n=None, scale=1.0, shift=(0.0, 0.0)):
    """Random simple counterclockwise polygon, star-shaped about the origin before the shift."""
    n = n or int(rng.integers(3, 10))
    gaps = rng.uniform(0.6, 1.0, n)
    ang = rng.uniform(0.0, 2.0 * np.pi) + 2.0 * np.pi * np.cumsum(gaps) / gaps.sum()
    r = rng.uniform(0.4, 1.0, n) * scale
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)]) + np.asarray(shift)
    return Polygon(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


UNIT_SQUARE = Polygon([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
HEXAGON = Polygon([(1.0, 0.0), (0.5, 0.8660254037844386), (-0.5, 0.8660254037844386),
                   (-1.0, 0.0), (-0.5, -0.8660254037844386), (0.5, -0.8660254037844386)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
