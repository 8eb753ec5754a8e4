import numpy as np
import pytest
from hypothesis import strategies as st

from arnav.geometry import RigidTransform, random_rotation


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def make_transform(rng, scale=100.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, 3))


@st.composite
def transforms(draw, scale=200.0):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return make_transform(np.random.default_rng(seed), scale)


@st.composite
def point_clouds(draw, min_points=3, max_points=20, scale=100.0):
    n = draw(st.integers(min_value=min_points, max_value=max_points))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return np.random.default_rng(seed).uniform(-scale, scale, (n, 3))


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
