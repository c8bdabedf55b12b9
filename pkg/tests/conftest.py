import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def clouds(min_n=3, max_n=24, dims=(2, 3), bound=10.0):
    """Well-spread random clouds: finite, not coincident."""

    @st.composite
    def build(draw):
        d = draw(st.sampled_from(dims))
        n = draw(st.integers(min_n, max_n))
        seed = draw(st.integers(0, 2**32 - 1))
        return np.random.default_rng(seed).uniform(-bound, bound, size=(n, d))

    return build()


finite_floats = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
