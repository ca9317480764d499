from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def rationals(bound: int = 6, denom: int = 5):
    return st.builds(Fraction, st.integers(-bound * denom, bound * denom), st.integers(1, denom))


def vectors(dim: int, bound: int = 6, denom: int = 5):
    return st.lists(rationals(bound, denom), min_size=dim, max_size=dim).map(tuple)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
