import numpy as np
import pytest
from hypothesis import settings

from fockgerbe import fock, modes

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# filled by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def full_basis(n: int, Q: int) -> fock.FockBasis:
    mb = modes.ModeBasis(n, Q)
    return fock.FockBasis(modes.standard_lagrangian(mb))
