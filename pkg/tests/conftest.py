import pytest
from hypothesis import settings

from symflood import SimConfig

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def cfg():
    return SimConfig()


@pytest.fixture
def quiet_cfg():
    return SimConfig(noise_enabled=False)


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
