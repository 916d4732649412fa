import pytest

from virtee import client
from virtee.example_tas import EXAMPLES_DIR
from virtee.testbed import EphemeralFramework

EXAMPLE_MODULES = [
    EXAMPLES_DIR / "conn_test_ta.py",
    EXAMPLES_DIR / "digest_ta.py",
]


@pytest.fixture
def framework():
    with EphemeralFramework(ta_modules=EXAMPLE_MODULES) as fw:
        yield fw


@pytest.fixture
def ctx(framework):
    with client.initialize_context(framework.socket_path) as c:
        yield c


# The acceptance tests register one line each; print them as a block in
# the terminal summary so every criterion shows an explicit verdict.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
