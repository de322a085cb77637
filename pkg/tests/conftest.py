import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chainrca.simulator.scenarios import build_scenario, load_scenario_config  # noqa: E402
from chainrca.training import load_models  # noqa: E402


@pytest.fixture(scope="session")
def bundled_models():
    return load_models()


@pytest.fixture(scope="session")
def worked_example():
    return build_scenario(load_scenario_config("worked_example"))


@pytest.fixture(scope="session")
def worked_example_pruned():
    return build_scenario(load_scenario_config("worked_example_pruned"))


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
