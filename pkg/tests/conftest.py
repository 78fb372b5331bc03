import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

from csmsm import CANONICAL, Phenotype, make_machine  # noqa: E402


@pytest.fixture
def canonical():
    return CANONICAL


def machine_for(ph: Phenotype, stream=None, payoffs=CANONICAL):
    return make_machine(ph.kind, ph.role, stream if ph is Phenotype.RANDOM else None, payoffs=payoffs)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
