import sys

import pytest

from pinchflow.cli import cmd_analyze, simulate
from pinchflow.config import RunConfig
from pinchflow.store import write_run


@pytest.fixture(scope="session")
def default_config():
    return RunConfig()


@pytest.fixture(scope="session")
def pinch_run(default_config):
    """One generic-pinch run with the default configuration (about a second)."""
    return simulate(default_config)


@pytest.fixture(scope="session")
def analyzed_dir(pinch_run, default_config, tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("runs") / "generic"
    write_run(pinch_run, default_config, run_dir)
    assert cmd_analyze(run_dir) == 0
    return run_dir


def pytest_terminal_summary(terminalreporter):
    # repeat the acceptance lines, which -v without -s would swallow
    mod = next((m for name, m in list(sys.modules.items())
                if name.endswith("test_acceptance") and hasattr(m, "RESULTS")), None)
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
