import numpy as np
import pytest

from imdd_capacity import blahut_arimoto

# Every SolverReport built during the session, for the suite-wide BA audit.
SOLVER_REPORTS = []
# Lines printed in the terminal summary by the acceptance module.
ACCEPTANCE_LINES = []

_orig_post_init = blahut_arimoto.SolverReport.__post_init__


def _recording_post_init(self):
    _orig_post_init(self)
    SOLVER_REPORTS.append(self)


def pytest_configure(config):
    blahut_arimoto.SolverReport.__post_init__ = _recording_post_init


def pytest_collection_modifyitems(session, config, items):
    # The suite-wide audit must see every other solver run first.
    last = [it for it in items if "audit_all_runs" in it.name]
    rest = [it for it in items if "audit_all_runs" not in it.name]
    items[:] = rest + last


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
