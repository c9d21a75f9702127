import sys
from importlib import resources

import numpy as np
import pytest

from mhxdof.network import parse_network

NETWORK_DIR = resources.files("mhxdof") / "data" / "networks"


def load_fixture(name):
    return parse_network((NETWORK_DIR / f"{name}.net").read_text())


def fixture_path(name):
    return str(NETWORK_DIR / f"{name}.net")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
