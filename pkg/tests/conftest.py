import sys

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("acsim", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("acsim")


@pytest.fixture(params=["numba", "numpy"])
def kernel_path(request, monkeypatch):
    """Run a test once per kernel backend."""
    monkeypatch.setenv("ACSIM_NO_NUMBA", "1" if request.param == "numpy" else "0")
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
