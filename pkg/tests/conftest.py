import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from optdesign import kernels

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    monkeypatch.setattr(kernels, "_backend", kernels.get_backend(request.param))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
