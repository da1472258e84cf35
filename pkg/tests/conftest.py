import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bmv import matcore

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by the acceptance tests, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def pd_pair():
    return matcore.sample_psd(3, 11, cond=10.0), matcore.sample_psd(3, 12, cond=10.0)


@pytest.fixture
def rational_pair():
    return (matcore.sample_psd(3, 5, rational=True), matcore.sample_psd(3, 6, rational=True))
