import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stackreduce.data import SyntheticSpec, generate_planted

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_planted():
    """Small noisy planted problem (6 features, 2 informative)."""
    return generate_planted(SyntheticSpec(n=240, d=6, informative=(0, 1), noise_sigma=0.3,
                                          seed=11))


@pytest.fixture(scope="session")
def noiseless_planted():
    return generate_planted(SyntheticSpec(n=200, d=4, informative=(0,), n_classes=3,
                                          noise_sigma=0.0, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
