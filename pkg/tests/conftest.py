import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thermoscope.acoustics import AcousticConfig
from thermoscope.dataset import SyntheticConfig, make_synthetic_dataset
from thermoscope.thermal import ThermalConfig

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def tiny_synthetic_config(n_runs=2, seed=3, steps=12):
    """Small corpus: short runs, 512-sample records; fast enough for unit tests."""
    return SyntheticConfig(
        n_runs=n_runs, seed=seed,
        thermal=ThermalConfig(step_interval=600.0, max_steps=steps, n_grid=25),
        acoustic=AcousticConfig(n_samples=512),
    )


@pytest.fixture(scope="session")
def tiny_dataset():
    return make_synthetic_dataset(tiny_synthetic_config())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
