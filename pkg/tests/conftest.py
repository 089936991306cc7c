import logging

import pytest
from hypothesis import HealthCheck, settings

from supplyrisk.synth import PRESETS, synthesize, toy_dataset

settings.register_profile("default", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

A, B, C, D, E, F = range(6)


@pytest.fixture(autouse=True)
def _quiet_calibration(caplog):
    caplog.set_level(logging.ERROR, logger="supplyrisk")


@pytest.fixture
def toy():
    return toy_dataset()


@pytest.fixture(scope="session")
def small_economy():
    return synthesize(PRESETS["small"])
