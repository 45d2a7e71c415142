import os
import sys
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from arteo.arteo_core import RunSettings, run  # noqa: E402
from arteo.safe_ucb import run_safe_ucb  # noqa: E402
from arteo.scenarios.motor import make_motor_scenario  # noqa: E402

MOTOR_SEEDS = list(range(50))
# wall time of the expensive session fixtures, read by the acceptance report
TIMINGS = {}


def _timed(name, fn):
    start = time.perf_counter()
    out = fn()
    TIMINGS[name] = time.perf_counter() - start
    return out


@pytest.fixture(scope="session")
def motor_scenario():
    return make_motor_scenario()


@pytest.fixture(scope="session")
def motor_arteo_runs(motor_scenario):
    return _timed("motor_arteo", lambda: [run(motor_scenario, RunSettings(), s) for s in MOTOR_SEEDS])


@pytest.fixture(scope="session")
def motor_safe_ucb_runs(motor_scenario):
    return _timed("motor_safe_ucb", lambda: [run_safe_ucb(motor_scenario, RunSettings(), s) for s in MOTOR_SEEDS])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bid_run():
    from arteo.scenarios.bid import BidConfig, generate_bid_data, run_bid_campaigns

    config = BidConfig()
    campaigns, seed_ads = generate_bid_data(0, 10, 25, config)
    state = _timed("bid", lambda: run_bid_campaigns(campaigns, seed_ads, config, seed=0))
    return campaigns, state
