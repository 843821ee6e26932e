import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plasmonsps import emitter, tags

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_stream(rng: np.random.Generator, n: int, channels: int = 4,
                  span: int = 10 ** 12) -> tags.TagStream:
    """Sorted stream with random channels and timestamps (ties allowed)."""
    ts = np.sort(rng.integers(0, span, n, dtype=np.uint64))
    ch = rng.integers(0, channels, n).astype(np.uint8)
    return tags.TagStream(ch, ts, channel_count=channels)


@pytest.fixture(scope="session")
def coupled():
    return emitter.load_preset("coupled")


@pytest.fixture(scope="session")
def uncoupled():
    return emitter.load_preset("uncoupled")


@pytest.fixture(scope="session")
def chain():
    return emitter.DetectorChain()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
