"""Pytest configuration for subheat tests.

Puts ``src/`` on the import path, registers the ``slow`` marker for the
full-size acceptance runs, and provides shared streams and domains.
"""

import sys
from pathlib import Path

import pytest

SRC = Path(__file__).parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from subheat.oracles import Interval  # noqa: E402
from subheat.streams import RandomStream  # noqa: E402


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line(
        "markers",
        "slow: full-size Monte Carlo acceptance run (deselect with -m 'not slow')"
    )


@pytest.fixture
def stream():
    """Fixed stream shared by tests that do not care about independence."""
    return RandomStream(seed=20240917)


@pytest.fixture
def unit_interval():
    return Interval(0.0, 1.0)


def within(value, target, stderr, fraction=0.0, sigmas=4.0):
    """|value - target| <= max(sigmas * stderr, fraction * |target|)."""
    return abs(value - target) <= max(sigmas * stderr, fraction * abs(target))
