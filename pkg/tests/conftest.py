from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import TickClock  # noqa: E402

from storytriad.scenarios import ScenarioRegistry


@pytest.fixture
def tick_clock() -> TickClock:
    return TickClock()


@pytest.fixture(scope="session")
def scenarios() -> ScenarioRegistry:
    return ScenarioRegistry.bundled()


@pytest.fixture(scope="session")
def high_school(scenarios):
    return scenarios.get("high_school")
