from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

import pytest

from telelink.core import XPRIZE_STREAMS, Direction, build_registry
from telelink.scenario import load_scenario

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

SECOND = 1_000_000


def scenario_data(name: str) -> dict:
    return json.loads((SCENARIOS / f"{name}.json").read_text())


def make_scenario(name: str = "nominal", **overrides):
    """Load a bundled scenario with top-level fields replaced."""
    data = copy.deepcopy(scenario_data(name))
    data.update(overrides)
    return load_scenario(data)


@pytest.fixture
def xprize_downlink():
    return [s for s in XPRIZE_STREAMS if s.direction is Direction.DOWNLINK]


@pytest.fixture
def xprize_uplink():
    return [s for s in XPRIZE_STREAMS if s.direction is Direction.UPLINK]


@pytest.fixture
def xprize_registry():
    return build_registry(XPRIZE_STREAMS)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
