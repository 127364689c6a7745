import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seqexplore.cli import FIXTURES  # noqa: E402
from seqexplore.reasoner import RuleOracle  # noqa: E402
from seqexplore.runner import EpisodeSettings, run_episode  # noqa: E402
from seqexplore.tasks import load_episodes  # noqa: E402
from seqexplore.world import load_scenario  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"
SCENARIOS = sorted(p.stem for p in FIXTURES.glob("*.scen"))


@lru_cache(maxsize=None)
def fixture_world(name):
    return load_scenario(FIXTURES / f"{name}.scen")


@lru_cache(maxsize=None)
def fixture_episodes(name):
    return {e.id: e for e in load_episodes(FIXTURES / f"{name}.episodes.json")}


def run_fixture(scenario, episode_id, settings=None):
    trace = []
    report = run_episode(
        fixture_world(scenario), fixture_episodes(scenario)[episode_id], RuleOracle(), settings or EpisodeSettings(), trace
    )
    return report, trace


@pytest.fixture
def tworoom():
    return fixture_world("tworoom")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
