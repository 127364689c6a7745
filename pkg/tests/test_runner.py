from dataclasses import replace

import pytest

from conftest import fixture_episodes, fixture_world, run_fixture
from seqexplore.agent import AgentConfig, Decision
from seqexplore.runner import (
    EpisodeSettings,
    dumps_record,
    judge_subtask,
    read_trace,
    replay,
    report_from_trace,
    write_trace,
)
from seqexplore.world import Pose


def accept_violations(trace):
    bad = 0
    for r in trace:
        q = r.get("query")
        if q and q["verdict"] == "accept":
            bad += any(v < q["theta"] for v in q["relevant"].values())
    return bad


def test_two_room_navigation_episode():
    report, trace = run_fixture("tworoom", "tworoom-emn")
    assert [o.success for o in report.outcomes] == [1, 1, 1]
    assert [o.reason for o in report.outcomes] == ["stop", "stop", "infeasible"]
    assert report.steps <= 100 and all(o.steps <= 50 for o in report.outcomes)
    assert accept_violations(trace) == 0
    assert 0 < report.memory_ratio < 1


def test_trace_shape_and_report_rebuild():
    report, trace = run_fixture("tworoom", "tworoom-emn")
    kinds = [r["type"] for r in trace]
    assert kinds[0] == "header" and kinds[-1] == "episode"
    assert kinds.count("subtask") == kinds.count("outcome") == 3
    steps = [r["t"] for r in trace if r["type"] == "step"]
    assert steps == list(range(1, len(steps) + 1))
    assert report_from_trace(trace) == report


def test_runs_are_deterministic():
    a = run_fixture("studio", "studio-eqa")[1]
    b = run_fixture("studio", "studio-eqa")[1]
    assert [dumps_record(r) for r in a] == [dumps_record(r) for r in b]


def test_replay_verifies_and_detects_tampering(tmp_path):
    _, trace = run_fixture("tworoom", "tworoom-absent")
    p = tmp_path / "t.jsonl"
    write_trace(trace, p)
    assert replay(read_trace(p)).ok
    moves = [i for i, r in enumerate(trace) if r.get("action") == "move-forward"]
    bad = [dict(r) for r in trace]
    bad[moves[0]]["action"] = "turn-left"
    res = replay(bad)
    assert not res.ok and res.divergence == bad[moves[0]]["t"]


def test_corrupt_trace_files(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text('{"type": "step"}\n')
    with pytest.raises(ValueError, match="header"):
        read_trace(p)
    p.write_text("{oops\n")
    with pytest.raises(ValueError, match="line 1"):
        read_trace(p)


def test_stricter_threshold_never_finishes_sooner():
    lo, _ = run_fixture("tworoom", "tworoom-absent")
    hi, _ = run_fixture("tworoom", "tworoom-absent", EpisodeSettings(agent=AgentConfig(theta=0.95)))
    assert lo.outcomes[0].reason == hi.outcomes[0].reason == "infeasible"
    assert hi.steps >= lo.steps


def test_wiped_memory_is_recorded_and_replayable():
    r, trace = run_fixture("manor", "manor-reuse", EpisodeSettings(persistent_memory=False))
    assert [s["reset"] for s in trace if s["type"] == "subtask"] == [False, True]
    assert replay(trace).ok


def test_budget_exhaustion_is_judged_as_failure():
    world = fixture_world("tworoom")
    ep = fixture_episodes("tworoom")["tworoom-absent"]
    goal = ep.goals[0]
    out = judge_subtask(goal, None, world.start, 50, 50, world)
    assert out.success == 0 and out.reason == "subtask-budget" and out.sigma == 1


def test_navigation_judging_needs_visible_target_in_radius():
    world = fixture_world("tworoom")
    goal = fixture_episodes("tworoom")["tworoom-emn"].goals[0]  # refrigerator at (10, 1)
    stop = Decision("stop", "o3")
    assert judge_subtask(goal, stop, Pose((8, 1), 0), 5, 50, world).success == 1
    assert judge_subtask(goal, stop, Pose((8, 1), 4), 5, 50, world).success == 0
    assert judge_subtask(goal, stop, Pose((2, 3), 0), 5, 50, world).success == 0
    assert judge_subtask(goal, Decision("infeasible"), Pose((8, 1), 0), 5, 50, world).success == 0


def test_settings_record_round_trip():
    s = EpisodeSettings(tau0=0.1, persistent_memory=False, agent=AgentConfig(theta=0.9))
    assert EpisodeSettings.from_record(s.to_record()) == s
    assert replace(s, tau0=0.25) != s


def test_absent_object_declared_infeasible_exactly_once():
    report, trace = run_fixture("tworoom", "tworoom-absent")
    verdicts = [r["query"]["verdict"] for r in trace if r.get("query")]
    assert verdicts.count("infeasible") == 1 and verdicts[-1] == "infeasible"
    assert trace[-2]["type"] == "outcome" and report.outcomes[0].success == 1


def test_object_goal_matches_golden_step_count():
    from conftest import GOLDEN

    report, _ = run_fixture("tworoom", "tworoom-emn")
    golden = report_from_trace(read_trace(GOLDEN / "tworoom-emn.trace.jsonl"))
    first = report.outcomes[0]
    assert first.success == 1 and first.steps < first.limit
    assert first.steps == golden.outcomes[0].steps
