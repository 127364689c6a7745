import csv
import io
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from seqexplore.metrics import (
    EpisodeReport,
    SubtaskOutcome,
    eqa_correctness,
    ssr_binary,
    ssr_eqa,
    sspl,
    subtask_spl,
    success_rate,
    summary_csv,
)


def outcome(success=1, track="EQA", feasible=True, steps=10, limit=50, **kw):
    return SubtaskOutcome("g", track, "object", feasible, success, steps, limit, "answer", **kw)


def report(outcomes, steps=30, limit=100, track="EQA", episode="e"):
    return EpisodeReport("s", episode, track, outcomes, steps, limit, 0.5)


def test_worked_examples():
    assert ssr_eqa([(5, 5, 5, 5, 5)]) == 100.0
    assert ssr_eqa([(3, 3, 3, 3, 3)]) == 0.0
    assert ssr_eqa([(5, 1, 3, 3, 3)]) == 0.0
    assert ssr_eqa([(4, 3, 3, 3, 3)]) == 10.0


@given(st.lists(st.integers(1, 5), min_size=1, max_size=8))
def test_correctness_bounds(sig):
    c = eqa_correctness(sig)
    assert 0.0 <= c <= 1.0
    assert (c == 1.0) == all(s == 5 for s in sig)


def test_validation():
    with pytest.raises(ValueError):
        eqa_correctness([6])
    with pytest.raises(ValueError):
        ssr_eqa([(5, 5), (5,)])
    with pytest.raises(ValueError):
        ssr_binary([])
    with pytest.raises(ValueError):
        sspl([report([outcome()], steps=101)])
    with pytest.raises(ValueError):
        sspl([report([outcome()])], mode="partial")


def test_sspl_credit_only_for_full_success():
    ok = report([outcome(), outcome()], steps=40, limit=100, track="EMN")
    bad = report([outcome(), outcome(success=0)], steps=10, limit=100, track="EMN")
    assert sspl([ok, bad]) == pytest.approx(30.0)
    assert ssr_binary([ok, bad]) == 50.0


def test_navigation_spl_uses_geodesic_ratio():
    o = outcome(track="EMN", optimal=6, path_length=8)
    assert o.spl() == 0.75
    assert outcome(track="EMN", optimal=6, path_length=4).spl() == 1.0
    assert outcome(track="EMN", optimal=0, path_length=0).spl() == 1.0
    assert outcome(track="EMN", success=0, optimal=6, path_length=6).spl() == 0.0
    with pytest.raises(ValueError):
        outcome(track="EMN").spl()
    # answering and infeasible declarations use the budget ratio
    assert outcome(steps=10, limit=50).spl() == 0.8
    assert outcome(track="EMN", feasible=False, steps=25, limit=50).spl() == 0.5


def test_random_tables_match_brute_force():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(1, 5)
        eps = []
        for _ in range(rng.randint(1, 6)):
            outs = [outcome(success=rng.randint(0, 1), steps=rng.randint(0, 50)) for _ in range(n)]
            eps.append(report(outs, steps=rng.randint(0, 100), limit=100))
        bins = [[o.success for o in r.outcomes] for r in eps]
        assert ssr_binary(eps) == pytest.approx(oracles.ssr_binary(bins), rel=1e-12)
        want = oracles.sspl([(float(all(b)), r.steps, r.episode_limit) for b, r in zip(bins, eps)])
        assert sspl(eps) == pytest.approx(want, rel=1e-12, abs=1e-12)
        outs = [o for r in eps for o in r.outcomes]
        assert success_rate(outs) == pytest.approx(100.0 * sum(o.success for o in outs) / len(outs))


def test_csv_is_sorted_and_formatted():
    a = report([outcome()], episode="b")
    b = report([outcome(success=0)], episode="a")
    rows = list(csv.DictReader(io.StringIO(summary_csv([a, b]))))
    assert [r["episode"] for r in rows] == ["a", "b"]
    assert rows[1]["SR"] == "100.000000" and rows[0]["steps"] == "30"
    assert subtask_spl([outcome()]) == 80.0


def test_report_dict_round_trip():
    r = report([outcome(sigma=4, predicted="x")])
    assert EpisodeReport.from_dict(r.to_dict()) == r
