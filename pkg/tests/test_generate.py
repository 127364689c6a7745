import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqexplore.generate import (
    LAYOUTS,
    GenerationError,
    GenParams,
    emn_episode,
    generate,
    generate_scenario,
    generate_suite,
)
from seqexplore.memory import SpatialMemory
from seqexplore.reasoner import ReasoningContext, RuleOracle, sigma_rubric
from seqexplore.scenegraph import SceneGraph, Sighting
from seqexplore.tasks import EMN_MODALITIES, EQA_UNANSWERABLE
from seqexplore.world import Pose, VisibleSet, geodesic_field, parse_scenario


def omniscient_context(world):
    """A context whose graph holds the whole ground truth."""
    m = SpatialMemory.for_world(world)
    m.integrate(Pose(world.start.cell, 0), VisibleSet(frozenset(world.free_cells())))
    g = SceneGraph()
    g.sync_rooms(m)
    for o in world.objects.values():
        g.upsert_object(Sighting(o.id, o.category, o.attributes, o.cell, o.room_id, 0), m)
    return ReasoningContext(g, g.serialize_global(), scene=world.name, agent_cell=world.start.cell)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(sorted(LAYOUTS)))
def test_scenarios_are_valid_and_connected(seed, size):
    doc = generate_scenario(f"s{seed}", GenParams(size_class=size), random.Random(seed))
    w = parse_scenario(doc)
    width, height, lo, hi = LAYOUTS[size]
    assert (w.width, w.height) == (width, height)
    assert lo <= len(w.rooms) <= hi
    assert len(geodesic_field(w, w.start.cell)) == len(w.free_cells())
    assert set().union(*(r.cells for r in w.rooms.values())) == set(w.free_cells())
    assert w.size_class == size


def test_same_seed_same_output():
    a = generate(3, "x", GenParams("large"), "EMN", 2)
    b = generate(3, "x", GenParams("large"), "EMN", 2)
    assert a == b
    assert generate(4, "x", GenParams("large"), "EMN", 2) != a


@pytest.mark.parametrize("seed", range(4))
def test_eqa_answers_agree_with_ground_truth(seed):
    doc, eps = generate(seed, f"q{seed}", GenParams("small"), "EQA", 3)
    w = parse_scenario(doc)
    ctx = omniscient_context(w)
    oracle = RuleOracle()
    for ep in eps:
        for g in ep.goals:
            p = oracle.propose(g, ctx)
            if g.feasible:
                assert p.kind == "answer" and sigma_rubric(p.value, g.answer) >= 4, g
            else:
                assert p.kind == "no-answer", g


@pytest.mark.parametrize("seed", range(4))
def test_emn_targets_match_their_spec(seed):
    doc, eps = generate(seed, f"n{seed}", GenParams("large"), "EMN", 3)
    w = parse_scenario(doc)
    ctx = omniscient_context(w)
    for ep in eps:
        for g in ep.goals:
            p = RuleOracle().propose(g, ctx)
            if g.feasible:
                assert g.targets and p.kind == "goal-reached" and p.target in g.targets
                for t in g.targets:
                    assert w.objects[t].category == g.spec["category"]
            else:
                assert not g.targets and p.kind == "no-answer"


def test_emn_infeasible_share():
    doc, _ = generate(0, "share", GenParams("small"))
    w = parse_scenario(doc)
    rng = random.Random(1)
    total = infeasible = 0
    for k in range(10):
        ep = emn_episode(w, rng, f"e{k}")
        n_inf = sum(not g.feasible for g in ep.goals)
        assert abs(n_inf - 0.4 * len(ep.goals)) <= 1
        total += len(ep.goals)
        infeasible += n_inf
    assert abs(infeasible / total - 0.4) <= 0.1


def test_suite_covers_every_infeasible_category():
    pairs = generate_suite(0, 30)
    assert len(pairs) == 30 and len({d["name"] for d, _ in pairs}) == 30
    eqa = {g.category for _, ep in pairs for g in ep.goals if ep.track == "EQA" and not g.feasible}
    emn = {g.category for _, ep in pairs for g in ep.goals if ep.track == "EMN" and not g.feasible}
    assert eqa == set(EQA_UNANSWERABLE) and emn == set(EMN_MODALITIES)
    assert {d["size_class"] for d, _ in pairs} == set(LAYOUTS)
    goals = [g for _, ep in pairs for g in ep.goals]
    assert 0.35 <= sum(not g.feasible for g in goals) / len(goals) <= 0.45


@pytest.mark.parametrize(
    "kw",
    [dict(size_class="tiny"), dict(n_rooms=0), dict(objects_per_room=(3, 2)), dict(door_width=0),
     dict(infeasible_ratio=1.5), dict(emn_goals=(0, 3))],
)
def test_bad_params(kw):
    with pytest.raises(GenerationError):
        GenParams(**kw)
    with pytest.raises(GenerationError):
        generate(0, "x", track="VLN")
