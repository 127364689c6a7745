import pytest

from seqexplore.tasks import (
    Episode,
    Goal,
    attribute_question,
    canonical_text,
    count_question,
    dump_episodes,
    functional_question,
    load_episodes,
    location_question,
    parse_question,
    spatial_question,
    synonym,
)


def test_canonical_text():
    assert canonical_text("  The   Red Sofa. ") == "red sofa"
    assert canonical_text("Two") == "2"
    assert canonical_text(None) == ""
    assert synonym("Couch") == "sofa" and synonym("fridge") == "refrigerator"


@pytest.mark.parametrize(
    "text, kind, rooms, cats",
    [
        (attribute_question("color", "sofa", "living room"), "attribute", ("living room",), ("sofa",)),
        (location_question("fridge"), "location", (), ("refrigerator",)),
        (spatial_question("bed", "bedroom"), "spatial", ("bedroom",), ("bed",)),
        (functional_question("sit", "living room"), "functional", ("living room",), ("sofa",)),
        (count_question("chair", "house"), "count", ("house",), ("chair",)),
    ],
)
def test_question_templates_round_trip(text, kind, rooms, cats):
    a = parse_question(text)
    assert (a.kind, a.rooms, a.categories) == (kind, rooms, cats)


def test_qualified_attribute_question():
    a = parse_question(attribute_question("state", "cat", "kitchen", qualifier="white"))
    assert a.attributes == (("color", "white"),) and a.asked == "state"


def test_off_grammar_question_is_rejected():
    with pytest.raises(ValueError, match="grammar"):
        parse_question("Is there anything interesting?")


def goal(**over):
    d = dict(id="g", track="EQA", category="object", text="Which room is the sofa in?", feasible=True, answer="kitchen")
    d.update(over)
    return Goal(**d)


def test_goal_consistency_checks():
    goal()
    with pytest.raises(ValueError):
        goal(feasible=False)
    with pytest.raises(ValueError):
        goal(category="object-not-present")
    with pytest.raises(ValueError):
        goal(track="EMN", category="object", targets=())
    with pytest.raises(ValueError):
        goal(category="teleport")


def test_limits_by_size_class():
    for size, lim in (("small", 50), ("large", 200), ("xlarge", 320)):
        ep = Episode("e", "s", "EQA", size, (goal(),))
        assert ep.subtask_limit == lim and ep.episode_limit == 2 * lim
    with pytest.raises(ValueError):
        Episode("e", "s", "EQA", "medium", (goal(),))
    with pytest.raises(ValueError):
        Episode("e", "s", "EMN", "small", (goal(),))


def test_episode_file_round_trip(tmp_path):
    eps = [Episode("e1", "s", "EQA", "small", (goal(), goal(id="g2")))]
    p = tmp_path / "x.episodes.json"
    p.write_text(dump_episodes(eps))
    assert load_episodes(p) == eps
    p.write_text('{"episodes": [], "x": 1}')
    with pytest.raises(ValueError):
        load_episodes(p)
