"""Seeded scenario and episode generation.

Layouts come from binary space partitioning of the interior; a random
spanning tree over wall-sharing rooms places the doors, so every generated
scene is connected.  Goals are drawn per category from what the scene can
support unambiguously.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass

from .tasks import (
    ABSENT_CATEGORIES,
    ABSENT_ROOM_LABELS,
    COLORS,
    EQA_ANSWERABLE,
    EMN_MODALITIES,
    EQA_UNANSWERABLE,
    FUNCTIONS,
    INFEASIBLE,
    ROOM_LABELS,
    STATES,
    Episode,
    Goal,
    attribute_question,
    count_question,
    functional_question,
    location_question,
    spatial_question,
)
from .world import World, geodesic_field, parse_scenario

# (width, height, min rooms, max rooms)
LAYOUTS = {
    "small": (12, 10, 2, 3),
    "large": (20, 14, 4, 5),
    "xlarge": (28, 20, 6, 7),
}
MIN_SIDE = 3

ROOM_OBJECTS = {
    "kitchen": ("stove", "sink", "refrigerator", "microwave", "cabinet", "chair", "clock"),
    "bedroom": ("bed", "lamp", "pillow", "mirror", "cabinet", "rug", "painting"),
    "bathroom": ("toilet", "bathtub", "sink", "mirror", "cabinet", "plant"),
    "living room": ("sofa", "television", "lamp", "rug", "plant", "painting", "bookshelf", "chair"),
    "dining room": ("dining table", "chair", "clock", "painting", "cabinet", "plant"),
    "office": ("desk", "chair", "bookshelf", "lamp", "clock", "plant"),
    "laundry room": ("washing machine", "sink", "cabinet", "mirror"),
    "hallway": ("painting", "plant", "rug", "clock", "mirror"),
}


class GenerationError(ValueError):
    pass


@dataclass
class GenParams:
    size_class: str = "small"
    n_rooms: int | None = None
    objects_per_room: tuple = (2, 4)
    door_width: int = 2
    infeasible_ratio: float = 0.4
    emn_goals: tuple = (5, 10)

    def __post_init__(self):
        if self.size_class not in LAYOUTS:
            raise GenerationError(f"unknown size class {self.size_class!r}")
        if self.n_rooms is not None and not 1 <= self.n_rooms <= len(ROOM_LABELS):
            raise GenerationError(f"room count must lie in 1..{len(ROOM_LABELS)}")
        a, b = self.objects_per_room
        if not 1 <= a <= b:
            raise GenerationError("objects_per_room must satisfy 1 <= min <= max")
        if self.door_width < 1:
            raise GenerationError("door_width must be >= 1")
        if not 0.0 <= self.infeasible_ratio <= 1.0:
            raise GenerationError("infeasible_ratio must lie in [0, 1]")
        if not 1 <= self.emn_goals[0] <= self.emn_goals[1]:
            raise GenerationError("emn_goals must satisfy 1 <= min <= max")


# -- layout --------------------------------------------------------------------


def _partition(rng: random.Random, width: int, height: int, n: int) -> list[tuple]:
    rects = [(1, 1, width - 2, height - 2)]
    while len(rects) < n:
        splittable = []
        for r in rects:
            w, h = r[2] - r[0] + 1, r[3] - r[1] + 1
            if max(w, h) >= 2 * MIN_SIDE + 1:
                splittable.append(r)
        if not splittable:
            raise GenerationError(f"cannot fit {n} rooms in {width}x{height}")
        r = max(splittable, key=lambda r: ((r[2] - r[0] + 1) * (r[3] - r[1] + 1), r))
        rects.remove(r)
        x0, y0, x1, y1 = r
        if x1 - x0 >= y1 - y0:
            c = rng.randint(x0 + MIN_SIDE, x1 - MIN_SIDE)
            rects += [(x0, y0, c - 1, y1), (c + 1, y0, x1, y1)]
        else:
            c = rng.randint(y0 + MIN_SIDE, y1 - MIN_SIDE)
            rects += [(x0, y0, x1, c - 1), (x0, c + 1, x1, y1)]
    return sorted(rects, key=lambda r: (r[1], r[0]))


def _shared_walls(rects: list[tuple]) -> dict[tuple, list]:
    """Wall cells separating each pair of rooms by a single-cell wall."""
    walls = {}
    for i, a in enumerate(rects):
        for j in range(i + 1, len(rects)):
            b = rects[j]
            cells = []
            for p, q in ((a, b), (b, a)):
                if p[2] + 2 == q[0]:
                    cells = [(p[2] + 1, y) for y in range(max(p[1], q[1]), min(p[3], q[3]) + 1)]
                elif p[3] + 2 == q[1]:
                    cells = [(x, p[3] + 1) for x in range(max(p[0], q[0]), min(p[2], q[2]) + 1)]
                if cells:
                    break
            if cells:
                walls[(i, j)] = cells
    return walls


def _spanning_doors(rng: random.Random, n: int, walls: dict) -> list[tuple]:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edges = sorted(walls)
    rng.shuffle(edges)
    chosen = []
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((i, j))
    if len({find(i) for i in range(n)}) != 1:
        raise GenerationError("partition left rooms without a shared wall")
    return sorted(chosen)


def generate_scenario(name: str, params: GenParams, rng: random.Random) -> dict:
    width, height, lo, hi = LAYOUTS[params.size_class]
    n = params.n_rooms or rng.randint(lo, hi)
    rects = _partition(rng, width, height, n)
    grid = [["#"] * width for _ in range(height)]
    for x0, y0, x1, y1 in rects:
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                grid[y][x] = "."
    labels = rng.sample(ROOM_LABELS, n)
    extra = {i: [] for i in range(n)}
    walls = _shared_walls(rects)
    for i, j in _spanning_doors(rng, n, walls):
        cells = walls[(i, j)]
        k = min(params.door_width, len(cells))
        s = rng.randint(0, len(cells) - k)
        for c in cells[s:s + k]:
            grid[c[1]][c[0]] = "."
            extra[i].append(list(c))

    rooms, objects = [], []
    counter = 0
    for i, (x0, y0, x1, y1) in enumerate(rects):
        rid = f"r{i + 1}"
        room = {"id": rid, "label": labels[i], "rects": [[x0, y0, x1, y1]]}
        if extra[i]:
            room["cells"] = sorted(extra[i])
        rooms.append(room)
        spots = [(x, y) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]
        k = min(rng.randint(*params.objects_per_room), len(spots))
        for cell in sorted(rng.sample(spots, k), key=lambda c: (c[1], c[0])):
            counter += 1
            objects.append({
                "id": f"o{counter}",
                "category": rng.choice(ROOM_OBJECTS[labels[i]]),
                "attributes": {"color": rng.choice(COLORS), "state": rng.choice(STATES)},
                "cell": list(cell),
                "room": rid,
            })

    free = [(x, y) for y in range(height) for x in range(width) if grid[y][x] == "."]
    start = rng.choice(free)
    doc = {
        "name": name,
        "size_class": params.size_class,
        "cell_size_m": 0.25,
        "grid": ["".join(row) for row in grid],
        "rooms": rooms,
        "objects": objects,
        "start": {"cell": list(start), "heading": rng.randrange(8)},
    }
    world = parse_scenario(doc)
    if len(geodesic_field(world, world.start.cell)) != len(free):
        raise GenerationError("generated scenario is not connected")
    return doc


# -- goals ---------------------------------------------------------------------


def _index(world: World):
    by_room: dict[str, list] = {rid: [] for rid in world.rooms}
    for o in world.objects.values():
        by_room[o.room_id].append(o)
    for objs in by_room.values():
        objs.sort(key=lambda o: o.id)
    house = Counter(o.category for o in world.objects.values())
    return by_room, house


def _label(world, rid):
    return world.rooms[rid].label


def _eqa_object(world, rng, by_room, house):
    options = []
    for rid, objs in by_room.items():
        counts = Counter(o.category for o in objs)
        options += [(rid, o) for o in objs if counts[o.category] == 1]
    if not options:
        return None
    rid, o = rng.choice(sorted(options, key=lambda p: p[1].id))
    asked = rng.choice(("color", "state"))
    return attribute_question(asked, o.category, _label(world, rid)), o.attributes[asked]


def _eqa_location(world, rng, by_room, house):
    unique = sorted((o for o in world.objects.values() if house[o.category] == 1), key=lambda o: o.id)
    if not unique:
        return None
    o = rng.choice(unique)
    return location_question(o.category), _label(world, o.room_id)


def _eqa_spatial(world, rng, by_room, house):
    options = []
    for rid, objs in by_room.items():
        counts = Counter(o.category for o in objs)
        for anchor in objs:
            if counts[anchor.category] != 1 or len(objs) < 2:
                continue
            ax, ay = anchor.cell
            d = sorted(((o.cell[0] - ax) ** 2 + (o.cell[1] - ay) ** 2, o.id, o) for o in objs if o is not anchor)
            if len(d) > 1 and d[0][0] == d[1][0]:
                continue
            options.append((rid, anchor, d[0][2]))
    if not options:
        return None
    rid, anchor, near = rng.choice(options)
    return spatial_question(anchor.category, _label(world, rid)), near.category


def _eqa_functional(world, rng, by_room, house):
    options = []
    for rid, objs in by_room.items():
        cats = sorted({o.category for o in objs if o.category in FUNCTIONS})
        options += [(rid, c) for c in cats]
    if not options:
        return None
    rid, cat = rng.choice(options)
    return functional_question(FUNCTIONS[cat], _label(world, rid)), cat


def _eqa_local_count(world, rng, by_room, house):
    options = sorted({(rid, o.category) for rid, objs in by_room.items() for o in objs})
    if not options:
        return None
    rid, cat = rng.choice(options)
    n = sum(1 for o in by_room[rid] if o.category == cat)
    return count_question(cat, _label(world, rid)), str(n)


def _eqa_global_count(world, rng, by_room, house):
    if not house:
        return None
    cat = rng.choice(sorted(house))
    return count_question(cat, "house"), str(house[cat])


def _eqa_incorrect_location(world, rng, by_room, house):
    options = [
        (rid, cat)
        for rid, objs in sorted(by_room.items())
        for cat in sorted(house)
        if all(o.category != cat for o in objs)
    ]
    if not options:
        return None
    rid, cat = rng.choice(options)
    return attribute_question(rng.choice(("color", "state")), cat, _label(world, rid)), INFEASIBLE


def _eqa_incorrect_attribute(world, rng, by_room, house):
    options = []
    for rid, objs in sorted(by_room.items()):
        for cat in sorted({o.category for o in objs}):
            used = {o.attributes["color"] for o in objs if o.category == cat}
            wrong = [c for c in COLORS if c not in used]
            options += [(rid, cat, c) for c in wrong]
    if not options:
        return None
    rid, cat, color = rng.choice(options)
    return attribute_question("state", cat, _label(world, rid), qualifier=color), INFEASIBLE


def _eqa_object_not_present(world, rng, by_room, house):
    cat = rng.choice([c for c in ABSENT_CATEGORIES if c not in house])
    return location_question(cat), INFEASIBLE


def _eqa_room_not_present(world, rng, by_room, house):
    present = {r.label for r in world.rooms.values()}
    label = rng.choice([r for r in ABSENT_ROOM_LABELS if r not in present])
    cat = rng.choice(sorted(house) or list(ROOM_OBJECTS["hallway"]))
    return attribute_question(rng.choice(("color", "state")), cat, label), INFEASIBLE


EQA_MAKERS = {
    "object": _eqa_object,
    "location": _eqa_location,
    "spatial": _eqa_spatial,
    "functional": _eqa_functional,
    "local-count": _eqa_local_count,
    "global-count": _eqa_global_count,
    "incorrect-location": _eqa_incorrect_location,
    "incorrect-attribute": _eqa_incorrect_attribute,
    "object-not-present": _eqa_object_not_present,
    "room-not-present": _eqa_room_not_present,
}


def _eqa_goal(world, rng, category, gid, idx) -> Goal | None:
    made = EQA_MAKERS[category](world, rng, *idx)
    if made is None:
        return None
    text, answer = made
    return Goal(gid, "EQA", category, text, answer != INFEASIBLE, answer)


def eqa_episode(world: World, rng: random.Random, eid: str, n_answerable=3, n_unanswerable=2,
                unanswerable: tuple | None = None) -> Episode:
    idx = _index(world)
    goals = []
    pool = list(EQA_ANSWERABLE)
    rng.shuffle(pool)
    for cat in pool:
        if len(goals) == n_answerable:
            break
        g = _eqa_goal(world, rng, cat, "", idx)
        if g is not None:
            goals.append(g)
    if len(goals) < n_answerable:
        raise GenerationError(f"{world.name}: too few answerable question types")
    cats = list(unanswerable) if unanswerable else rng.sample(EQA_UNANSWERABLE, n_unanswerable)
    for cat in cats:
        g = _eqa_goal(world, rng, cat, "", idx)
        if g is None:
            raise GenerationError(f"{world.name}: cannot pose a {cat} question")
        goals.append(g)
    rng.shuffle(goals)
    goals = [Goal(f"{eid}-q{i + 1}", g.track, g.category, g.text, g.feasible, g.answer) for i, g in enumerate(goals)]
    return Episode(eid, world.name, "EQA", world.size_class, tuple(goals))


def _matching(world, category, attributes=None, room=None):
    out = []
    for o in world.objects.values():
        if o.category != category:
            continue
        if attributes and any(o.attributes.get(k) != v for k, v in attributes.items()):
            continue
        if room is not None and world.rooms[o.room_id].label != room:
            continue
        out.append(o.id)
    return tuple(sorted(out))


def _emn_goal(world, rng, modality, feasible, gid) -> Goal:
    objs = sorted(world.objects.values(), key=lambda o: o.id)
    o = rng.choice(objs)
    if modality == "object":
        cat = o.category if feasible else rng.choice([c for c in ABSENT_CATEGORIES if c not in {x.category for x in objs}])
        spec = {"category": cat}
        text = f"Find a {cat}."
        targets = _matching(world, cat) if feasible else ()
    elif modality == "language":
        room = world.rooms[o.room_id].label
        color = o.attributes["color"]
        if not feasible:
            # the described combination exists nowhere in this scene
            taken = {x.attributes["color"] for x in objs if x.category == o.category and x.room_id == o.room_id}
            color = rng.choice([c for c in COLORS if c not in taken])
        spec = {"category": o.category, "attributes": {"color": color}, "room": room}
        text = f"Find the {color} {o.category} in the {room}."
        targets = _matching(world, o.category, {"color": color}, room) if feasible else ()
    else:
        scene = world.name if feasible else f"{world.name}-elsewhere"
        spec = {"category": o.category, "attributes": dict(o.attributes), "scene": scene}
        text = f"Find the object shown in image {scene}/{o.id}."
        targets = _matching(world, o.category, o.attributes) if feasible else ()
    answer = ",".join(targets) if feasible else INFEASIBLE
    return Goal(gid, "EMN", modality, text, feasible, answer, spec, targets)


def emn_episode(world: World, rng: random.Random, eid: str, params: GenParams = GenParams(),
                infeasible_modalities: tuple | None = None) -> Episode:
    n = rng.randint(*params.emn_goals)
    n_inf = int(round(params.infeasible_ratio * n))
    mods = list(infeasible_modalities or ())
    while len(mods) < n_inf:
        mods.append(rng.choice(EMN_MODALITIES))
    plan = [(m, False) for m in mods[:n_inf]] + [(rng.choice(EMN_MODALITIES), True) for _ in range(n - n_inf)]
    rng.shuffle(plan)
    goals = tuple(_emn_goal(world, rng, m, f, f"{eid}-g{i + 1}") for i, (m, f) in enumerate(plan))
    return Episode(eid, world.name, "EMN", world.size_class, goals)



def generate(seed: int, name: str, params: GenParams = GenParams(), track: str = "EQA",
             n_episodes: int = 1) -> tuple[dict, list[Episode]]:
    """One scenario plus ``n_episodes`` episodes on it, fully determined by ``seed``."""
    if track not in ("EQA", "EMN"):
        raise GenerationError("track must be EQA or EMN")
    if n_episodes < 1:
        raise GenerationError("n_episodes must be >= 1")
    rng = random.Random(f"{seed}:{name}")
    doc = generate_scenario(name, params, rng)
    world = parse_scenario(doc)
    episodes = []
    for k in range(n_episodes):
        eid = f"{name}-{track.lower()}{k + 1}"
        ep = eqa_episode(world, rng, eid) if track == "EQA" else emn_episode(world, rng, eid, params)
        episodes.append(ep)
    return doc, episodes


def generate_suite(seed: int, n_episodes: int = 30, size_classes=("small", "large", "xlarge")) -> list[tuple[dict, Episode]]:
    """Alternating EQA/EMN episodes, one scene each, covering every infeasible category.

    Infeasible categories are dealt round-robin so each appears in the suite.
    """
    eqa_cycle = list(EQA_UNANSWERABLE)
    emn_cycle = list(EMN_MODALITIES)
    out = []
    for k in range(n_episodes):
        size = size_classes[k % len(size_classes)]
        name = f"gen{seed}-{k:02d}"
        params = GenParams(size_class=size)
        sub = random.Random(f"{seed}:{k}")
        doc = generate_scenario(name, params, sub)
        world = parse_scenario(doc)
        if k % 2 == 0:
            picks = (eqa_cycle[(k // 2 * 2) % 4], eqa_cycle[(k // 2 * 2 + 1) % 4])
            ep = eqa_episode(world, sub, f"{name}-eqa", unanswerable=picks)
        else:
            start = (k // 2) % 3
            ep = emn_episode(world, sub, f"{name}-emn", params, infeasible_modalities=tuple(emn_cycle[start:] + emn_cycle[:start]))
        out.append((doc, ep))
    return out
