"""Ground-truth gridworld: scenario loading, kinematics and FoV sensing."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .geometry import (
    bfs_distances,
    cone_offsets,
    heading_angle,
    heading_step,
    line_interior,
)

Cell = tuple[int, int]

SIZE_CLASSES = ("small", "large", "xlarge")
ACTIONS = ("turn-left", "turn-right", "move-forward", "stop")

_TOP_KEYS = {"name", "size_class", "cell_size_m", "grid", "rooms", "objects", "start", "headings"}
_ROOM_KEYS = {"id", "label", "rects", "cells"}
_OBJECT_KEYS = {"id", "category", "attributes", "cell", "room"}
_START_KEYS = {"cell", "heading"}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Room:
    id: str
    label: str
    cells: frozenset


@dataclass(frozen=True)
class SceneObject:
    id: str
    category: str
    attributes: dict
    cell: Cell
    room_id: str | None


@dataclass(frozen=True)
class Pose:
    cell: Cell
    heading: int


@dataclass(frozen=True)
class SensorModel:
    max_range: int = 14
    half_angle: float = 45.0
    occlusion: bool = True

    def __post_init__(self):
        if self.max_range < 1:
            raise ValueError("max_range must be >= 1")
        if not 0 < self.half_angle <= 180:
            raise ValueError("half_angle must be in (0, 180]")
        if not self.occlusion:
            raise ValueError("occlusion cannot be disabled")


@dataclass(frozen=True)
class VisibleSet:
    """Free cells and objects in view; ``wall_hits`` are the walls the rays ended on."""

    cells: frozenset
    objects: frozenset = frozenset()
    wall_hits: frozenset = frozenset()


@dataclass
class World:
    name: str
    walls: np.ndarray  # bool [height, width]
    rooms: dict[str, Room]
    objects: dict[str, SceneObject]
    start: Pose
    size_class: str = "small"
    cell_size_m: float = 0.25
    n_headings: int = 8
    source: dict | None = field(default=None, repr=False)
    _room_of: dict = field(default_factory=dict, repr=False)
    _wall_rows: list = field(default_factory=list, repr=False)
    _objects_at: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.walls.setflags(write=False)
        self._wall_rows = self.walls.tolist()
        self._room_of = {c: r.id for r in self.rooms.values() for c in r.cells}
        self._objects_at = {}
        for o in self.objects.values():
            self._objects_at.setdefault(o.cell, []).append(o.id)

    @property
    def height(self) -> int:
        return self.walls.shape[0]

    @property
    def width(self) -> int:
        return self.walls.shape[1]

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self._wall_rows[cell[1]][cell[0]]

    def room_of(self, cell: Cell) -> str | None:
        return self._room_of.get(cell)

    def objects_at(self, cell: Cell) -> list[str]:
        return self._objects_at.get(cell, [])

    def free_cells(self) -> list[Cell]:
        ys, xs = np.nonzero(~self.walls)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def room_map(self) -> dict[Cell, str]:
        return dict(self._room_of)


def _cell(value, what: str) -> Cell:
    if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, int) for v in value)):
        raise ScenarioError(f"{what}: expected [x, y] integer pair, got {value!r}")
    return (value[0], value[1])


def _check_keys(d: dict, allowed: set, what: str, required: Iterable[str] = ()):
    if not isinstance(d, dict):
        raise ScenarioError(f"{what}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioError(f"{what}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ScenarioError(f"{what}: missing keys {missing}")


def parse_scenario(doc: dict[str, Any]) -> World:
    _check_keys(doc, _TOP_KEYS, "scenario", required=("grid", "rooms", "objects", "start", "size_class"))
    grid = doc["grid"]
    if not grid or not all(isinstance(r, str) for r in grid):
        raise ScenarioError("grid: expected a nonempty list of strings")
    width = len(grid[0])
    if any(len(r) != width for r in grid) or width == 0:
        raise ScenarioError("grid: rows must have equal nonzero length")
    bad = {ch for row in grid for ch in row} - {"#", "."}
    if bad:
        raise ScenarioError(f"grid: unknown characters {sorted(bad)}")
    walls = np.array([[ch == "#" for ch in row] for row in grid], dtype=bool)
    if walls.all():
        raise ScenarioError("grid: no free cells")

    def free(c: Cell) -> bool:
        return 0 <= c[0] < width and 0 <= c[1] < len(grid) and not walls[c[1], c[0]]

    size_class = doc["size_class"]
    if size_class not in SIZE_CLASSES:
        raise ScenarioError(f"size_class must be one of {SIZE_CLASSES}")
    cell_size = float(doc.get("cell_size_m", 0.25))
    if cell_size <= 0:
        raise ScenarioError("cell_size_m must be positive")
    n_headings = doc.get("headings", 8)
    if n_headings not in (4, 8):
        raise ScenarioError("headings must be 4 or 8")

    rooms: dict[str, Room] = {}
    owner: dict[Cell, str] = {}
    for i, rd in enumerate(doc["rooms"]):
        _check_keys(rd, _ROOM_KEYS, f"rooms[{i}]", required=("id", "label"))
        rid, label = str(rd["id"]), rd["label"]
        if not isinstance(label, str) or not label.strip():
            raise ScenarioError(f"room {rid}: label must be nonempty")
        if rid in rooms:
            raise ScenarioError(f"duplicate room id {rid}")
        cells = set()
        for rect in rd.get("rects", []):
            if not (isinstance(rect, list) and len(rect) == 4 and all(isinstance(v, int) for v in rect)):
                raise ScenarioError(f"room {rid}: rect must be [x0, y0, x1, y1]")
            x0, y0, x1, y1 = rect
            for y in range(min(y0, y1), max(y0, y1) + 1):
                for x in range(min(x0, x1), max(x0, x1) + 1):
                    if free((x, y)):
                        cells.add((x, y))
        for c in rd.get("cells", []):
            c = _cell(c, f"room {rid} cell")
            if not free(c):
                raise ScenarioError(f"room {rid}: cell {c} is not free")
            cells.add(c)
        if not cells:
            raise ScenarioError(f"room {rid}: no free cells")
        for c in cells:
            if c in owner:
                raise ScenarioError(f"overlapping rooms {owner[c]} and {rid} at {c}")
            owner[c] = rid
        rooms[rid] = Room(rid, label.strip(), frozenset(cells))

    objects: dict[str, SceneObject] = {}
    for i, od in enumerate(doc["objects"]):
        _check_keys(od, _OBJECT_KEYS, f"objects[{i}]", required=("id", "category", "cell"))
        oid = str(od["id"])
        if oid in objects:
            raise ScenarioError(f"duplicate object id {oid}")
        category = od["category"]
        if not isinstance(category, str) or not category.strip():
            raise ScenarioError(f"object {oid}: category must be nonempty")
        cell = _cell(od["cell"], f"object {oid} cell")
        if not free(cell):
            raise ScenarioError(f"object {oid}: object outside free space at {cell}")
        attrs = od.get("attributes", {})
        if not isinstance(attrs, dict) or not all(isinstance(v, str) for v in attrs.values()):
            raise ScenarioError(f"object {oid}: attributes must map names to strings")
        room_id = owner.get(cell)
        if "room" in od and od["room"] is not None:
            if str(od["room"]) not in rooms:
                raise ScenarioError(f"object {oid}: unknown room {od['room']}")
            if room_id != str(od["room"]):
                raise ScenarioError(f"object {oid}: object outside its room {od['room']}")
        objects[oid] = SceneObject(oid, category.strip(), dict(sorted(attrs.items())), cell, room_id)

    _check_keys(doc["start"], _START_KEYS, "start", required=("cell",))
    start_cell = _cell(doc["start"]["cell"], "start cell")
    if not free(start_cell):
        raise ScenarioError(f"start cell {start_cell} is not free")
    heading = doc["start"].get("heading", 0)
    if not isinstance(heading, int) or not 0 <= heading < n_headings:
        raise ScenarioError(f"start heading must be an integer in [0, {n_headings})")

    return World(
        name=str(doc.get("name", "scenario")),
        walls=walls,
        rooms=rooms,
        objects=objects,
        start=Pose(start_cell, heading),
        size_class=size_class,
        cell_size_m=cell_size,
        n_headings=n_headings,
        source=doc,
    )


def load_scenario(source: str | Path | dict) -> World:
    """Build a World from a scenario document, a JSON string, or a file path."""
    if isinstance(source, dict):
        return parse_scenario(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        source = Path(source).read_text()
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario is not valid JSON: {e}") from e
    return parse_scenario(doc)


def raycast(
    blocked: Callable[[int, int], bool],
    in_bounds: Callable[[int, int], bool],
    origin: Cell,
    axis: float,
    depth: int,
    half_angle: float,
):
    """Cells in a view cone whose line of sight from ``origin`` is clear.

    Returns ``(clear, hit)`` where ``hit`` holds the blocking cells reached
    directly (their own interior is clear).  The origin is always clear.
    """
    ox, oy = origin
    clear = {origin}
    hit = set()
    for dx, dy in cone_offsets(depth, half_angle, axis):
        tx, ty = ox + dx, oy + dy
        if not in_bounds(tx, ty):
            continue
        ok = True
        for ix, iy in line_interior(dx, dy):
            if blocked(ox + ix, oy + iy):
                ok = False
                break
        if not ok:
            continue
        if blocked(tx, ty):
            hit.add((tx, ty))
        else:
            clear.add((tx, ty))
    return clear, hit


def raycast_fov(world: World, pose: Pose, sensor: SensorModel = SensorModel()) -> VisibleSet:
    rows = world._wall_rows
    w, h = world.width, world.height

    def blocked(x, y):
        return not (0 <= x < w and 0 <= y < h) or rows[y][x]

    def in_bounds(x, y):
        return 0 <= x < w and 0 <= y < h

    axis = heading_angle(pose.heading, world.n_headings)
    cells, hits = raycast(blocked, in_bounds, pose.cell, axis, sensor.max_range, sensor.half_angle)
    objs = frozenset(oid for c in cells for oid in world.objects_at(c))
    return VisibleSet(frozenset(cells), objs, frozenset(hits))


def apply_action(world: World, pose: Pose, action: str) -> tuple[Pose, int]:
    """Advance one discrete action; every action costs one step."""
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}")
    n = world.n_headings
    if action == "turn-left":
        return Pose(pose.cell, (pose.heading + 1) % n), 1
    if action == "turn-right":
        return Pose(pose.cell, (pose.heading - 1) % n), 1
    if action == "stop":
        return pose, 1
    dx, dy = heading_step(pose.heading, n)
    x, y = pose.cell
    target = (x + dx, y + dy)
    if not world.is_free(target):
        return pose, 1
    # diagonal moves may not cut a wall corner
    if dx and dy and not (world.is_free((x + dx, y)) and world.is_free((x, y + dy))):
        return pose, 1
    return Pose(target, pose.heading), 1


def geodesic_distance(world: World, a: Cell, b: Cell) -> int | None:
    """Shortest 4-connected path length over true free cells; None if unreachable."""
    if not (world.is_free(a) and world.is_free(b)):
        raise ValueError("geodesic endpoints must be free cells")
    if a == b:
        return 0
    return bfs_distances(_free_rows(world), a).get(b)


def geodesic_field(world: World, source: Cell) -> dict[Cell, int]:
    return bfs_distances(_free_rows(world), source)


def _free_rows(world: World):
    return [[not v for v in row] for row in world._wall_rows]


__all__ = [
    "ACTIONS",
    "Cell",
    "Pose",
    "Room",
    "SIZE_CLASSES",
    "ScenarioError",
    "SceneObject",
    "SensorModel",
    "VisibleSet",
    "World",
    "apply_action",
    "geodesic_distance",
    "geodesic_field",
    "load_scenario",
    "parse_scenario",
    "raycast",
    "raycast_fov",
]


def dump_scenario(doc: dict) -> str:
    """Scenario text with one grid row, room or object per line."""
    order = ["name", "size_class", "cell_size_m", "headings", "grid", "rooms", "objects", "start"]
    keys = [k for k in order if k in doc] + sorted(k for k in doc if k not in order)
    parts = []
    for k in keys:
        v = doc[k]
        if isinstance(v, list):
            body = ",\n".join(f"  {json.dumps(item, sort_keys=True)}" for item in v)
            parts.append(f' {json.dumps(k)}: [\n{body}\n ]')
        else:
            parts.append(f" {json.dumps(k)}: {json.dumps(v, sort_keys=True)}")
    return "{\n" + ",\n".join(parts) + "\n}\n"
