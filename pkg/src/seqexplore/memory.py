"""Unified spatial memory: occupancy belief, FoV coverage, keyframes, room coverage."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .world import Cell, Pose, VisibleSet, World

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
NOVELTY_REFERENCES = ("bank_union", "coverage_map")
KEYFRAME_CADENCES = ("every_step", "waypoint")


def novelty(candidate: VisibleSet | Iterable[Cell], history) -> float:
    """Fraction of the candidate footprint not already in ``history``."""
    cells = candidate.cells if isinstance(candidate, VisibleSet) else set(candidate)
    if not cells:
        raise ValueError("empty field of view")
    new = sum(1 for c in cells if c not in history)
    return new / len(cells)


@dataclass(frozen=True)
class Keyframe:
    id: int
    pose: Pose
    footprint: frozenset
    objects: frozenset
    novelty_at_capture: float
    new_cells: int
    step_index: int


@dataclass
class KeyframeBank:
    tau0: float = 0.25
    keyframes: list[Keyframe] = field(default_factory=list)
    history_union: set = field(default_factory=set)
    frames_seen: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tau0 <= 1.0:
            raise ValueError("tau0 must lie in [0, 1]")

    def maybe_save(self, pose: Pose, candidate: VisibleSet, step: int = 0, reference=None):
        """Apply the novelty gate; returns ``(saved, novelty)``.

        ``reference`` overrides the bank's own union as the history set.
        """
        history = self.history_union if reference is None else reference
        tau = novelty(candidate, history)
        self.frames_seen += 1
        if tau <= self.tau0:
            return False, tau
        new_cells = sum(1 for c in candidate.cells if c not in history)
        self.keyframes.append(
            Keyframe(
                id=len(self.keyframes),
                pose=pose,
                footprint=frozenset(candidate.cells),
                objects=frozenset(candidate.objects),
                novelty_at_capture=tau,
                new_cells=new_cells,
                step_index=step,
            )
        )
        self.history_union.update(candidate.cells)
        return True, tau

    def cost_ratio(self) -> float:
        """Stored keyframes over candidate frames (store-all baseline is 1.0)."""
        if self.frames_seen == 0:
            raise ValueError("no candidate frames seen")
        return len(self.keyframes) / self.frames_seen


def memory_cost_ratio(bank: KeyframeBank) -> float:
    return bank.cost_ratio()


@dataclass(frozen=True)
class UpdateSummary:
    newly_covered_count: int
    keyframe_saved: bool
    novelty: float | None
    rooms_touched: tuple


class SpatialMemory:
    """The agent's accumulated belief about one scene.

    Room geometry comes from the scenario labels, but a room only enters the
    coverage table once one of its cells has been seen.
    """

    def __init__(
        self,
        width: int,
        height: int,
        room_cells: dict[str, Iterable[Cell]],
        room_labels: dict[str, str] | None = None,
        tau0: float = 0.25,
        novelty_reference: str = "bank_union",
        keyframe_cadence: str = "every_step",
    ):
        if novelty_reference not in NOVELTY_REFERENCES:
            raise ValueError(f"novelty_reference must be one of {NOVELTY_REFERENCES}")
        if keyframe_cadence not in KEYFRAME_CADENCES:
            raise ValueError(f"keyframe_cadence must be one of {KEYFRAME_CADENCES}")
        self.width, self.height = width, height
        self.belief = np.zeros((height, width), dtype=np.int8)
        self.coverage = np.zeros((height, width), dtype=bool)
        self.bank = KeyframeBank(tau0)
        self.novelty_reference = novelty_reference
        self.keyframe_cadence = keyframe_cadence
        self.room_cells = {rid: frozenset(cells) for rid, cells in room_cells.items()}
        self.room_labels = dict(room_labels or {rid: rid for rid in self.room_cells})
        self.room_size = {rid: len(c) for rid, c in self.room_cells.items()}
        self._room_of = {c: rid for rid, cells in self.room_cells.items() for c in cells}
        self._covered_count = {rid: 0 for rid in self.room_cells}
        self.room_table: dict[str, float] = {}
        self._covered_cells: set = set()

    @classmethod
    def for_world(cls, world: World, **kw) -> "SpatialMemory":
        return cls(
            world.width,
            world.height,
            {r.id: r.cells for r in world.rooms.values()},
            {r.id: r.label for r in world.rooms.values()},
            **kw,
        )

    def room_of(self, cell: Cell) -> str | None:
        return self._room_of.get(cell)

    def is_covered(self, cell: Cell) -> bool:
        return cell in self._covered_cells

    @property
    def covered_cells(self) -> frozenset:
        return frozenset(self._covered_cells)

    def known_rooms(self) -> list[str]:
        return sorted(self.room_table)

    def room_coverage(self, room_id: str) -> float:
        if room_id not in self.room_table:
            raise KeyError(f"unknown room {room_id!r}")
        return self.room_table[room_id]

    def room_counts(self, room_id: str) -> tuple[int, int]:
        return self._covered_count[room_id], self.room_size[room_id]

    def integrate(
        self,
        pose: Pose,
        visible: VisibleSet,
        wall_hits: Iterable[Cell] | None = None,
        step: int = 0,
        candidate_frame: bool = True,
    ) -> UpdateSummary:
        """Fold one observation into coverage, occupancy, keyframes and rooms."""
        hits = visible.wall_hits if wall_hits is None else wall_hits
        saved, tau = False, None
        if self.keyframe_cadence == "every_step" or candidate_frame:
            reference = set(self._covered_cells) if self.novelty_reference == "coverage_map" else None
            saved, tau = self.bank.maybe_save(pose, visible, step, reference)

        newly = [c for c in visible.cells if c not in self._covered_cells]
        touched = set()
        for c in newly:
            self._covered_cells.add(c)
            x, y = c
            self.coverage[y, x] = True
            self.belief[y, x] = FREE
            rid = self._room_of.get(c)
            if rid is not None:
                self._covered_count[rid] += 1
                touched.add(rid)
        for x, y in hits:
            if self.belief[y, x] == UNKNOWN:
                self.belief[y, x] = OCCUPIED
        for rid in touched:
            self.room_table[rid] = self._covered_count[rid] / self.room_size[rid]
        return UpdateSummary(len(newly), saved, tau, tuple(sorted(touched)))

    def dump(self) -> str:
        """Line-oriented text export; identical runs give identical bytes."""
        lines = [
            f"memory width={self.width} height={self.height} tau0={self.bank.tau0!r} "
            f"reference={self.novelty_reference}",
            "coverage",
        ]
        for y in range(self.height):
            lines.append(f"{y}: {_rle(self.coverage[y].astype(int).tolist())}")
        lines.append("belief")
        for y in range(self.height):
            lines.append(f"{y}: {_rle(self.belief[y].tolist(), 'ufo')}")
        lines.append(f"keyframes stored={len(self.bank.keyframes)} frames_seen={self.bank.frames_seen}")
        for kf in self.bank.keyframes:
            objs = ",".join(sorted(kf.objects)) or "-"
            lines.append(
                f"kf {kf.id} step={kf.step_index} pose={kf.pose.cell[0]},{kf.pose.cell[1]},{kf.pose.heading} "
                f"novelty={kf.new_cells}/{len(kf.footprint)} objects={objs}"
            )
        lines.append("rooms")
        for rid in sorted(self.room_table):
            c, n = self.room_counts(rid)
            lines.append(f"{rid} {self.room_labels[rid]} {c}/{n}")
        return "\n".join(lines) + "\n"

    def state_digest(self) -> bytes:
        """Compact bytes for state hashing (pose is hashed separately)."""
        return b"".join(
            [
                self.belief.tobytes(),
                np.packbits(self.coverage).tobytes(),
                f"{len(self.bank.keyframes)}:{self.bank.frames_seen}".encode(),
            ]
        )


def _rle(values: list, symbols: str | None = None) -> str:
    runs = []
    prev, n = values[0], 0
    for v in values:
        if v == prev:
            n += 1
        else:
            runs.append((prev, n))
            prev, n = v, 1
    runs.append((prev, n))
    sym = (lambda v: symbols[v]) if symbols else str
    return " ".join(f"{sym(v)}x{n}" for v, n in runs)
