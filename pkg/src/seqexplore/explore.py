"""Frontier detection, multi-factor scoring, hysteresis selection and planning."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from .geometry import (
    NEIGHBORS4,
    bfs_distances,
    cone_capacity,
    heading_angle,
    heading_step,
    nearest_heading,
    offset_angle,
    turns_between,
)
from .memory import FREE, OCCUPIED, UNKNOWN, SpatialMemory, novelty
from .world import Cell, Pose, raycast


class ExplorationExhausted(Exception):
    """No frontier is left to select."""


class Unreachable(Exception):
    pass


@dataclass
class Frontier:
    id: int
    x: Cell
    theta: float
    members: frozenset
    centroid: tuple = (0.0, 0.0)
    room_id: str | None = None
    cov: float = 0.0
    tau_novel: float = 0.0
    u_cone: int = 0
    distance: float | None = None
    distance_fallback: bool = False
    s_vlm: float = 0.0
    s_dist: float = 0.0
    s_exp: float = 0.0
    composite: float = 0.0
    approach: Cell | None = None  # reachable stand-in for x when x itself is cut off

    def record(self) -> dict:
        return {
            "id": self.id,
            "x": list(self.x),
            "approach": list(self.approach) if self.approach is not None else None,
            "theta": round(self.theta, 6),
            "size": len(self.members),
            "cov": self.cov,
            "tau_novel": self.tau_novel,
            "u_cone": self.u_cone,
            "distance": self.distance,
            "fallback": self.distance_fallback,
            "s_vlm": self.s_vlm,
            "s_dist": self.s_dist,
            "s_exp": self.s_exp,
            "composite": self.composite,
        }


@dataclass
class ScoringWeights:
    w_vlm: float = 0.4
    w_dist: float = 0.2
    w_exp: float = 0.4
    d_max: float | None = None
    u_max: int | None = None
    cone_depth: int | None = None
    cone_half_angle: float | None = None
    delta: float = 0.05
    min_cluster_size: int = 2

    def __post_init__(self):
        ws = (self.w_vlm, self.w_dist, self.w_exp)
        if any(w < 0 for w in ws) or sum(ws) <= 0:
            raise ValueError("weights must be nonnegative with a positive sum")
        total = sum(ws)
        self.w_vlm, self.w_dist, self.w_exp = (w / total for w in ws)
        if self.d_max is not None and self.d_max <= 0:
            raise ValueError("d_max must be positive")
        if self.u_max is not None and self.u_max < 1:
            raise ValueError("u_max must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")

    def resolve(self, width: int, height: int, sensor, n_headings: int = 8) -> "ScoringWeights":
        """Fill unset normalizers from map and sensor geometry."""
        depth = self.cone_depth if self.cone_depth is not None else sensor.max_range
        half = self.cone_half_angle if self.cone_half_angle is not None else sensor.half_angle
        return replace(
            self,
            d_max=self.d_max if self.d_max is not None else math.hypot(width, height),
            cone_depth=depth,
            cone_half_angle=half,
            u_max=self.u_max if self.u_max is not None else max(1, cone_capacity(depth, half, n_headings)),
        )


def frontier_mask(belief: np.ndarray) -> np.ndarray:
    unknown = np.pad(belief == UNKNOWN, 1, constant_values=False)
    near = unknown[:-2, 1:-1] | unknown[2:, 1:-1] | unknown[1:-1, :-2] | unknown[1:-1, 2:]
    return (belief == FREE) & near


def detect_frontiers(belief: np.ndarray, min_cluster_size: int = 2) -> list[Frontier]:
    mask = frontier_mask(belief)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    h, w = belief.shape
    clusters = []
    for k in range(1, n + 1):
        ys, xs = np.nonzero(labels == k)
        if len(xs) < min_cluster_size:
            continue
        members = [(int(x), int(y)) for x, y in zip(xs, ys)]
        cx, cy = float(xs.mean()), float(ys.mean())
        rep = min(members, key=lambda c: ((c[0] - cx) ** 2 + (c[1] - cy) ** 2, c[1], c[0]))
        sx = sy = 0
        first = None
        for x, y in members:
            for ox, oy in NEIGHBORS4:
                nx, ny = x + ox, y + oy
                if 0 <= nx < w and 0 <= ny < h and belief[ny, nx] == UNKNOWN:
                    sx, sy = sx + ox, sy + oy
                    first = first or (ox, oy)
        theta = offset_angle(sx, sy) if (sx or sy) else offset_angle(*first)
        clusters.append(((cy, cx, min(members, key=lambda c: (c[1], c[0]))), rep, theta, members, (cx, cy)))
    clusters.sort(key=lambda c: c[0])
    return [
        Frontier(i, rep, theta % 360.0, frozenset(members), centroid)
        for i, (_, rep, theta, members, centroid) in enumerate(clusters)
    ]


def _belief_ray_fns(belief: np.ndarray):
    h, w = belief.shape
    rows = belief.tolist()

    def blocked(x, y):
        return not (0 <= x < w and 0 <= y < h) or rows[y][x] == OCCUPIED

    def in_bounds(x, y):
        return 0 <= x < w and 0 <= y < h

    return blocked, in_bounds, rows


def unexplored_cone_count(
    belief: np.ndarray,
    apex: Cell,
    theta: float,
    depth: int,
    half_angle: float,
    n_headings: int | None = 8,
) -> int:
    """Unknown cells reachable by clear rays inside the cone at ``apex``.

    With ``n_headings`` set, the cone axis snaps to the nearest discrete
    heading so the count never exceeds the cone capacity.
    """
    if depth <= 0:
        return 0
    axis = heading_angle(nearest_heading(theta, n_headings), n_headings) if n_headings else theta
    blocked, in_bounds, rows = _belief_ray_fns(belief)
    clear, _ = raycast(blocked, in_bounds, apex, axis, depth, half_angle)
    return sum(1 for x, y in clear if rows[y][x] == UNKNOWN)


def simulated_view(belief: np.ndarray, apex: Cell, theta: float, depth: int, half_angle: float) -> set:
    """Cells a sensor at ``apex`` facing ``theta`` would see, unknown treated as open."""
    blocked, in_bounds, _ = _belief_ray_fns(belief)
    clear, _ = raycast(blocked, in_bounds, apex, theta, depth, half_angle)
    return clear


def annotate_frontiers(frontiers: Sequence[Frontier], memory: SpatialMemory, weights: ScoringWeights, n_headings: int = 8):
    """Attach room coverage, cone counts and view novelty to each frontier."""
    for f in frontiers:
        f.room_id = memory.room_of(f.x)
        f.cov = memory.room_table.get(f.room_id, 0.0) if f.room_id is not None else 0.0
        f.u_cone = unexplored_cone_count(
            memory.belief, f.x, f.theta, weights.cone_depth, weights.cone_half_angle, n_headings
        )
        view = simulated_view(memory.belief, f.x, f.theta, weights.cone_depth, weights.cone_half_angle)
        f.tau_novel = novelty(view, memory.bank.history_union)
    return frontiers


def score_frontier(
    frontier: Frontier,
    agent_cell: Cell,
    relevance: float,
    weights: ScoringWeights,
    distances: dict | None = None,
) -> Frontier:
    """Compute semantic, distance and exploration components and their blend.

    ``distances`` maps cells to geodesic distance from the agent over
    belief-free cells; a frontier missing from it falls back to the
    straight-line distance and is flagged.
    """
    if not 0.0 <= relevance <= 1.0:
        raise ValueError("relevance must lie in [0, 1]")
    if weights.d_max is None or weights.u_max is None:
        raise ValueError("weights must be resolved before scoring")
    goal = frontier.x if frontier.approach is None else frontier.approach
    d = None if distances is None else distances.get(goal)
    fallback = d is None
    if fallback:
        d = math.hypot(frontier.x[0] - agent_cell[0], frontier.x[1] - agent_cell[1])
    frontier.distance = float(d)
    frontier.distance_fallback = fallback
    frontier.s_vlm = relevance
    frontier.s_dist = 1.0 / (1.0 + d / weights.d_max)
    frontier.s_exp = 0.5 * (1.0 - frontier.cov + frontier.u_cone / weights.u_max)
    frontier.composite = (
        weights.w_vlm * frontier.s_vlm + weights.w_dist * frontier.s_dist + weights.w_exp * frontier.s_exp
    )
    return frontier


def select_frontier(frontiers: Sequence[Frontier], current_id: int | None, delta: float) -> Frontier:
    """Argmax with a switching threshold around the current target."""
    if not frontiers:
        raise ExplorationExhausted("no frontiers")
    best = max(frontiers, key=lambda f: (f.composite, -f.id))
    current = next((f for f in frontiers if f.id == current_id), None)
    if current is None:
        return best
    if best.composite - current.composite >= delta:
        return best
    return current


def match_frontier(previous: Frontier | None, frontiers: Sequence[Frontier]) -> Frontier | None:
    """The frontier that continues ``previous`` after re-detection, if any."""
    if previous is None:
        return None
    best, overlap = None, 0
    for f in frontiers:
        k = len(f.members & previous.members)
        if k > overlap:
            best, overlap = f, k
    return best


def approach_cell(frontier: Frontier, distances: dict) -> Cell | None:
    """``x`` if reachable, else the reachable member closest to the centroid."""
    if frontier.x in distances:
        return frontier.x
    cx, cy = frontier.centroid
    ok = [c for c in frontier.members if c in distances]
    if not ok:
        return None
    return min(ok, key=lambda c: ((c[0] - cx) ** 2 + (c[1] - cy) ** 2, c[1], c[0]))


def passable(belief: np.ndarray):
    return (belief == FREE).tolist()


def plan_path(belief: np.ndarray, start: Pose, goal: Cell, n_headings: int = 8) -> tuple[list[str], list[Cell]]:
    """Shortest 4-connected route over belief-free cells, as discrete actions.

    Among shortest routes each hop prefers the neighbour needing the fewest
    turns.  Raises Unreachable when no route exists.
    """
    grid = passable(belief)
    if not (grid[start.cell[1]][start.cell[0]] and grid[goal[1]][goal[0]]):
        raise Unreachable(f"endpoints must be free in belief: {start.cell} -> {goal}")
    dist = bfs_distances(grid, goal)
    if start.cell not in dist:
        raise Unreachable(f"no route {start.cell} -> {goal}")
    return route_actions(dist, start, n_headings)


def route_actions(dist: dict, start: Pose, n_headings: int = 8) -> tuple[list[str], list[Cell]]:
    cell, heading = start.cell, start.heading
    actions: list[str] = []
    cells = [cell]
    while dist[cell] > 0:
        d = dist[cell]
        options = []
        for h in range(n_headings):
            dx, dy = heading_step(h, n_headings)
            if dx and dy:
                continue
            nxt = (cell[0] + dx, cell[1] + dy)
            if dist.get(nxt) == d - 1:
                t = turns_between(heading, h, n_headings)
                options.append((abs(t), -t, h, nxt))
        _, _, h, nxt = min(options)
        t = turns_between(heading, h, n_headings)
        actions += ["turn-left"] * t if t > 0 else ["turn-right"] * (-t)
        actions.append("move-forward")
        cell, heading = nxt, h
        cells.append(cell)
    return actions, cells


def belief_distances(belief: np.ndarray, source: Cell) -> dict:
    return bfs_distances(passable(belief), source)


def frontier_cells_exist(belief: np.ndarray) -> bool:
    return bool(frontier_mask(belief).any())
