"""Lattice geometry shared by the simulator, the memory and the explorer.

Cells are ``(x, y)`` tuples with ``x`` the column and ``y`` the row (rows grow
downward).  Angles are degrees in the usual math frame (counter-clockwise,
``y`` up), so heading 0 is east and, with 8 headings, heading 2 is north.
"""
from __future__ import annotations

import math
from collections import deque
from functools import lru_cache

ANGLE_EPS = 1e-9

NEIGHBORS4 = ((1, 0), (0, -1), (-1, 0), (0, 1))
NEIGHBORS8 = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))


def heading_angle(heading: int, n_headings: int) -> float:
    return (heading % n_headings) * 360.0 / n_headings


def heading_step(heading: int, n_headings: int) -> tuple[int, int]:
    """Grid step ``(dx, dy)`` for one move-forward along a discrete heading."""
    a = math.radians(heading_angle(heading, n_headings))
    return (int(round(math.cos(a))), int(round(-math.sin(a))))


def offset_angle(dx: int, dy: int) -> float:
    return math.degrees(math.atan2(-dy, dx))


def angle_diff(a: float, b: float) -> float:
    """Absolute angular difference in degrees, in [0, 180]."""
    d = (a - b) % 360.0
    return min(d, 360.0 - d)


def nearest_heading(angle: float, n_headings: int) -> int:
    step = 360.0 / n_headings
    return int(math.floor((angle % 360.0) / step + 0.5)) % n_headings


def turns_between(h_from: int, h_to: int, n_headings: int) -> int:
    """Signed minimal number of left (+) or right (-) turns; ties turn left."""
    d = (h_to - h_from) % n_headings
    return d if d <= n_headings // 2 else d - n_headings


def line_interior(dx: int, dy: int) -> tuple[tuple[int, int], ...]:
    """Cells strictly between the origin and ``(dx, dy)`` on a Bresenham line.

    The minor coordinate is rounded half away from zero, which keeps the line
    symmetric under reflection of either axis.
    """
    return _line_interior(dx, dy)


@lru_cache(maxsize=None)
def _line_interior(dx: int, dy: int) -> tuple[tuple[int, int], ...]:
    adx, ady = abs(dx), abs(dy)
    sx = 1 if dx >= 0 else -1
    sy = 1 if dy >= 0 else -1
    out = []
    if adx >= ady:
        for t in range(1, adx):
            m = (2 * t * ady + adx) // (2 * adx)
            out.append((sx * t, sy * m))
    else:
        for t in range(1, ady):
            m = (2 * t * adx + ady) // (2 * ady)
            out.append((sx * m, sy * t))
    return tuple(out)


@lru_cache(maxsize=None)
def cone_offsets(depth: int, half_angle: float, axis: float) -> tuple[tuple[int, int], ...]:
    """Lattice offsets within Euclidean ``depth`` and ``half_angle`` of ``axis``.

    Excludes the origin; ordered by squared distance, then row, then column.
    """
    if depth <= 0:
        return ()
    out = []
    r2 = depth * depth
    for dy in range(-depth, depth + 1):
        for dx in range(-depth, depth + 1):
            if (dx, dy) == (0, 0) or dx * dx + dy * dy > r2:
                continue
            if half_angle < 180.0 and angle_diff(offset_angle(dx, dy), axis) > half_angle + ANGLE_EPS:
                continue
            out.append((dx, dy))
    out.sort(key=lambda o: (o[0] * o[0] + o[1] * o[1], o[1], o[0]))
    return tuple(out)


def cone_capacity(depth: int, half_angle: float, n_headings: int) -> int:
    """Largest cone cell count over the discrete headings (the ``U_max`` default)."""
    return max(
        len(cone_offsets(depth, half_angle, heading_angle(h, n_headings)))
        for h in range(n_headings)
    )


def bfs_distances(passable, source: tuple[int, int]) -> dict[tuple[int, int], int]:
    """4-connected hop counts from ``source`` over cells where ``passable[y][x]``."""
    h = len(passable)
    w = len(passable[0]) if h else 0
    sx, sy = source
    if not (0 <= sx < w and 0 <= sy < h) or not passable[sy][sx]:
        return {}
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x, y = queue.popleft()
        d = dist[(x, y)] + 1
        for ox, oy in NEIGHBORS4:
            nx, ny = x + ox, y + oy
            if 0 <= nx < w and 0 <= ny < h and passable[ny][nx] and (nx, ny) not in dist:
                dist[(nx, ny)] = d
                queue.append((nx, ny))
    return dist
