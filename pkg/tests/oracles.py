"""Slow, obviously-correct reference implementations used by the tests.

None of these import the code under test beyond plain data types.
"""
from __future__ import annotations

import math
from collections import deque
from fractions import Fraction


def round_half_away(q: Fraction) -> int:
    """Nearest integer to ``q``, halves rounded away from zero."""
    n = math.floor(abs(q) + Fraction(1, 2))
    return n if q >= 0 else -n


def los_interior(dx: int, dy: int) -> list:
    """Lattice cells strictly between the origin and (dx, dy), stepping the major axis."""
    steps = max(abs(dx), abs(dy))
    out = []
    for t in range(1, steps):
        if abs(dx) >= abs(dy):
            out.append((t if dx > 0 else -t, round_half_away(Fraction(dy * t, abs(dx)))))
        else:
            out.append((round_half_away(Fraction(dx * t, abs(dy))), t if dy > 0 else -t))
    return out


def in_cone(dx: int, dy: int, axis_deg: float, half_angle: float, depth: int) -> bool:
    if dx * dx + dy * dy > depth * depth:
        return False
    if half_angle >= 180.0:
        return True
    ax, ay = math.cos(math.radians(axis_deg)), math.sin(math.radians(axis_deg))
    # grid rows grow downward, the angle frame points up
    dot = dx * ax + (-dy) * ay
    return dot >= math.hypot(dx, dy) * math.cos(math.radians(half_angle)) - 1e-9


def fov(walls, origin, axis_deg, depth, half_angle):
    """(visible free cells, directly hit wall cells) by checking every cell."""
    h, w = len(walls), len(walls[0])

    def blocked(x, y):
        return not (0 <= x < w and 0 <= y < h) or walls[y][x]

    ox, oy = origin
    clear, hits = {origin}, set()
    for y in range(h):
        for x in range(w):
            dx, dy = x - ox, y - oy
            if (dx, dy) == (0, 0) or not in_cone(dx, dy, axis_deg, half_angle, depth):
                continue
            if any(blocked(ox + ix, oy + iy) for ix, iy in los_interior(dx, dy)):
                continue
            (hits if walls[y][x] else clear).add((x, y))
    return clear, hits


def bfs(passable, source):
    """Plain breadth-first hop counts over 4-neighbours."""
    h, w = len(passable), len(passable[0])
    dist = {source: 0}
    q = deque([source])
    while q:
        x, y = q.popleft()
        for nx, ny in ((x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)):
            if 0 <= nx < w and 0 <= ny < h and passable[ny][nx] and (nx, ny) not in dist:
                dist[(nx, ny)] = dist[(x, y)] + 1
                q.append((nx, ny))
    return dist


class UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self):
        out = {}
        for i in self.parent:
            out.setdefault(self.find(i), set()).add(i)
        return list(out.values())


UNKNOWN, FREE, OCCUPIED = 0, 1, 2


def frontier_clusters(belief, min_size=2):
    """Frontier cells by the per-cell predicate, grouped by 8-connectivity."""
    h, w = len(belief), len(belief[0])
    cells = []
    for y in range(h):
        for x in range(w):
            if belief[y][x] != FREE:
                continue
            for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if 0 <= nx < w and 0 <= ny < h and belief[ny][nx] == UNKNOWN:
                    cells.append((x, y))
                    break
    uf = UnionFind(cells)
    members = set(cells)
    for x, y in cells:
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if (x + dx, y + dy) in members:
                    uf.union((x, y), (x + dx, y + dy))
    return [g for g in uf.groups() if len(g) >= min_size]


def cone_unknown_count(belief, apex, axis_deg, depth, half_angle):
    walls = [[v == OCCUPIED for v in row] for row in belief]
    clear, _ = fov(walls, apex, axis_deg, depth, half_angle)
    return sum(1 for x, y in clear if belief[y][x] == UNKNOWN)


# -- metrics -------------------------------------------------------------------


def ssr_binary(success_tables):
    """success_tables: per episode, a list of 0/1 subtask outcomes."""
    return 100.0 * sum(1 for t in success_tables if all(t)) / len(success_tables)


def ssr_eqa(sigma_tables):
    total = 0.0
    for sig in sigma_tables:
        s = 0
        for v in sig:
            s += v - 3
        total += max(0, s) / (2 * len(sig))
    return 100.0 * total / len(sigma_tables)


def sspl(episodes):
    """episodes: (credit in [0, 1], steps, limit) triples."""
    return 100.0 * sum(c * (lim - s) / lim for c, s, lim in episodes) / len(episodes)


def select_reference(scores_seq, delta):
    """Target index per round: argmax, but keep the current one unless beaten by delta."""
    current = None
    out = []
    for scores in scores_seq:
        best = 0
        for i in range(1, len(scores)):
            if scores[i] > scores[best]:
                best = i
        if current is None or current >= len(scores):
            current = best
        elif scores[best] - scores[current] >= delta:
            current = best
        out.append(current)
    return out


def subtask_spl(rows):
    """rows: (success, navigation, steps, limit, optimal, path_length) per subtask."""
    total = Fraction(0)
    for ok, nav, steps, limit, opt, path in rows:
        if not ok:
            continue
        if nav:
            total += 1 if max(path, opt) == 0 else Fraction(opt, max(path, opt))
        else:
            total += Fraction(limit - steps, limit)
    return float(100 * total / len(rows))
