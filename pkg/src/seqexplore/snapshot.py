"""Binary PPM map snapshots rendered from a trace replayed to a given step."""
from __future__ import annotations

import numpy as np

from .explore import detect_frontiers
from .geometry import heading_step
from .memory import FREE
from .runner import EpisodeSettings, replay
from .world import parse_scenario

PALETTE = {
    "unknown": (48, 48, 48),
    "wall": (0, 0, 0),
    "seen": (170, 170, 170),  # known free, not yet covered
    "covered": (140, 190, 240),
    "frontier": (250, 150, 30),
    "path": (210, 30, 30),
    "pose": (30, 160, 60),
}


def _line(img, a, b, color):
    """Integer pixel line from ``a`` to ``b`` (both (px, py))."""
    (x0, y0), (x1, y1) = a, b
    n = max(abs(x1 - x0), abs(y1 - y0))
    for i in range(n + 1):
        x = x0 + round((x1 - x0) * i / n) if n else x0
        y = y0 + round((y1 - y0) * i / n) if n else y0
        img[y, x] = color


def render(world, memory, poses, min_cluster_size: int = 2, scale: int = 8) -> np.ndarray:
    """RGB image of the map state; ``poses`` is the trajectory up to now."""
    if scale < 3:
        raise ValueError("scale must be >= 3")
    h, w = world.height, world.width
    cells = np.empty((h, w, 3), dtype=np.uint8)
    cells[:] = PALETTE["unknown"]
    cells[(memory.belief == FREE)] = PALETTE["seen"]
    cells[memory.coverage] = PALETTE["covered"]
    cells[world.walls] = PALETTE["wall"]
    for f in detect_frontiers(memory.belief, min_cluster_size):
        for x, y in f.members:
            cells[y, x] = PALETTE["frontier"]
    img = np.repeat(np.repeat(cells, scale, axis=0), scale, axis=1)

    def centre(c):
        return (c[0] * scale + scale // 2, c[1] * scale + scale // 2)

    for a, b in zip(poses, poses[1:]):
        if a.cell != b.cell:
            _line(img, centre(a.cell), centre(b.cell), PALETTE["path"])
    pose = poses[-1]
    cx, cy = centre(pose.cell)
    r = max(1, scale // 4)
    img[cy - r:cy + r + 1, cx - r:cx + r + 1] = PALETTE["pose"]
    dx, dy = heading_step(pose.heading, world.n_headings)
    tip = (cx + dx * (scale // 2 - 1), cy + dy * (scale // 2 - 1))
    _line(img, (cx, cy), tip, PALETTE["pose"])
    return img


def encode_ppm(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError("not a binary 8-bit PPM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def snapshot(records: list[dict], step: int, scale: int = 8) -> bytes:
    """PPM bytes for the state right after global step ``step`` of a trace."""
    steps = [r["t"] for r in records if r["type"] == "step"]
    last = max(steps, default=0)
    if not 0 <= step <= last:
        raise ValueError(f"step {step} outside 0..{last}")
    header = records[0]
    world = parse_scenario(header["scenario"])
    settings = EpisodeSettings.from_record(header["settings"])
    poses: list = []
    state: dict = {}

    def on_state(t, pose, memory):
        if not poses or poses[-1] != pose:
            poses.append(pose)
        state["memory"] = memory

    result = replay(records, on_state=on_state, until=step)
    if not result.ok:
        raise ValueError(f"cannot render: {result.message}")
    img = render(world, state["memory"], poses, settings.agent.weights.min_cluster_size, scale)
    return encode_ppm(img)
