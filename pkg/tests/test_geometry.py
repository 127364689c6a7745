import math

from hypothesis import given
from hypothesis import strategies as st

import oracles
from seqexplore.geometry import (
    angle_diff,
    bfs_distances,
    cone_capacity,
    cone_offsets,
    heading_angle,
    heading_step,
    line_interior,
    nearest_heading,
    offset_angle,
    turns_between,
)

small = st.integers(-20, 20)


def test_heading_steps_match_compass():
    steps = [heading_step(h, 8) for h in range(8)]
    assert steps == [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]
    assert [heading_step(h, 4) for h in range(4)] == [(1, 0), (0, -1), (-1, 0), (0, 1)]


def test_offset_angle_has_y_up():
    assert offset_angle(0, -1) == 90.0
    assert offset_angle(-1, 0) == 180.0
    assert abs(offset_angle(1, 1) + 45.0) < 1e-12


@given(small, small)
def test_line_interior_matches_exact_rounding(dx, dy):
    assert list(line_interior(dx, dy)) == oracles.los_interior(dx, dy)


@given(small, small)
def test_line_is_reflection_symmetric(dx, dy):
    fwd = line_interior(dx, dy)
    assert line_interior(-dx, dy) == tuple((-x, y) for x, y in fwd)
    assert line_interior(dx, -dy) == tuple((x, -y) for x, y in fwd)


@given(small, small)
def test_line_steps_are_8_connected(dx, dy):
    pts = [(0, 0), *line_interior(dx, dy), (dx, dy)]
    if (dx, dy) == (0, 0):
        return
    for a, b in zip(pts, pts[1:]):
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1


@given(st.floats(-720, 720), st.floats(-720, 720))
def test_angle_diff_range_and_symmetry(a, b):
    d = angle_diff(a, b)
    assert 0.0 <= d <= 180.0
    assert math.isclose(d, angle_diff(b, a), abs_tol=1e-9)


@given(st.integers(0, 7), st.integers(0, 7))
def test_turns_reach_target(a, b):
    t = turns_between(a, b, 8)
    assert -3 <= t <= 4
    assert (a + t) % 8 == b


@given(st.floats(0, 359.99))
def test_nearest_heading_is_nearest(angle):
    h = nearest_heading(angle, 8)
    assert angle_diff(heading_angle(h, 8), angle) <= 22.5 + 1e-9


@given(st.integers(1, 12), st.sampled_from([30.0, 45.0, 60.0, 90.0, 180.0]), st.integers(0, 7))
def test_cone_offsets_match_dot_product_cone(depth, half, h):
    axis = heading_angle(h, 8)
    got = set(cone_offsets(depth, half, axis))
    want = {
        (dx, dy)
        for dx in range(-depth, depth + 1)
        for dy in range(-depth, depth + 1)
        if (dx, dy) != (0, 0) and oracles.in_cone(dx, dy, axis, half, depth)
    }
    assert got == want


def test_cone_capacity_is_max_over_headings():
    caps = [len(cone_offsets(14, 45.0, heading_angle(h, 8))) for h in range(8)]
    assert cone_capacity(14, 45.0, 8) == max(caps)


@given(st.lists(st.lists(st.booleans(), min_size=6, max_size=6), min_size=5, max_size=5), st.integers(0, 5), st.integers(0, 4))
def test_bfs_matches_reference(grid, sx, sy):
    got = bfs_distances(grid, (sx, sy))
    if not grid[sy][sx]:
        assert got == {}
    else:
        assert got == oracles.bfs(grid, (sx, sy))
