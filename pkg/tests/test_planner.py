"""Grid map and path planning against the independent BFS oracle."""

import pytest
from hypothesis import given, settings, strategies as st

from fleetsim.errors import InvalidCell
from fleetsim.planner import GridMap, plan_path

from .oracles import bfs_distance


def path_is_valid(grid: GridMap, path: list[int]) -> bool:
    if any(grid.is_blocked(c) for c in path):
        return False
    for a, b in zip(path, path[1:]):
        if b not in grid.neighbors4(a):
            return False
    return True


def test_start_equals_goal():
    grid = GridMap(8, 8)
    assert plan_path(grid, 26, 26) == [26]


def test_empty_8x8_matches_manhattan_plus_one():
    grid = GridMap(8, 8)
    for start in range(64):
        for goal in range(64):
            path = plan_path(grid, start, goal)
            manhattan = abs(start % 8 - goal % 8) + abs(start // 8 - goal // 8)
            assert len(path) == manhattan + 1
            assert path_is_valid(grid, path)


def test_blocking_cell_forces_detour():
    grid = GridMap(8, 8)
    start, goal = 24, 28  # same row as cell 26
    direct = plan_path(grid, start, goal)
    assert 26 in direct
    grid.block(26)
    detour = plan_path(grid, start, goal)
    assert 26 not in detour
    assert len(detour) == len(direct) + 2
    assert path_is_valid(grid, detour)


def test_unreachable_goal_returns_none():
    grid = GridMap(4, 4)
    # wall off the north-west corner (cell 0): neighbors 1 and 4
    grid.block(1)
    grid.block(4)
    assert plan_path(grid, 15, 0) is None
    assert plan_path(grid, 0, 15) is None


def test_goal_on_blocked_cell_is_no_path():
    grid = GridMap(4, 4)
    grid.block(5)
    assert plan_path(grid, 0, 5) is None


def test_out_of_range_cells_rejected():
    grid = GridMap(8, 8)
    with pytest.raises(InvalidCell):
        plan_path(grid, 0, 64)
    with pytest.raises(InvalidCell):
        plan_path(grid, -1, 5)


def test_blocked_start_rejected():
    grid = GridMap(8, 8)
    grid.block(3)
    with pytest.raises(InvalidCell):
        plan_path(grid, 3, 7)


def test_planner_is_deterministic():
    grid = GridMap(8, 8, blocked={10, 11, 12, 30, 31})
    first = [plan_path(grid, s, g) for s in (0, 63, 7) for g in (56, 5, 40)]
    second = [plan_path(grid, s, g) for s in (0, 63, 7) for g in (56, 5, 40)]
    assert first == second


@settings(max_examples=60, deadline=None)
@given(data=st.data(),
       width=st.integers(min_value=2, max_value=12),
       height=st.integers(min_value=2, max_value=12))
def test_random_grids_match_bfs_oracle(data, width, height):
    n = width * height
    blocked = set(data.draw(st.lists(
        st.integers(min_value=0, max_value=n - 1), max_size=n // 3,
        unique=True)))
    free = [c for c in range(n) if c not in blocked]
    if not free:
        return
    start = data.draw(st.sampled_from(free))
    goal = data.draw(st.sampled_from(free))
    grid = GridMap(width, height, blocked=blocked)
    path = plan_path(grid, start, goal)
    oracle = bfs_distance(width, height, blocked, start, goal)
    if oracle is None:
        assert path is None
    else:
        assert path is not None
        assert len(path) == oracle
        assert path_is_valid(grid, path)
        assert path[0] == start and path[-1] == goal


def test_version_increments_on_every_mutation():
    grid = GridMap(8, 8)
    assert grid.version == 0
    d1 = grid.block(26)
    assert (grid.version, d1.added) == (1, (26,))
    d2 = grid.block(26)  # set no-op, still versioned
    assert (grid.version, d2.added) == (2, ())
    assert grid.blocked == {26}
    d3 = grid.unblock(26)
    assert (grid.version, d3.removed) == (3, (26,))
    d4 = grid.unblock(26)  # never-blocked unblock is a no-op delta
    assert (grid.version, d4.removed, d4.is_noop) == (4, (), True)


def test_block_records_source():
    grid = GridMap(8, 8)
    grid.block(10, source="robot-sensor")
    assert grid.block_source[10] == "robot-sensor"


def test_snapshot_shape():
    grid = GridMap(8, 8, blocked={9, 3})
    snap = grid.snapshot()
    assert snap.blocked == (3, 9)
    assert (snap.width, snap.height) == (8, 8)
