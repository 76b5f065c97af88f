"""Global planner: shared grid map, shortest cell paths, cancel-and-replan.

Cells are 0-based, row-major, origin at the north-west corner; the operator
console shows the same ids.  The grid is 4-connected with unit edge weights,
so Dijkstra degenerates to breadth-first order, but costs stay in the data
model so weighted cells can be added without touching the API.

Tie-break rule: neighbors are relaxed in North, East, South, West order and
a predecessor is only replaced by a strictly shorter route, which makes the
chosen shortest path unique and runs deterministic.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable

from .clock import EventLoop
from .errors import InvalidCell, InvalidGoal, OccupiedCell
from .messages import (
    MSG_FLAG,
    MSG_MAP,
    MSG_OBSTACLE,
    MSG_PATH,
    MSG_POSE,
    CancelPayload,
    MapDeltaPayload,
    MapSnapshotPayload,
    ObstaclePayload,
    PathPayload,
    PosePayload,
)

DEFAULT_GRID_SIZE = 8          # the paper's world is an equispaced 8x8 grid
DEFAULT_DEBOUNCE_S = 0.05      # burst of block ops -> one replan pass

BLOCK_SOURCES = ("operator", "robot-sensor", "erp")


@dataclass
class MapDelta:
    version: int
    added: tuple[int, ...] = ()
    removed: tuple[int, ...] = ()
    source: str = "operator"

    @property
    def is_noop(self) -> bool:
        return not self.added and not self.removed


class GridMap:
    """Occupancy state of the planner's cell grid."""

    def __init__(self, width: int = DEFAULT_GRID_SIZE,
                 height: int = DEFAULT_GRID_SIZE,
                 blocked: set[int] | None = None):
        if width < 1 or height < 1:
            raise ValueError("grid dimensions must be positive")
        self.width = width
        self.height = height
        self.blocked: set[int] = set()
        self.block_source: dict[int, str] = {}
        self.costs: dict[int, float] = {}
        self.version = 0
        for cell in sorted(blocked or ()):
            self.block(cell, "operator")

    def in_range(self, cell: int) -> bool:
        return 0 <= cell < self.width * self.height

    def require_in_range(self, cell: int) -> None:
        if not self.in_range(cell):
            raise InvalidCell(f"cell {cell} outside {self.width}x{self.height} grid")

    def is_blocked(self, cell: int) -> bool:
        return cell in self.blocked

    def neighbors4(self, cell: int) -> list[int]:
        """4-adjacent cells in North, East, South, West order."""
        row, col = divmod(cell, self.width)
        out = []
        if row > 0:
            out.append(cell - self.width)
        if col < self.width - 1:
            out.append(cell + 1)
        if row < self.height - 1:
            out.append(cell + self.width)
        if col > 0:
            out.append(cell - 1)
        return out

    def block(self, cell: int, source: str = "operator") -> MapDelta:
        """Re-blocking is a set no-op but still bumps the version so the
        delta stream stays observable."""
        self.require_in_range(cell)
        self.version += 1
        added = ()
        if cell not in self.blocked:
            self.blocked.add(cell)
            added = (cell,)
        self.block_source[cell] = source
        return MapDelta(version=self.version, added=added, source=source)

    def unblock(self, cell: int) -> MapDelta:
        self.require_in_range(cell)
        self.version += 1
        removed = ()
        if cell in self.blocked:
            self.blocked.discard(cell)
            self.block_source.pop(cell, None)
            removed = (cell,)
        return MapDelta(version=self.version, removed=removed)

    def snapshot(self) -> MapSnapshotPayload:
        return MapSnapshotPayload(width=self.width, height=self.height,
                                  blocked=tuple(sorted(self.blocked)),
                                  version=self.version)


def plan_path(grid: GridMap, start: int, goal: int,
              extra_blocked: set[int] | None = None) -> list[int] | None:
    """Minimum-length 4-connected path avoiding blocked cells, or None.

    Dijkstra over unit weights (plus any configured cell costs).  Returns
    the full cell sequence including `start`; `[start]` when start == goal.
    """
    grid.require_in_range(start)
    grid.require_in_range(goal)
    if grid.is_blocked(start):
        raise InvalidCell(f"start cell {start} is blocked")
    avoid = grid.blocked if not extra_blocked else grid.blocked | extra_blocked
    if goal in avoid:
        return None
    if start == goal:
        return [start]

    dist: dict[int, float] = {start: 0.0}
    pred: dict[int, int] = {}
    counter = itertools.count()
    heap: list[tuple[float, int, int]] = [(0.0, next(counter), start)]
    while heap:
        d, _, cell = heapq.heappop(heap)
        if d > dist.get(cell, float("inf")):
            continue
        if cell == goal:
            break
        for nxt in grid.neighbors4(cell):
            if nxt in avoid:
                continue
            nd = d + 1.0 + grid.costs.get(nxt, 0.0)
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                pred[nxt] = cell
                heapq.heappush(heap, (nd, next(counter), nxt))
    if goal not in dist:
        return None
    path = [goal]
    while path[-1] != start:
        path.append(pred[path[-1]])
    path.reverse()
    return path


@dataclass
class RobotTrack:
    """What the planner knows about one robot."""

    name: str
    cell: int | None = None          # last reported cell; None until localized
    goal: int | None = None
    active_path: list[int] = field(default_factory=list)
    resolved: str | None = None      # "arrived" | "unreachable" | None

    @property
    def localized(self) -> bool:
        return self.cell is not None

    def remaining_path(self) -> list[int]:
        if not self.active_path or self.cell is None:
            return list(self.active_path)
        try:
            idx = self.active_path.index(self.cell)
        except ValueError:
            return list(self.active_path)
        return self.active_path[idx:]


class GlobalPlanner:
    """One logical node owning the map and the path protocol for a fleet.

    Map mutations and replans are serialized through the owning event loop;
    a burst of block operations within the debounce window produces a
    single replan pass.
    """

    def __init__(self, scope, loop: EventLoop, grid: GridMap,
                 robots: list[str], debounce_s: float = DEFAULT_DEBOUNCE_S,
                 events: Callable[[str, dict], None] | None = None,
                 reserve_cells: bool = False, world=None,
                 snapshot_period_s: float | None = 1.0):
        self.scope = scope
        self.loop = loop
        self.grid = grid
        self.debounce_s = debounce_s
        self.events = events or (lambda kind, data: None)
        self.reserve_cells = reserve_cells
        self.world = world  # physical world mirror: blocks spawn obstacles
        self.snapshot_period_s = snapshot_period_s
        self.tracks: dict[str, RobotTrack] = {
            name: RobotTrack(name) for name in robots}
        self._pending_blocked: set[int] = set()
        self._debounce_timer = None
        self._path_pubs = {}
        self._cancel_pubs = {}
        self._map_pub = scope.advertise("/map", MSG_MAP)
        for name in robots:
            self._path_pubs[name] = scope.advertise(
                f"/{name}/goalNodesList", MSG_PATH)
            self._cancel_pubs[name] = scope.advertise(
                f"/{name}/cancelGoal", MSG_FLAG)
            scope.subscribe(f"/{name}/amcl_pose", MSG_POSE, self._on_pose)
            scope.subscribe(f"/{name}/obstacle", MSG_OBSTACLE, self._on_obstacle)

    def start(self) -> None:
        # periodic full snapshot doubles as the late-joiner refresh; deltas
        # carry the interesting changes in between
        if self.snapshot_period_s:
            self.loop.call_every(self.snapshot_period_s, self._publish_snapshot)
        else:
            self._publish_snapshot()

    # -- operator/ERP surface --------------------------------------------------

    def assign_goal(self, robot: str, end_cell: int) -> None:
        track = self._track(robot)
        self.grid.require_in_range(end_cell)
        if self.grid.is_blocked(end_cell):
            raise InvalidGoal(f"goal cell {end_cell} is blocked")
        if not track.localized:
            raise InvalidGoal(f"robot {robot} is not localized yet")
        track.goal = end_cell
        track.resolved = None
        self.events("goal_assigned", {"robot": robot, "cell": end_cell})
        self._plan_and_publish(track)

    def block_cell(self, cell: int, source: str = "operator") -> MapDelta:
        self.grid.require_in_range(cell)
        for track in self.tracks.values():
            if track.cell == cell:
                raise OccupiedCell(f"cell {cell} is occupied by {track.name}")
        delta = self.grid.block(cell, source)
        if self.world is not None:
            self.world.block(cell)
        self._emit_delta(delta)
        if delta.added:
            self._pending_blocked.update(delta.added)
            self._schedule_replan()
        return delta

    def unblock_cell(self, cell: int) -> MapDelta:
        delta = self.grid.unblock(cell)
        if self.world is not None:
            self.world.unblock(cell)
        self._emit_delta(delta)
        return delta

    def goals_resolved(self) -> bool:
        return all(t.resolved is not None for t in self.tracks.values()
                   if t.goal is not None)

    # -- message handlers ---------------------------------------------------------

    def _on_pose(self, env) -> None:
        pose = PosePayload.decode(env.payload)
        track = self.tracks.get(pose.robot)
        if track is None:
            return
        track.cell = pose.cell
        if track.goal is not None and track.resolved is None \
                and pose.cell == track.goal:
            track.resolved = "arrived"
            self.events("goal_resolved", {"robot": track.name,
                                          "status": "arrived",
                                          "cell": pose.cell})
        if pose.request_replan and track.goal is not None \
                and track.resolved is None:
            self._plan_and_publish(track)

    def _on_obstacle(self, env) -> None:
        report = ObstaclePayload.decode(env.payload)
        self.events("obstacle_received", {"robot": report.robot,
                                          "cells": sorted(report.cells)})
        for cell in sorted(report.cells):
            if self.grid.in_range(cell) and not self.grid.is_blocked(cell):
                try:
                    self.block_cell(cell, source="robot-sensor")
                except OccupiedCell:
                    continue

    # -- replanning -------------------------------------------------------------

    def _schedule_replan(self) -> None:
        if self._debounce_timer is None:
            self._debounce_timer = self.loop.call_later(
                self.debounce_s, self._replan_affected)

    def _replan_affected(self) -> None:
        self._debounce_timer = None
        newly_blocked = self._pending_blocked
        self._pending_blocked = set()
        if not newly_blocked:
            return
        for name in sorted(self.tracks):
            track = self.tracks[name]
            if track.goal is None or track.resolved is not None:
                continue
            if not newly_blocked.intersection(track.remaining_path()):
                continue
            self._publish_cancel(track)
            if self.grid.is_blocked(track.goal):
                self._mark_unreachable(track)
                continue
            self._plan_and_publish(track, after_cancel=True)

    def _plan_and_publish(self, track: RobotTrack,
                          after_cancel: bool = False) -> None:
        extra = self._reserved_cells(track.name) if self.reserve_cells else None
        cells = plan_path(self.grid, track.cell, track.goal, extra_blocked=extra)
        if cells is None:
            if not after_cancel:
                self._publish_cancel(track)
            self._mark_unreachable(track)
            return
        track.active_path = cells
        payload = PathPayload(robot=track.name, cells=tuple(cells),
                              map_version=self.grid.version)
        self._path_pubs[track.name].publish(payload.encode())
        self.events("path_published", {"robot": track.name, "cells": cells,
                                       "mapVersion": self.grid.version})

    def _publish_cancel(self, track: RobotTrack) -> None:
        payload = CancelPayload(robot=track.name, value=1,
                                map_version=self.grid.version)
        self._cancel_pubs[track.name].publish(payload.encode())
        self.events("cancel_published", {"robot": track.name,
                                         "mapVersion": self.grid.version})

    def _mark_unreachable(self, track: RobotTrack) -> None:
        track.resolved = "unreachable"
        track.active_path = []
        self.events("goal_resolved", {"robot": track.name,
                                      "status": "unreachable",
                                      "cell": track.goal})

    def _reserved_cells(self, robot: str) -> set[int]:
        reserved: set[int] = set()
        for other in self.tracks.values():
            if other.name == robot:
                continue
            reserved.update(other.remaining_path())
            if other.cell is not None:
                reserved.add(other.cell)
        return reserved

    # -- map stream ---------------------------------------------------------------

    def _publish_snapshot(self) -> None:
        snap = self.grid.snapshot()
        self._map_pub.publish(snap.encode())
        self.events("map_snapshot", {"width": snap.width, "height": snap.height,
                                     "blocked": list(snap.blocked),
                                     "version": snap.version})

    def _emit_delta(self, delta: MapDelta) -> None:
        payload = MapDeltaPayload(version=delta.version,
                                  added=tuple(delta.added),
                                  removed=tuple(delta.removed))
        self._map_pub.publish(payload.encode())
        self.events("map_delta", {"version": delta.version,
                                  "added": sorted(delta.added),
                                  "removed": sorted(delta.removed),
                                  "source": delta.source})

    def _track(self, robot: str) -> RobotTrack:
        track = self.tracks.get(robot)
        if track is None:
            raise InvalidGoal(f"unknown robot {robot!r}")
        return track
