"""Simulated autonomous mobile robot.

Motion is kinematic and strictly center-to-center along grid edges: the
robot glides toward the center of the next path cell at constant speed, so
arrival times have a closed form the tests can check against.  Localization
and obstacle avoidance are abstracted into a noisy published pose and a
path-lookahead sensor over the ground-truth world.

Protocol rules the middleware leaves open are pinned here:
  * a path must start at the robot's current cell, else it is rejected and
    a replan is requested through the pose topic;
  * a path or cancel carrying an older map version than the last applied
    one is ignored (resolves races between motion and replanning);
  * on cancel the robot discards its queue and settles at the center of the
    cell it is already in, so it traverses zero further path cells.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable

from .clock import EventLoop
from .messages import (
    MSG_FLAG,
    MSG_MAP,
    MSG_OBSTACLE,
    MSG_PATH,
    MSG_POSE,
    CancelPayload,
    MapSnapshotPayload,
    ObstaclePayload,
    PathPayload,
    PosePayload,
    decode_map,
)

DEFAULT_SPEED = 1.0          # cells / second
DEFAULT_SENSOR_RANGE = 2     # path cells of lookahead
DEFAULT_POSE_RATE = 5.0      # Hz, within the observed 4-7.5 Hz band
DEFAULT_TICK_DT = 0.1        # seconds per motion step
CENTER_EPS = 1e-9


@dataclass
class TopicMap:
    """Topic names a robot uses; they differ per topology."""

    pose: str
    obstacle: str
    path: str
    cancel: str
    map: str

    @classmethod
    def namespaced(cls, robot: str) -> "TopicMap":
        return cls(pose=f"/{robot}/amcl_pose",
                   obstacle=f"/{robot}/obstacle",
                   path=f"/{robot}/goalNodesList",
                   cancel=f"/{robot}/cancelGoal",
                   map="/map")

    @classmethod
    def local(cls) -> "TopicMap":
        return cls(pose="/amcl_pose", obstacle="/obstacle",
                   path="/goalNodesList", cancel="/cancelGoal", map="/map")


class WorldView:
    """Ground truth the robot's sensor sees: real obstacles in the world.

    Operator/ERP blocks spawn real obstacles, so they appear here too;
    surprise obstacles exist only here until some robot senses and reports
    them.
    """

    def __init__(self) -> None:
        self.blocked: set[int] = set()

    def block(self, cell: int) -> None:
        self.blocked.add(cell)

    def unblock(self, cell: int) -> None:
        self.blocked.discard(cell)


class RobotAgent:
    """One simulated AMR following the consume-path/honor-cancel protocol."""

    def __init__(self, scope, loop: EventLoop, name: str, start_cell: int,
                 grid_width: int, grid_height: int,
                 world: WorldView | None = None,
                 topics: TopicMap | None = None,
                 speed: float = DEFAULT_SPEED,
                 sensor_range: int = DEFAULT_SENSOR_RANGE,
                 pose_rate: float = DEFAULT_POSE_RATE,
                 pose_noise_sigma: float = 0.0,
                 tick_dt: float = DEFAULT_TICK_DT,
                 seed: int | str = 0,
                 events: Callable[[str, dict], None] | None = None):
        if speed <= 0:
            raise ValueError("speed must be > 0")
        self.scope = scope
        self.loop = loop
        self.name = name
        self.grid_width = grid_width
        self.grid_height = grid_height
        self.world = world if world is not None else WorldView()
        self.topics = topics or TopicMap.namespaced(name)
        self.speed = speed
        self.sensor_range = sensor_range
        self.pose_rate = pose_rate
        self.pose_noise_sigma = pose_noise_sigma
        self.tick_dt = tick_dt
        self.rng = random.Random(f"robot/{seed}/{name}")
        self.events = events or (lambda kind, data: None)

        col, row = start_cell % grid_width, start_cell // grid_width
        self.x = float(col)
        self.y = float(row)
        self.heading = 0.0
        self.path_queue: list[int] = []
        self.status = "idle"
        self.applied_map_version = -1
        self.known_blocked: set[int] = set()
        self.map_version = -1
        self._reported: set[int] = set()
        self._cancel_pending = False
        self._last_path_cells: tuple[int, ...] = ()
        self._last_logged_cell = start_cell
        self._timers = []

    # -- derived state ------------------------------------------------------

    @property
    def current_cell(self) -> int:
        col = min(self.grid_width - 1, max(0, int(round(self.x))))
        row = min(self.grid_height - 1, max(0, int(round(self.y))))
        return row * self.grid_width + col

    def _center(self, cell: int) -> tuple[float, float]:
        return float(cell % self.grid_width), float(cell // self.grid_width)

    @property
    def at_center(self) -> bool:
        cx, cy = self._center(self.current_cell)
        return abs(self.x - cx) < CENTER_EPS and abs(self.y - cy) < CENTER_EPS

    # -- wiring ----------------------------------------------------------------

    def start(self) -> None:
        t = self.topics
        self._pose_pub = self.scope.advertise(t.pose, MSG_POSE)
        self._obstacle_pub = self.scope.advertise(t.obstacle, MSG_OBSTACLE)
        self.scope.subscribe(t.path, MSG_PATH, self.on_path)
        self.scope.subscribe(t.cancel, MSG_FLAG, self.on_cancel)
        self.scope.subscribe(t.map, MSG_MAP, self.on_map)
        self.events("robot_started", {"robot": self.name,
                                      "cell": self.current_cell})
        self._timers.append(self.loop.call_every(self.tick_dt, self._tick_timer))
        self._timers.append(self.loop.call_every(
            1.0 / self.pose_rate, self.publish_pose))

    def stop(self) -> None:
        for timer in self._timers:
            timer.cancel()
        self._timers.clear()

    # -- motion -------------------------------------------------------------------

    def _tick_timer(self) -> None:
        self.tick(self.tick_dt)

    def tick(self, dt: float) -> None:
        """Advance the pose by speed*dt toward the next center; sense ahead."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        self.sense()
        budget = self.speed * dt
        while budget > 0:
            target = self._current_target()
            if target is None:
                break
            tx, ty = self._center(target)
            dx, dy = tx - self.x, ty - self.y
            distance = math.hypot(dx, dy)
            if distance < CENTER_EPS:
                self._arrive_at(target)
                continue
            step = min(budget, distance)
            self.x += dx / distance * step
            self.y += dy / distance * step
            self.heading = math.atan2(dy, dx)
            budget -= step
            if step == distance:
                self._arrive_at(target)
        if self.current_cell != self._last_logged_cell:
            self._last_logged_cell = self.current_cell
            self.events("cell_entered", {"robot": self.name,
                                         "cell": self.current_cell})

    def _current_target(self) -> int | None:
        if self.path_queue:
            head = self.path_queue[0]
            blocked = head in self.known_blocked or (
                self.sensor_range >= 1 and head in self.world.blocked)
            if not blocked:
                self.status = "moving"
                return head
            # halt at the previous center rather than enter a blocked cell
            if self.status != "halted":
                self.status = "halted"
                self.events("robot_halted", {"robot": self.name,
                                             "cell": self.current_cell})
            if not self.at_center and self.current_cell != head:
                return self.current_cell
            return None
        if not self.at_center:
            return self.current_cell  # settle in place (e.g. after cancel)
        self._settle_status()
        return None

    def _arrive_at(self, cell: int) -> None:
        self.x, self.y = self._center(cell)
        if self.path_queue and self.path_queue[0] == cell:
            self.path_queue.pop(0)
        if not self.path_queue:
            self._settle_status()

    def _settle_status(self) -> None:
        if self.status in ("moving",):
            if self._last_path_cells and \
                    self.current_cell == self._last_path_cells[-1]:
                self.status = "arrived"
                self.events("robot_arrived", {"robot": self.name,
                                              "cell": self.current_cell})
                self.publish_pose()
            else:
                self.status = "idle"

    # -- protocol ------------------------------------------------------------------

    def on_path(self, env) -> None:
        msg = PathPayload.decode(env.payload)
        if msg.robot != self.name:
            return
        if msg.map_version < self.applied_map_version:
            self.events("path_ignored_stale", {"robot": self.name,
                                               "mapVersion": msg.map_version})
            return
        if not msg.cells:
            return
        if msg.cells[0] != self.current_cell:
            # motion outran the planner's view; ask for a fresh plan
            self.events("path_rejected", {"robot": self.name,
                                          "pathStart": msg.cells[0],
                                          "cell": self.current_cell})
            self.publish_pose(request_replan=True)
            return
        self._cancel_pending = False
        self.applied_map_version = msg.map_version
        self._last_path_cells = msg.cells
        self.path_queue = list(msg.cells[1:])
        self.events("path_applied", {"robot": self.name,
                                     "cells": list(msg.cells),
                                     "mapVersion": msg.map_version})
        if not self.path_queue and self.at_center:
            self.status = "arrived"
            self.events("robot_arrived", {"robot": self.name,
                                          "cell": self.current_cell})
            self.publish_pose()
        else:
            self.status = "moving"

    def on_cancel(self, env) -> None:
        msg = CancelPayload.decode(env.payload)
        if msg.robot != self.name or msg.value != 1:
            return
        if msg.map_version <= self.applied_map_version:
            return  # a newer path already superseded this cancel
        self.path_queue = []
        self._last_path_cells = ()
        self._cancel_pending = True
        self.status = "halted"
        self.events("cancel_applied", {"robot": self.name,
                                       "cell": self.current_cell,
                                       "mapVersion": msg.map_version})

    def on_map(self, env) -> None:
        msg = decode_map(env.payload)
        if isinstance(msg, MapSnapshotPayload):
            if msg.version < self.map_version:
                return
            self.known_blocked = set(msg.blocked)
            self.map_version = msg.version
        else:
            if msg.version <= self.map_version:
                return
            self.known_blocked.update(msg.added)
            self.known_blocked.difference_update(msg.removed)
            self.map_version = msg.version
        # once the planner knows a cell we reported, the dedup entry can go
        self._reported.intersection_update(self.world.blocked - self.known_blocked)

    # -- sensing ------------------------------------------------------------------

    def _sensed_blocked(self, cells) -> set[int]:
        return {c for c in cells if c in self.world.blocked}

    def sense(self) -> list[int]:
        """Report world-blocked cells within sensor range along the path.

        Cells the planner's map already marks blocked are not reported, and
        each surprise cell is reported once until the planner confirms it.
        """
        if self.sensor_range < 1:
            return []
        lookahead = self.path_queue[: self.sensor_range]
        fresh = [c for c in lookahead
                 if c in self.world.blocked
                 and c not in self.known_blocked
                 and c not in self._reported]
        if fresh:
            self._reported.update(fresh)
            payload = ObstaclePayload(robot=self.name, cells=tuple(fresh),
                                      map_version=self.map_version)
            self._obstacle_pub.publish(payload.encode())
            self.events("obstacle_reported", {"robot": self.name,
                                              "cells": list(fresh)})
        return fresh

    # -- pose stream ----------------------------------------------------------------

    def publish_pose(self, request_replan: bool = False) -> PosePayload:
        nx, ny = self.x, self.y
        if self.pose_noise_sigma > 0:
            nx += self.rng.gauss(0.0, self.pose_noise_sigma)
            ny += self.rng.gauss(0.0, self.pose_noise_sigma)
        col = min(self.grid_width - 1, max(0, int(round(nx))))
        row = min(self.grid_height - 1, max(0, int(round(ny))))
        pose = PosePayload(robot=self.name, x=nx, y=ny, heading=self.heading,
                           cell=row * self.grid_width + col,
                           stamp_ns=self.loop.now_ns,
                           request_replan=request_replan)
        self._pose_pub.publish(pose.encode())
        return pose
