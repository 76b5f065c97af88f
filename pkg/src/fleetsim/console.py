"""Console socket API: a websocket bridge between a live sim and operators.

Server-to-client messages:
    {"type": "map_snapshot", "width", "height", "blocked", "version"}
    {"type": "map_delta", "version", "added", "removed"}
    {"type": "pose", "robot", "x", "y", "cell"}
    {"type": "path", "robot", "cells", "mapVersion"}
    {"type": "event", "event": ..., ...}

Client-to-server commands:
    {"type": "block_cell", "cell"}
    {"type": "unblock_cell", "cell"}
    {"type": "assign_goal", "robot", "cell"}

Rejected commands come back as {"type": "event", "event": "rejected", ...};
accepted ones are confirmed by the resulting map_delta or path message, so
the console never has to trust its own optimism.
"""

from __future__ import annotations

import json
import queue
import threading
import time

from websockets.sync.server import serve

from .errors import FleetError, StartupError
from .fleet import FleetStack
from .messages import MSG_POSE, PosePayload

POLL_S = 0.02


class ConsoleHub:
    """Fan-out point: broadcasts sim messages, queues operator commands."""

    def __init__(self) -> None:
        self.commands: "queue.Queue[dict]" = queue.Queue()
        self._clients: set = set()
        self._lock = threading.Lock()

    def attach(self, connection) -> None:
        with self._lock:
            self._clients.add(connection)

    def detach(self, connection) -> None:
        with self._lock:
            self._clients.discard(connection)

    def broadcast(self, message: dict) -> None:
        text = json.dumps(message, sort_keys=True)
        with self._lock:
            clients = list(self._clients)
        for connection in clients:
            try:
                connection.send(text)
            except Exception:
                self.detach(connection)


class ConsoleServer:
    """Real websocket endpoint in front of a ConsoleHub."""

    def __init__(self, hub: ConsoleHub, host: str = "127.0.0.1",
                 port: int = 8765):
        self.hub = hub
        try:
            self._server = serve(self._handler, host, port)
        except OSError as exc:
            raise StartupError(
                f"console cannot bind port {port}: {exc}") from exc
        self.host = host
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}/"

    def _handler(self, connection) -> None:
        self.hub.attach(connection)
        try:
            for raw in connection:
                try:
                    command = json.loads(raw)
                except (TypeError, ValueError):
                    continue
                if isinstance(command, dict) and "type" in command:
                    self.hub.commands.put(command)
        finally:
            self.hub.detach(connection)

    def close(self) -> None:
        self._server.shutdown()


def attach_console(stack: FleetStack, hub: ConsoleHub) -> None:
    """Mirror the run into console messages and wire command handling."""
    inner_write = stack.log.write

    def tapped_write(kind: str, data: dict) -> None:
        inner_write(kind, data)
        if kind == "map_snapshot":
            hub.broadcast({"type": "map_snapshot", **data})
        elif kind == "map_delta":
            hub.broadcast({"type": "map_delta", "version": data["version"],
                           "added": data["added"], "removed": data["removed"]})
        elif kind == "path_published":
            hub.broadcast({"type": "path", "robot": data["robot"],
                           "cells": data["cells"],
                           "mapVersion": data["mapVersion"]})
        else:
            hub.broadcast({"type": "event", "event": kind, **data})

    stack.log.write = tapped_write  # type: ignore[method-assign]
    stack.planner.events = tapped_write

    def pose_tap(env) -> None:
        pose = PosePayload.decode(env.payload)
        hub.broadcast({"type": "pose", "robot": pose.robot, "x": pose.x,
                       "y": pose.y, "cell": pose.cell})

    for name in stack.robots:
        stack.planner.scope.subscribe(f"/{name}/amcl_pose", MSG_POSE, pose_tap)


def apply_command(stack: FleetStack, hub: ConsoleHub, command: dict) -> None:
    kind = command.get("type")
    try:
        if kind == "block_cell":
            stack.planner.block_cell(int(command["cell"]), source="operator")
            if stack.world is not None:
                stack.world.block(int(command["cell"]))
        elif kind == "unblock_cell":
            stack.planner.unblock_cell(int(command["cell"]))
            if stack.world is not None:
                stack.world.unblock(int(command["cell"]))
        elif kind == "assign_goal":
            stack.planner.assign_goal(command["robot"], int(command["cell"]))
        else:
            hub.broadcast({"type": "event", "event": "rejected",
                           "command": command,
                           "reason": f"unknown command {kind!r}"})
    except (FleetError, KeyError, ValueError) as exc:
        hub.broadcast({"type": "event", "event": "rejected",
                       "command": command, "reason": str(exc)})


def run_paced(stack: FleetStack, hub: ConsoleHub, realtime: bool = True,
              speedup: float = 1.0, stop_flag: threading.Event | None = None):
    """Run the scenario with the console attached.

    With `realtime` the virtual clock is paced against the wall clock so
    operator actions land mid-run the way they would against real robots;
    without it the run goes as fast as the machine allows, still draining
    the command queue between events.
    """
    scenario = stack.scenario
    stack.log.write("run_started", {
        "scenario": scenario.name, "topology": scenario.topology,
        "seed": scenario.seed, "durationS": scenario.duration_s,
        "console": True})
    stack.planner.start()
    for robot in stack.robots.values():
        robot.start()
    for hook in stack.extras.get("post_start", []):
        hook()
    loop = stack.loop
    for ev in scenario.goals:
        loop.call_at(int(ev.t * 1e9),
                     lambda e=ev: stack._assign_goal(e.robot, e.cell))
    for ev in scenario.obstacles:
        loop.call_at(int(ev.t * 1e9), lambda e=ev: stack._apply_obstacle(e))
    for ev in scenario.surprises:
        loop.call_at(int(ev.t * 1e9),
                     lambda e=ev: stack._spawn_surprise(e.cell))

    end_ns = loop.now_ns + int(scenario.duration_s * 1e9)
    wall_start = time.monotonic()
    virtual_start = loop.now_ns
    while loop.now_ns < end_ns:
        if stop_flag is not None and stop_flag.is_set():
            break
        while True:
            try:
                command = hub.commands.get_nowait()
            except queue.Empty:
                break
            apply_command(stack, hub, command)
        nxt = loop.peek_next_ns()
        if nxt is None:
            break
        if nxt > end_ns:
            loop.run_until(end_ns)
            break
        if realtime:
            wall_deadline = wall_start + (nxt - virtual_start) / 1e9 / speedup
            delay = wall_deadline - time.monotonic()
            if delay > 0:
                time.sleep(min(delay, POLL_S))
                continue
        loop.step()
    stack._write_summary()
    hub.broadcast({"type": "event", "event": "run_ended"})
    return stack.log
