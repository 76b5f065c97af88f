"""Builds a full fleet (planner + robots) over any topology and runs it.

Sim mode is one deterministic event loop: the same scenario file and seed
always produce byte-identical event logs.  The topology only changes how
planner and robot scopes are wired together:

  single  one global master on the planner's machine; robots use
          namespaced topics directly.
  multi   one domain per machine; robots publish locally and relay to the
          namespaced names; sync allowlists carry exactly the fleet topics
          across domains.
  cloud   a broker on the server machine; planner and robots are endpoints
          and every fleet topic flows through declared interface
          connections and a per-robot move_client node in the container.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .clock import EventLoop
from .errors import ConfigError, InvalidGoal, OccupiedCell
from .messaging import NodeId
from .planner import GlobalPlanner, GridMap
from .robot import RobotAgent, TopicMap, WorldView
from .scenario import Scenario
from .scopes import DomainScope, RegistryScope
from .topology.cloud import CloudConfig, CloudServer
from .topology.multi import MultiMasterTopology
from .topology.single import SingleMasterTopology
from .virtualnet import VirtualNet

GOAL_RETRY_S = 0.2  # goal scripted before the robot's first pose arrives


class EventLog:
    """Append-only structured run log; serializes to line-delimited JSON."""

    def __init__(self, loop: EventLoop):
        self.loop = loop
        self.records: list[dict] = []

    def write(self, kind: str, data: dict) -> None:
        record = {"seq": len(self.records), "tNs": self.loop.now_ns,
                  "event": kind}
        record.update(data)
        self.records.append(record)

    def to_ndjson(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n"
                       for r in self.records)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_ndjson())

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["event"] == kind]


@dataclass
class FleetStack:
    scenario: Scenario
    loop: EventLoop
    net: VirtualNet
    world: WorldView
    grid: GridMap
    planner: GlobalPlanner
    robots: dict[str, RobotAgent]
    log: EventLog
    extras: dict = field(default_factory=dict)

    def run(self) -> EventLog:
        """Execute the scenario scripts and run out the clock."""
        scenario = self.scenario
        self.log.write("run_started", {
            "scenario": scenario.name, "topology": scenario.topology,
            "seed": scenario.seed, "durationS": scenario.duration_s})
        self.planner.start()
        for robot in self.robots.values():
            robot.start()
        for hook in self.extras.get("post_start", []):
            hook()
        for ev in scenario.goals:
            self.loop.call_at(int(ev.t * 1e9),
                              lambda e=ev: self._assign_goal(e.robot, e.cell))
        for ev in scenario.obstacles:
            self.loop.call_at(int(ev.t * 1e9),
                              lambda e=ev: self._apply_obstacle(e))
        for ev in scenario.surprises:
            self.loop.call_at(int(ev.t * 1e9),
                              lambda e=ev: self._spawn_surprise(e.cell))
        self.loop.run_for(scenario.duration_s)
        self._write_summary()
        return self.log

    def _assign_goal(self, robot: str, cell: int, retries: int = 25) -> None:
        try:
            self.planner.assign_goal(robot, cell)
        except InvalidGoal as exc:
            if "not localized" in str(exc) and retries > 0:
                self.loop.call_later(
                    GOAL_RETRY_S,
                    lambda: self._assign_goal(robot, cell, retries - 1))
            else:
                self.log.write("goal_rejected", {"robot": robot, "cell": cell,
                                                 "reason": str(exc)})

    def _apply_obstacle(self, ev) -> None:
        try:
            if ev.op == "block":
                self.planner.block_cell(ev.cell, source=ev.source)
            else:
                self.planner.unblock_cell(ev.cell)
        except OccupiedCell as exc:
            self.log.write("block_rejected", {"cell": ev.cell,
                                              "reason": str(exc)})

    def _spawn_surprise(self, cell: int) -> None:
        self.world.block(cell)
        self.log.write("surprise_spawned", {"cell": cell})

    def goals_resolved(self) -> bool:
        return self.planner.goals_resolved()

    def final_cells(self) -> dict[str, int]:
        return {name: robot.current_cell
                for name, robot in sorted(self.robots.items())}

    def _write_summary(self) -> None:
        tracks = self.planner.tracks
        self.log.write("summary", {
            "finalCells": self.final_cells(),
            "status": {name: self.robots[name].status
                       for name in sorted(self.robots)},
            "goals": {name: (tracks[name].resolved or "pending")
                      for name in sorted(tracks) if tracks[name].goal is not None},
            "allGoalsResolved": self.goals_resolved(),
            "netBytes": self.net.ledger_total(),
        })


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_stack(scenario: Scenario) -> FleetStack:
    builder = {
        "single": _build_single,
        "multi": _build_multi,
        "cloud": _build_cloud,
    }.get(scenario.topology)
    if builder is None:
        raise ConfigError(f"unknown topology {scenario.topology!r}")
    return builder(scenario)


def _base(scenario: Scenario):
    loop = EventLoop()
    net = VirtualNet(loop, seed=scenario.seed, default_link=scenario.link,
                     header_overhead=scenario.header_overhead)
    log = EventLog(loop)
    world = WorldView()
    grid = GridMap(scenario.grid_width, scenario.grid_height,
                   blocked=scenario.initial_blocked)
    for cell in scenario.initial_blocked:
        world.block(cell)
    return loop, net, log, world, grid


def _make_robot(scenario: Scenario, spec, scope, loop, world, topics, log):
    return RobotAgent(
        scope, loop, spec.name, spec.start,
        grid_width=scenario.grid_width, grid_height=scenario.grid_height,
        world=world, topics=topics, speed=spec.speed,
        sensor_range=spec.sensor_range, pose_rate=spec.pose_rate_hz,
        pose_noise_sigma=spec.pose_noise_sigma, seed=scenario.seed,
        events=log.write)


def _build_single(scenario: Scenario) -> FleetStack:
    loop, net, log, world, grid = _base(scenario)
    topo = SingleMasterTopology(net, master_host="master")
    names = [r.name for r in scenario.robots]
    planner_scope = RegistryScope(topo.registry,
                                  net.node(NodeId("master", "global_planner")))
    planner = GlobalPlanner(planner_scope, loop, grid, names,
                            events=log.write, world=world)
    robots = {}
    for spec in scenario.robots:
        node = net.node(NodeId(spec.name, "robot", spec.name))
        scope = RegistryScope(topo.registry, node)
        robots[spec.name] = _make_robot(
            scenario, spec, scope, loop, world,
            TopicMap.namespaced(spec.name), log)
    return FleetStack(scenario, loop, net, world, grid, planner, robots, log,
                      extras={"topology": topo})


def _build_multi(scenario: Scenario) -> FleetStack:
    loop, net, log, world, grid = _base(scenario)
    topo = MultiMasterTopology(net)
    names = [r.name for r in scenario.robots]
    planner_domain = topo.add_domain("planner")
    planner_allow = set()
    for name in names:
        planner_allow.add(f"/{name}/amcl_pose")
        planner_allow.add(f"/{name}/obstacle")
    planner_domain.sync_topics(planner_allow)
    planner_scope = DomainScope(planner_domain,
                                net.node(NodeId("planner", "global_planner")))
    planner = GlobalPlanner(planner_scope, loop, grid, names,
                            events=log.write, world=world)
    robots = {}
    post_start = []
    for spec in scenario.robots:
        domain = topo.add_domain(spec.name)
        domain.sync_topics({f"/{spec.name}/goalNodesList",
                            f"/{spec.name}/cancelGoal", "/map"})
        node = net.node(NodeId(spec.name, "robot", spec.name))
        scope = DomainScope(domain, node)
        # the robot talks plain local names; relays give them fleet-wide ones
        topics = TopicMap(pose="/amcl_pose", obstacle="/obstacle",
                          path=f"/{spec.name}/goalNodesList",
                          cancel=f"/{spec.name}/cancelGoal", map="/map")
        robots[spec.name] = _make_robot(scenario, spec, scope, loop, world,
                                        topics, log)
        post_start.append(
            lambda d=domain, n=spec.name: (
                d.relay("/amcl_pose", f"/{n}/amcl_pose"),
                d.relay("/obstacle", f"/{n}/obstacle")))
    return FleetStack(scenario, loop, net, world, grid, planner, robots, log,
                      extras={"topology": topo, "post_start": post_start})


def robot_cloud_config(name: str, container: str = "cTag_01",
                       user: str = "testUser", password: str = "testUser") -> dict:
    """Configuration document wiring one robot through the cloud."""
    return {
        "url": "http://server:9000/",
        "userID": user,
        "password": password,
        "robotID": name,
        "containers": [{"cTag": container}],
        "nodes": [{
            "cTag": container,
            "nTag": f"move_client_{name}",
            "pkg": "move_client",
            "exe": "move_client_pthread",
            "args": f"/{name}/goalNodesList, /{name}/cancelGoal, /map",
            "namespace": name,
        }],
        "interfaces": [
            {"eTag": name, "iTag": "poseSender",
             "iType": "SubscriberInterface", "iCls": "PoseMsg",
             "addr": "/amcl_pose"},
            {"eTag": name, "iTag": "obstacleSender",
             "iType": "SubscriberInterface", "iCls": "ObstacleMsg",
             "addr": "/obstacle"},
            {"eTag": name, "iTag": "pathReceiver",
             "iType": "PublisherInterface", "iCls": "PathMsg",
             "addr": "/goalNodesList"},
            {"eTag": name, "iTag": "cancelReceiver",
             "iType": "PublisherInterface", "iCls": "Flag",
             "addr": "/cancelGoal"},
            {"eTag": name, "iTag": "mapReceiver",
             "iType": "PublisherInterface", "iCls": "MapMsg",
             "addr": "/map"},
            {"eTag": container, "iTag": f"poseReceiver_{name}",
             "iType": "PublisherInterface", "iCls": "PoseMsg",
             "addr": f"/{name}/amcl_pose"},
            {"eTag": container, "iTag": f"obstacleReceiver_{name}",
             "iType": "PublisherInterface", "iCls": "ObstacleMsg",
             "addr": f"/{name}/obstacle"},
            {"eTag": container, "iTag": f"cmdPathSender_{name}",
             "iType": "SubscriberInterface", "iCls": "PathMsg",
             "addr": f"/{name}/cmd/path"},
            {"eTag": container, "iTag": f"cmdCancelSender_{name}",
             "iType": "SubscriberInterface", "iCls": "Flag",
             "addr": f"/{name}/cmd/cancel"},
            {"eTag": container, "iTag": f"cmdMapSender_{name}",
             "iType": "SubscriberInterface", "iCls": "MapMsg",
             "addr": f"/{name}/cmd/map"},
        ],
        "connections": [
            {"tagA": f"{name}/poseSender",
             "tagB": f"{container}/poseReceiver_{name}"},
            {"tagA": f"{name}/obstacleSender",
             "tagB": f"{container}/obstacleReceiver_{name}"},
            {"tagA": f"{container}/cmdPathSender_{name}",
             "tagB": f"{name}/pathReceiver"},
            {"tagA": f"{container}/cmdCancelSender_{name}",
             "tagB": f"{name}/cancelReceiver"},
            {"tagA": f"{container}/cmdMapSender_{name}",
             "tagB": f"{name}/mapReceiver"},
        ],
    }


def planner_cloud_config(robot_names: list[str], container: str = "cTag_01",
                         user: str = "testUser",
                         password: str = "testUser") -> dict:
    """Configuration document wiring the global planner endpoint."""
    interfaces = [
        {"eTag": "globalPlanner", "iTag": "mapSender",
         "iType": "SubscriberInterface", "iCls": "MapMsg", "addr": "/map"},
        {"eTag": container, "iTag": "mapReceiver",
         "iType": "PublisherInterface", "iCls": "MapMsg", "addr": "/map"},
    ]
    connections = [
        {"tagA": "globalPlanner/mapSender", "tagB": f"{container}/mapReceiver"},
    ]
    for name in robot_names:
        interfaces.extend([
            {"eTag": "globalPlanner", "iTag": f"pathSender_{name}",
             "iType": "SubscriberInterface", "iCls": "PathMsg",
             "addr": f"/{name}/goalNodesList"},
            {"eTag": "globalPlanner", "iTag": f"cancelSender_{name}",
             "iType": "SubscriberInterface", "iCls": "Flag",
             "addr": f"/{name}/cancelGoal"},
            {"eTag": "globalPlanner", "iTag": f"poseReceiver_{name}",
             "iType": "PublisherInterface", "iCls": "PoseMsg",
             "addr": f"/{name}/amcl_pose"},
            {"eTag": "globalPlanner", "iTag": f"obstacleReceiver_{name}",
             "iType": "PublisherInterface", "iCls": "ObstacleMsg",
             "addr": f"/{name}/obstacle"},
            {"eTag": container, "iTag": f"pathReceiver_{name}",
             "iType": "PublisherInterface", "iCls": "PathMsg",
             "addr": f"/{name}/goalNodesList"},
            {"eTag": container, "iTag": f"cancelReceiver_{name}",
             "iType": "PublisherInterface", "iCls": "Flag",
             "addr": f"/{name}/cancelGoal"},
            {"eTag": container, "iTag": f"poseSender_{name}",
             "iType": "SubscriberInterface", "iCls": "PoseMsg",
             "addr": f"/{name}/amcl_pose"},
            {"eTag": container, "iTag": f"obstacleSender_{name}",
             "iType": "SubscriberInterface", "iCls": "ObstacleMsg",
             "addr": f"/{name}/obstacle"},
        ])
        connections.extend([
            {"tagA": f"globalPlanner/pathSender_{name}",
             "tagB": f"{container}/pathReceiver_{name}"},
            {"tagA": f"globalPlanner/cancelSender_{name}",
             "tagB": f"{container}/cancelReceiver_{name}"},
            {"tagA": f"{container}/poseSender_{name}",
             "tagB": f"globalPlanner/poseReceiver_{name}"},
            {"tagA": f"{container}/obstacleSender_{name}",
             "tagB": f"globalPlanner/obstacleReceiver_{name}"},
        ])
    return {
        "url": "http://server:9000/",
        "userID": user,
        "password": password,
        "robotID": "globalPlanner",
        "containers": [{"cTag": container}],
        "nodes": [],
        "interfaces": interfaces,
        "connections": connections,
    }


def _build_cloud(scenario: Scenario) -> FleetStack:
    loop, net, log, world, grid = _base(scenario)
    server = CloudServer(net, host="server")
    names = [r.name for r in scenario.robots]

    server.handshake({"url": "http://server:9000/", "userID": "testUser",
                      "password": "testUser", "robotID": "globalPlanner"},
                     robot_host="planner")
    planner_report = server.apply_config(
        CloudConfig.from_dict(planner_cloud_config(names)))
    reports = {"globalPlanner": planner_report}
    robots = {}
    for spec in scenario.robots:
        server.handshake({"url": "http://server:9000/", "userID": "testUser",
                          "password": "testUser", "robotID": spec.name},
                         robot_host=spec.name)
        reports[spec.name] = server.apply_config(
            CloudConfig.from_dict(robot_cloud_config(spec.name)))
    for robot_id, report in reports.items():
        failures = report.failures()
        if failures:
            raise ConfigError(f"cloud provisioning failed for {robot_id}: "
                              f"{failures}")

    planner_scope = RegistryScope(
        server.endpoints["globalPlanner"].scope,
        net.node(NodeId("planner", "global_planner")))
    planner = GlobalPlanner(planner_scope, loop, grid, names,
                            events=log.write, world=world)
    # robots listen to the command topics move_client republishes
    for spec in scenario.robots:
        endpoint = server.endpoints[spec.name]
        node = net.node(NodeId(spec.name, "robot", spec.name))
        scope = RegistryScope(endpoint.scope, node)
        robots[spec.name] = _make_robot(scenario, spec, scope, loop, world,
                                        TopicMap.local(), log)
    return FleetStack(scenario, loop, net, world, grid, planner, robots, log,
                      extras={"server": server, "reports": reports})


def run_scenario(scenario: Scenario) -> FleetStack:
    stack = build_stack(scenario)
    stack.run()
    return stack
