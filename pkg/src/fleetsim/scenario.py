"""Scenario files: parsing, schema validation, shipped presets."""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field

import jsonschema

from .errors import ConfigError
from .messaging import DEFAULT_HEADER_OVERHEAD, LinkModel


def _package_json(subdir: str, filename: str) -> dict:
    ref = importlib.resources.files("fleetsim") / subdir / filename
    return json.loads(ref.read_text(encoding="utf-8"))


def scenario_schema() -> dict:
    return _package_json("schemas", "scenario.schema.json")


@dataclass(frozen=True)
class RobotSpec:
    name: str
    start: int
    speed: float = 1.0
    sensor_range: int = 2
    pose_rate_hz: float = 5.0
    pose_noise_sigma: float = 0.0


@dataclass(frozen=True)
class GoalEvent:
    t: float
    robot: str
    cell: int


@dataclass(frozen=True)
class ObstacleEvent:
    t: float
    op: str
    cell: int
    source: str = "operator"


@dataclass(frozen=True)
class SurpriseEvent:
    t: float
    cell: int


@dataclass
class Scenario:
    name: str
    seed: int
    topology: str
    grid_width: int
    grid_height: int
    duration_s: float
    robots: list[RobotSpec]
    initial_blocked: set[int] = field(default_factory=set)
    goals: list[GoalEvent] = field(default_factory=list)
    obstacles: list[ObstacleEvent] = field(default_factory=list)
    surprises: list[SurpriseEvent] = field(default_factory=list)
    link: LinkModel = field(default_factory=lambda: LinkModel(
        base_latency=0.002, bandwidth=12_500_000.0))
    header_overhead: int = DEFAULT_HEADER_OVERHEAD

    def validate(self) -> None:
        n = self.grid_width * self.grid_height

        def check_cell(cell: int, what: str) -> None:
            if not 0 <= cell < n:
                raise ConfigError(f"{what} cell {cell} outside "
                                  f"{self.grid_width}x{self.grid_height} grid")

        names = [r.name for r in self.robots]
        if len(names) != len(set(names)):
            raise ConfigError("robot names must be unique")
        for robot in self.robots:
            check_cell(robot.start, f"robot {robot.name} start")
            if robot.start in self.initial_blocked:
                raise ConfigError(f"robot {robot.name} starts on blocked cell")
        for cell in self.initial_blocked:
            check_cell(cell, "initially blocked")
        for ev in self.goals:
            check_cell(ev.cell, f"goal for {ev.robot}")
            if ev.robot not in names:
                raise ConfigError(f"goal names unknown robot {ev.robot!r}")
        for ev in self.obstacles:
            check_cell(ev.cell, "obstacle")
        for ev in self.surprises:
            check_cell(ev.cell, "surprise obstacle")
        for series in (self.goals, self.obstacles, self.surprises):
            times = [ev.t for ev in series]
            if times != sorted(times):
                raise ConfigError("script timestamps must be non-decreasing")

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        try:
            jsonschema.validate(doc, scenario_schema())
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"scenario invalid at {path}: {exc.message}") from exc
        link_doc = doc.get("link", {})
        scenario = cls(
            name=doc["name"],
            seed=doc["seed"],
            topology=doc["topology"],
            grid_width=doc["grid"]["width"],
            grid_height=doc["grid"]["height"],
            duration_s=doc["durationS"],
            robots=[RobotSpec(
                name=r["name"], start=r["start"],
                speed=r.get("speed", 1.0),
                sensor_range=r.get("sensorRange", 2),
                pose_rate_hz=r.get("poseRateHz", 5.0),
                pose_noise_sigma=r.get("poseNoiseSigma", 0.0),
            ) for r in doc["robots"]],
            initial_blocked=set(doc["grid"].get("blocked", [])),
            goals=[GoalEvent(g["t"], g["robot"], g["cell"])
                   for g in doc.get("goals", [])],
            obstacles=[ObstacleEvent(o["t"], o["op"], o["cell"],
                                     o.get("source", "operator"))
                       for o in doc.get("obstacles", [])],
            surprises=[SurpriseEvent(s["t"], s["cell"])
                       for s in doc.get("surpriseObstacles", [])],
            link=LinkModel(
                base_latency=link_doc.get("baseLatencyS", 0.002),
                bandwidth=link_doc.get("bandwidthBps", 12_500_000.0),
                jitter=link_doc.get("jitterS", 0.0),
                loss_rate=link_doc.get("lossRate", 0.0),
            ),
            header_overhead=doc.get("headerOverhead", DEFAULT_HEADER_OVERHEAD),
        )
        scenario.validate()
        return scenario

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_file(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @classmethod
    def preset(cls, name: str) -> "Scenario":
        """Load a scenario shipped with the package (e.g. "fig6")."""
        try:
            return cls.from_dict(_package_json("scenarios", f"{name}.json"))
        except FileNotFoundError:
            raise ConfigError(f"no shipped scenario named {name!r}") from None
