"""Payload codecs for the fleet's message types.

Payloads are canonical JSON (sorted keys, compact separators) so that two
runs with the same seed produce byte-identical envelopes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

MSG_PATH = "PathMsg"
MSG_POSE = "PoseMsg"
MSG_FLAG = "Flag"
MSG_MAP = "MapMsg"
MSG_OBSTACLE = "ObstacleMsg"
MSG_BLOB = "Blob"


def _dump(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _load(payload: bytes) -> dict:
    return json.loads(payload.decode("utf-8"))


@dataclass(frozen=True)
class PathPayload:
    robot: str
    cells: tuple[int, ...]
    map_version: int

    def encode(self) -> bytes:
        return _dump({"robot": self.robot, "cells": list(self.cells),
                      "mapVersion": self.map_version})

    @classmethod
    def decode(cls, payload: bytes) -> "PathPayload":
        doc = _load(payload)
        return cls(doc["robot"], tuple(doc["cells"]), doc["mapVersion"])


@dataclass(frozen=True)
class CancelPayload:
    robot: str
    value: int
    map_version: int

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise ValueError("cancel flag is binary")

    def encode(self) -> bytes:
        return _dump({"robot": self.robot, "value": self.value,
                      "mapVersion": self.map_version})

    @classmethod
    def decode(cls, payload: bytes) -> "CancelPayload":
        doc = _load(payload)
        return cls(doc["robot"], doc["value"], doc["mapVersion"])


@dataclass(frozen=True)
class PosePayload:
    robot: str
    x: float
    y: float
    heading: float
    cell: int
    stamp_ns: int
    request_replan: bool = False

    def encode(self) -> bytes:
        return _dump({"robot": self.robot, "x": self.x, "y": self.y,
                      "heading": self.heading, "cell": self.cell,
                      "stampNs": self.stamp_ns,
                      "requestReplan": self.request_replan})

    @classmethod
    def decode(cls, payload: bytes) -> "PosePayload":
        doc = _load(payload)
        return cls(doc["robot"], doc["x"], doc["y"], doc["heading"],
                   doc["cell"], doc["stampNs"], doc.get("requestReplan", False))


@dataclass(frozen=True)
class ObstaclePayload:
    robot: str
    cells: tuple[int, ...]
    map_version: int

    def encode(self) -> bytes:
        return _dump({"robot": self.robot, "cells": list(self.cells),
                      "mapVersion": self.map_version})

    @classmethod
    def decode(cls, payload: bytes) -> "ObstaclePayload":
        doc = _load(payload)
        return cls(doc["robot"], tuple(doc["cells"]), doc["mapVersion"])


@dataclass(frozen=True)
class MapSnapshotPayload:
    width: int
    height: int
    blocked: tuple[int, ...]
    version: int

    def encode(self) -> bytes:
        return _dump({"kind": "snapshot", "width": self.width,
                      "height": self.height,
                      "blocked": sorted(self.blocked),
                      "version": self.version})


@dataclass(frozen=True)
class MapDeltaPayload:
    version: int
    added: tuple[int, ...]
    removed: tuple[int, ...]

    def encode(self) -> bytes:
        return _dump({"kind": "delta", "version": self.version,
                      "added": sorted(self.added),
                      "removed": sorted(self.removed)})


def decode_map(payload: bytes) -> MapSnapshotPayload | MapDeltaPayload:
    doc = _load(payload)
    if doc["kind"] == "snapshot":
        return MapSnapshotPayload(doc["width"], doc["height"],
                                  tuple(doc["blocked"]), doc["version"])
    return MapDeltaPayload(doc["version"], tuple(doc["added"]),
                           tuple(doc["removed"]))
