"""Multi-robot fleet management simulator.

Three pub/sub architectures (single-master, multi-master, cloud broker), a
grid planner with a cancel-and-replan protocol, kinematic robot agents, and
a benchmark harness for comparative traffic/CPU-proxy/RTT experiments, all
on one deterministic virtual clock.  See the demos/ directory for worked
examples and the `fleet` command for the orchestration surface.
"""

from .clock import EventLoop
from .errors import FleetError
from .fleet import EventLog, FleetStack, build_stack, run_scenario
from .messaging import Envelope, LinkModel, NodeId
from .metrics import (
    MetricsRecord,
    RttSample,
    emit_report,
    measure_rtt,
    run_experiment1,
    run_experiment2,
)
from .planner import GlobalPlanner, GridMap, plan_path
from .robot import RobotAgent, TopicMap, WorldView
from .scenario import Scenario
from .virtualnet import VirtualNet

__all__ = [
    "EventLog",
    "EventLoop",
    "Envelope",
    "FleetError",
    "FleetStack",
    "GlobalPlanner",
    "GridMap",
    "LinkModel",
    "MetricsRecord",
    "NodeId",
    "RobotAgent",
    "RttSample",
    "Scenario",
    "TopicMap",
    "VirtualNet",
    "WorldView",
    "build_stack",
    "emit_report",
    "measure_rtt",
    "plan_path",
    "run_experiment1",
    "run_experiment2",
    "run_scenario",
]
__version__ = "0.1.0"
