"""The three communication architectures: single-master, multi-master, cloud."""

from .registry import Registry, TopicEntry
from .single import SingleMasterTopology
from .multi import DomainRegistry, MultiMasterTopology, RelayNode
from .cloud import (
    CloudConfig,
    CloudServer,
    Container,
    EndpointInterface,
    ProvisionReport,
    RobotEndpoint,
)

__all__ = [
    "Registry",
    "TopicEntry",
    "SingleMasterTopology",
    "DomainRegistry",
    "MultiMasterTopology",
    "RelayNode",
    "CloudConfig",
    "CloudServer",
    "Container",
    "EndpointInterface",
    "ProvisionReport",
    "RobotEndpoint",
]
