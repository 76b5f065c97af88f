"""Single-master architecture: one central registry, global topic visibility.

Every node registers with the one master; all topics are visible to every
other node while the master is alive.  Data flows peer to peer once the
master has matched a publisher with a subscriber, so killing the master
stops name resolution but not established topic flows.
"""

from __future__ import annotations

from typing import Callable

from ..errors import MasterDown
from ..messaging import Envelope, Node, NodeId, SubscriptionHandle, TopicHandle
from ..virtualnet import VirtualNet
from .registry import Registry

DEFAULT_MASTER_PORT = 11311


class SingleMasterTopology:
    """One `Registry` acting as the global master for every node."""

    def __init__(self, net: VirtualNet, master_host: str = "master",
                 port: int = DEFAULT_MASTER_PORT):
        self.net = net
        self.master_host = master_host
        self.port = port
        self.master_node = net.node(NodeId(master_host, "master"))
        self.registry = Registry("master", net, master_node=self.master_node)
        self.registry.register_node(self.master_node)

    @property
    def master_uri(self) -> str:
        return f"http://{self.master_host}:{self.port}"

    @property
    def alive(self) -> bool:
        return self.registry.alive

    def node(self, host: str, name: str, namespace: str = "") -> Node:
        node = self.net.node(NodeId(host, name, namespace))
        self.registry.register_node(node, master_uri=self.master_uri)
        return node

    def register_node(self, node: Node) -> None:
        self.registry.register_node(node, master_uri=self.master_uri)

    def advertise(self, node: Node, topic: str, msg_type: str) -> TopicHandle:
        return self.registry.advertise(node, topic, msg_type)

    def subscribe(self, node: Node, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> SubscriptionHandle:
        return self.registry.subscribe(node, topic, msg_type, callback)

    def lookup(self, node: Node, topic: str) -> list[str]:
        """Publisher names for `topic`, as visible to `node` (global while alive)."""
        if not self.registry.alive:
            raise MasterDown("master registry is not alive")
        entry = self.registry.lookup(topic)
        return sorted(entry.publishers) if entry else []

    def visible_topics(self, node: Node) -> list[str]:
        if not self.registry.alive:
            raise MasterDown("master registry is not alive")
        return self.registry.topic_names()

    def resolve_and_connect(self, topic: str) -> set[tuple[str, str]]:
        return self.registry.resolve_and_connect(topic)

    def kill_master(self) -> None:
        """Idempotent. Existing peer links keep delivering."""
        self.registry.kill()
