"""Uniform advertise/subscribe surface an agent sees, whatever the topology.

The planner and robot agents are written against this small interface; the
fleet builder hands each agent the scope matching the chosen architecture:
the global registry (single-master), its domain registry (multi-master), or
its endpoint's local bus (cloud).
"""

from __future__ import annotations

from typing import Callable

from .messaging import Envelope, Node, SubscriptionHandle, TopicHandle
from .topology.registry import Registry
from .topology.multi import DomainRegistry


class RegistryScope:
    """Scope backed directly by one registry (global master or local bus)."""

    def __init__(self, registry: Registry, node: Node):
        self.registry = registry
        self.node = node
        registry.register_node(node)

    def advertise(self, topic: str, msg_type: str) -> TopicHandle:
        return self.registry.advertise(self.node, topic, msg_type)

    def subscribe(self, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> SubscriptionHandle:
        return self.registry.subscribe(self.node, topic, msg_type, callback)


class DomainScope:
    """Scope backed by a multi-master domain (sync-aware)."""

    def __init__(self, domain: DomainRegistry, node: Node):
        self.domain = domain
        self.node = node
        domain.local.register_node(node)

    def advertise(self, topic: str, msg_type: str) -> TopicHandle:
        return self.domain.advertise(self.node, topic, msg_type)

    def subscribe(self, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> SubscriptionHandle:
        return self.domain.subscribe(self.node, topic, msg_type, callback)
