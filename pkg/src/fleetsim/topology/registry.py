"""Name-resolution core shared by every topology.

A `Registry` does the match-making: it records who advertises and who
subscribes, type-checks the pairing, and wires publisher handles to
subscriber handles.  The single-master topology uses one global registry;
the multi-master topology runs one per domain; the cloud topology reuses it
as the always-alive local bus inside each endpoint scope and container.

The wiring a registry creates outlives the registry itself: peer links live
on the publishers' handles, so killing the master freezes the name service
but not established flows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from ..errors import MasterDown, NameConflict, TypeMismatch
from ..messaging import Envelope, Node, SubscriptionHandle, TopicHandle
from ..virtualnet import VirtualNet

MASTER_NS = "/__master"


@dataclass
class TopicEntry:
    msg_type: str
    publishers: dict[str, TopicHandle] = field(default_factory=dict)
    subscribers: dict[str, SubscriptionHandle] = field(default_factory=dict)


class Registry:
    """Publisher/subscriber directory with type checking and late binding."""

    def __init__(self, name: str, net: VirtualNet,
                 master_node: Node | None = None):
        self.name = name
        self.net = net
        self.master_node = master_node  # None for local (in-process) buses
        self.alive = True
        self.nodes: dict[str, Node] = {}
        self.topics: dict[str, TopicEntry] = {}
        self._control_seq = 0

    # -- registration ---------------------------------------------------------

    def register_node(self, node: Node, master_uri: str | None = None) -> None:
        """Admit a node; duplicate fully-qualified names are rejected.

        The underlying middleware would silently replace the earlier node,
        which is exactly the hazard namespacing exists to avoid; rejecting
        makes the conflict visible and testable.
        """
        self._require_alive()
        fqn = node.node_id.fqn
        existing = self.nodes.get(fqn)
        if existing is not None and existing is not node:
            raise NameConflict(f"node name already registered: {fqn}")
        self.nodes[fqn] = node
        self._control(node, "register", {"node": fqn, "uri": master_uri or ""})

    def advertise(self, node: Node, topic: str, msg_type: str) -> TopicHandle:
        self._require_alive()
        self._require_registered(node)
        entry = self._entry(topic, msg_type)
        fqn = node.node_id.fqn
        handle = entry.publishers.get(fqn)
        if handle is None:
            handle = TopicHandle(node, topic, msg_type)
            entry.publishers[fqn] = handle
            self._control(node, "advertise", {"topic": topic, "type": msg_type})
            self._match(entry)
        return handle

    def subscribe(self, node: Node, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> SubscriptionHandle:
        self._require_alive()
        self._require_registered(node)
        entry = self._entry(topic, msg_type)
        sub = SubscriptionHandle(node=node, topic=topic, msg_type=msg_type,
                                 callback=callback)
        entry.subscribers[sub.key] = sub
        self._control(node, "subscribe", {"topic": topic, "type": msg_type})
        self._match(entry)
        return sub

    def unsubscribe(self, sub: SubscriptionHandle) -> None:
        entry = self.topics.get(sub.topic)
        if entry is None:
            return
        entry.subscribers.pop(sub.key, None)
        for handle in entry.publishers.values():
            handle.disconnect(sub.key)

    # -- resolution -----------------------------------------------------------

    def lookup(self, topic: str) -> TopicEntry | None:
        return self.topics.get(topic)

    def resolve_and_connect(self, topic: str) -> set[tuple[str, str]]:
        """Wire every (publisher, subscriber) pair for `topic`; return the pairs."""
        self._require_alive()
        entry = self.topics.get(topic)
        if entry is None:
            return set()
        self._match(entry)
        return {(pub, sub.node.node_id.fqn)
                for pub in entry.publishers
                for sub in entry.subscribers.values()}

    def topic_names(self) -> list[str]:
        """Advertised topics, in a stable order (control topics excluded)."""
        return sorted(t for t, e in self.topics.items()
                      if e.publishers and not t.startswith(MASTER_NS))

    # -- lifecycle -------------------------------------------------------------

    def kill(self) -> None:
        """Stop the name service; established peer links keep flowing."""
        self.alive = False

    # -- internals --------------------------------------------------------------

    def _entry(self, topic: str, msg_type: str) -> TopicEntry:
        if not topic.startswith("/"):
            raise ValueError(f"topic must begin with '/': {topic!r}")
        entry = self.topics.get(topic)
        if entry is None:
            entry = self.topics[topic] = TopicEntry(msg_type=msg_type)
        elif entry.msg_type != msg_type:
            raise TypeMismatch(
                f"topic {topic} is {entry.msg_type}, not {msg_type}")
        return entry

    def _match(self, entry: TopicEntry) -> None:
        for handle in entry.publishers.values():
            for sub in entry.subscribers.values():
                handle.connect(sub)

    def _require_alive(self) -> None:
        if not self.alive:
            raise MasterDown(f"master registry {self.name!r} is not alive")

    def _require_registered(self, node: Node) -> None:
        fqn = node.node_id.fqn
        if fqn not in self.nodes:
            # advertise/subscribe implies registration in practice
            self.register_node(node)
        elif self.nodes[fqn] is not node:
            raise NameConflict(f"node name already registered: {fqn}")

    def _control(self, node: Node, op: str, body: dict) -> None:
        """Account one control message from the node's host to the master."""
        if self.master_node is None or node is self.master_node:
            return
        src_host = node.host
        dst_host = self.master_node.host
        self._control_seq += 1
        env = Envelope(
            topic=f"{MASTER_NS}/{op}",
            msg_type="Control",
            payload=json.dumps(body, sort_keys=True).encode("utf-8"),
            msg_id=self._control_seq,
            sent_at=self.net.loop.now_ns,
            sender=node.node_id,
        )
        if src_host != dst_host:
            size = env.wire_size(self.net.header_overhead)
            self.net.link_counters(src_host, dst_host).record_send(env.topic, size)
            self.net.total_bytes_sent += size
            self.net.total_msgs_sent += 1
        # The master does real work per control message; reflect that in its
        # cpu proxy by running the envelope through its inbox.
        self.master_node.enqueue(env, lambda _e: None)
