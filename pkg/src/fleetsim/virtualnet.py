"""Deterministic virtual network: latency/bandwidth/jitter/loss + byte ledger.

Delivery time for an envelope is

    send time + base_latency + payload/bandwidth + jitter draw

with jitter drawn uniformly from [-jitter, +jitter] and the total clamped at
zero.  Within one (publisher, topic, subscriber) stream deliveries never
reorder: an envelope's arrival is clamped to be no earlier than its
predecessor's, mirroring what a byte stream transport guarantees.

Traffic accounting is per directed host pair ("link").  Same-host delivery
costs zero wire bytes.  A global ledger mirrors the per-link counters so the
harness can cross-check conservation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .clock import EventLoop, s_to_ns
from .messaging import (
    DEFAULT_HEADER_OVERHEAD,
    Envelope,
    LinkModel,
    NodeId,
    Node,
    SubscriptionHandle,
)


@dataclass
class LinkCounters:
    """Wire traffic observed on one directed host-pair link."""

    bytes_sent: int = 0
    msgs_sent: int = 0
    bytes_delivered: int = 0
    msgs_delivered: int = 0
    msgs_lost: int = 0
    by_topic: dict[str, list[int]] = field(default_factory=dict)
    # by_topic[topic] = [bytes_sent, msgs_sent]

    def record_send(self, topic: str, size: int) -> None:
        self.bytes_sent += size
        self.msgs_sent += 1
        entry = self.by_topic.setdefault(topic, [0, 0])
        entry[0] += size
        entry[1] += 1


class VirtualNet:
    """Event-driven transport shared by every node in a sim-mode system."""

    def __init__(self, loop: EventLoop, seed: int | str = 0,
                 default_link: LinkModel | None = None,
                 header_overhead: int = DEFAULT_HEADER_OVERHEAD):
        self.loop = loop
        self.rng = random.Random(f"virtualnet/{seed}")
        self.default_link = default_link or LinkModel()
        self.header_overhead = header_overhead
        self.links: dict[tuple[str, str], LinkModel] = {}
        self.counters: dict[tuple[str, str], LinkCounters] = {}
        self.closed = False
        self.total_bytes_sent = 0
        self.total_msgs_sent = 0
        self.total_dropped = 0
        self._nodes: list[Node] = []
        # last scheduled arrival per (sender fqn, topic, subscriber fqn)
        self._stream_clock: dict[tuple[str, str, str], int] = {}

    # -- node directory ----------------------------------------------------

    def node(self, node_id: NodeId, queue_limit: int | None = None) -> Node:
        """Create a Node owning `node_id`'s inbox.

        Name uniqueness is a registry concern, not a transport one: the
        transport happily creates two nodes with one name so that the
        registries can be the ones to reject the conflict.
        """
        kwargs = {} if queue_limit is None else {"queue_limit": queue_limit}
        node = Node(node_id, self, **kwargs)
        self._nodes.append(node)
        return node

    def nodes(self) -> list[Node]:
        return list(self._nodes)

    # -- link configuration -------------------------------------------------

    def set_link(self, src_host: str, dst_host: str, model: LinkModel) -> None:
        self.links[(src_host, dst_host)] = model

    def link_model(self, src_host: str, dst_host: str) -> LinkModel:
        return self.links.get((src_host, dst_host), self.default_link)

    def link_counters(self, src_host: str, dst_host: str) -> LinkCounters:
        key = (src_host, dst_host)
        counters = self.counters.get(key)
        if counters is None:
            counters = self.counters[key] = LinkCounters()
        return counters

    # -- send path -----------------------------------------------------------

    def send(self, env: Envelope, src_host: str, sub: SubscriptionHandle) -> None:
        dst_host = sub.node.host
        if src_host == dst_host:
            # Local delivery: no wire traffic, next event slot.
            arrival = self._clamp_stream(env, sub, self.loop.now_ns)
            self.loop.call_at(arrival, lambda: self._deliver(env, src_host, sub, local=True))
            return

        model = self.link_model(src_host, dst_host)
        size = env.wire_size(self.header_overhead)
        counters = self.link_counters(src_host, dst_host)
        counters.record_send(env.topic, size)
        self.total_bytes_sent += size
        self.total_msgs_sent += 1

        if model.loss_rate > 0.0 and self.rng.random() < model.loss_rate:
            counters.msgs_lost += 1
            return

        latency = model.base_latency + size / model.bandwidth
        if model.jitter > 0.0:
            latency += self.rng.uniform(-model.jitter, model.jitter)
        arrival = self.loop.now_ns + max(0, s_to_ns(latency))
        arrival = self._clamp_stream(env, sub, arrival)
        self.loop.call_at(arrival, lambda: self._deliver(env, src_host, sub, local=False))

    def _clamp_stream(self, env: Envelope, sub: SubscriptionHandle,
                      arrival: int) -> int:
        key = (env.sender.fqn, env.topic, sub.key)
        arrival = max(arrival, self._stream_clock.get(key, 0))
        self._stream_clock[key] = arrival
        return arrival

    def _deliver(self, env: Envelope, src_host: str, sub: SubscriptionHandle,
                 local: bool) -> None:
        if not local:
            counters = self.link_counters(src_host, sub.node.host)
            counters.bytes_delivered += env.wire_size(self.header_overhead)
            counters.msgs_delivered += 1
        sub.deliver(env)

    def count_dropped(self, env: Envelope) -> None:
        self.total_dropped += 1

    def close(self) -> None:
        self.closed = True

    # -- aggregate views ------------------------------------------------------

    def host_ingress_bytes(self, host: str) -> int:
        return sum(c.bytes_sent for (src, dst), c in self.counters.items()
                   if dst == host)

    def host_egress_bytes(self, host: str) -> int:
        return sum(c.bytes_sent for (src, dst), c in self.counters.items()
                   if src == host)

    def topic_cross_bytes(self, topic: str) -> int:
        """Wire bytes this topic put on all links combined."""
        return sum(c.by_topic.get(topic, [0, 0])[0] for c in self.counters.values())

    def ledger_total(self) -> int:
        return sum(c.bytes_sent for c in self.counters.values())
