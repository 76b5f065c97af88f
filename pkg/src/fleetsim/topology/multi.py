"""Multi-master architecture: one registry per domain plus discovery and sync.

Each domain runs its own master; nothing crosses a domain boundary unless
the importing domain has put the topic on its sync allowlist.  Domains find
each other through periodic heartbeat announcements carrying the announcing
domain's topic list; a peer that misses three heartbeats is expired.
Namespace conflicts between domains are avoided with relay nodes that
republish a local topic under a namespaced name.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from ..errors import InvalidRelay, MasterDown
from ..messaging import Envelope, Node, NodeId, SubscriptionHandle, TopicHandle
from ..virtualnet import VirtualNet
from .registry import Registry

DISCOVERY_TOPIC = "/__discovery"
DEFAULT_DISCOVERY_PERIOD_S = 1.0
EXPIRY_MISSED_PERIODS = 3
# Label kept from the conventional multicast discovery group; the virtual
# broadcast bus stands in for actual multicast.
DEFAULT_MCAST_GROUP = "224.0.0.1"


@dataclass
class PeerInfo:
    domain: str
    address: str
    last_heartbeat_ns: int
    topics: list[str]
    seq: int


class RelayNode:
    """Republishes one local topic under another name with its own sequence."""

    def __init__(self, registry: Registry, net: VirtualNet, host: str,
                 src_topic: str, dst_topic: str):
        if src_topic == dst_topic:
            raise InvalidRelay(f"relay {src_topic} -> itself would loop")
        entry = registry.lookup(src_topic)
        if entry is None or not entry.publishers:
            raise InvalidRelay(f"relay source {src_topic} is not advertised")
        self.src_topic = src_topic
        self.dst_topic = dst_topic
        self.node = net.node(NodeId(host, f"relay{src_topic.replace('/', '_')}"))
        registry.register_node(self.node)
        msg_type = entry.msg_type
        self.out = registry.advertise(self.node, dst_topic, msg_type)
        self.sub = registry.subscribe(self.node, src_topic, msg_type,
                                      self._forward)
        self.forwarded = 0

    def _forward(self, env: Envelope) -> None:
        self.forwarded += 1
        self.out.publish(env.payload)


class DomainRegistry:
    """One domain's master plus its discovery and sync state."""

    def __init__(self, topology: "MultiMasterTopology", domain: str,
                 address: str, discovery_period_s: float):
        self.topology = topology
        self.domain = domain
        self.address = address
        self.discovery_period_s = discovery_period_s
        net = topology.net
        self.master_node = net.node(NodeId(domain, "master"))
        self.local = Registry(f"master[{domain}]", net,
                              master_node=self.master_node)
        self.local.register_node(self.master_node)
        self.known_peers: dict[str, PeerInfo] = {}
        self.sync_allowlist: set[str] = set()
        self._announce_seq = 0
        self._announce_handle = TopicHandle(self.master_node, DISCOVERY_TOPIC,
                                            "Heartbeat")
        self._discovery_sub = SubscriptionHandle(
            node=self.master_node, topic=DISCOVERY_TOPIC, msg_type="Heartbeat",
            callback=self._on_heartbeat)
        self._timer = None

    # -- discovery ---------------------------------------------------------

    def start(self) -> None:
        if self._timer is None:
            self._timer = self.topology.net.loop.call_every(
                self.discovery_period_s, self.announce)

    def stop_announcing(self) -> None:
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def announce(self) -> None:
        """Broadcast a heartbeat carrying this domain's topic list."""
        self._announce_seq += 1
        payload = json.dumps(
            {
                "domain": self.domain,
                "address": self.address,
                "topics": self.local.topic_names(),
                "seq": self._announce_seq,
            },
            sort_keys=True,
        ).encode("utf-8")
        self._announce_handle.publish(payload)
        self._expire_peers()

    def _expire_peers(self) -> None:
        now = self.topology.net.loop.now_ns
        horizon = int(EXPIRY_MISSED_PERIODS * self.discovery_period_s * 1e9)
        stale = [d for d, p in self.known_peers.items()
                 if now - p.last_heartbeat_ns >= horizon]
        for d in stale:
            del self.known_peers[d]

    def _on_heartbeat(self, env: Envelope) -> None:
        info = json.loads(env.payload.decode("utf-8"))
        self.known_peers[info["domain"]] = PeerInfo(
            domain=info["domain"],
            address=info["address"],
            last_heartbeat_ns=self.topology.net.loop.now_ns,
            topics=list(info["topics"]),
            seq=info["seq"],
        )
        self._bind_remote()

    # -- sync ----------------------------------------------------------------

    def sync_topics(self, allowlist: set[str]) -> None:
        """Declare which remote topics this domain may import.

        Entries are exact names or a trailing wildcard form "prefix/*".
        Binding is lazy: a name that matches nothing now binds when the
        topic appears on a peer.
        """
        self.sync_allowlist = set(allowlist)
        self._bind_remote()

    def _allows(self, topic: str) -> bool:
        for pattern in self.sync_allowlist:
            if pattern.endswith("/*"):
                if topic.startswith(pattern[:-1]) or topic == pattern[:-2]:
                    return True
            elif topic == pattern:
                return True
        return False

    def _bind_remote(self) -> None:
        """Connect local subscribers to allowlisted publishers on live peers."""
        if not self.sync_allowlist:
            return
        for peer_domain in sorted(self.known_peers):
            peer = self.topology.domains.get(peer_domain)
            if peer is None:
                continue
            for topic in self.known_peers[peer_domain].topics:
                if not self._allows(topic):
                    continue
                remote_entry = peer.local.lookup(topic)
                local_entry = self.local.lookup(topic)
                if remote_entry is None or local_entry is None:
                    continue
                for handle in remote_entry.publishers.values():
                    for sub in local_entry.subscribers.values():
                        handle.connect(sub)

    def resolvable(self, topic: str) -> list[str]:
        """Publisher names visible for `topic` from inside this domain."""
        if not self.local.alive:
            raise MasterDown(f"master of domain {self.domain} is not alive")
        names: set[str] = set()
        entry = self.local.lookup(topic)
        if entry is not None:
            names.update(entry.publishers)
        if self._allows(topic):
            for peer_domain in self.known_peers:
                if topic in self.known_peers[peer_domain].topics:
                    peer = self.topology.domains.get(peer_domain)
                    if peer is not None:
                        remote = peer.local.lookup(topic)
                        if remote is not None:
                            names.update(remote.publishers)
        return sorted(names)

    def visible_topics(self) -> list[str]:
        names = set(self.local.topic_names())
        for peer in self.known_peers.values():
            names.update(t for t in peer.topics if self._allows(t))
        return sorted(names)

    # -- node-facing API ---------------------------------------------------------

    def node(self, name: str, namespace: str = "") -> Node:
        node = self.topology.net.node(NodeId(self.domain, name, namespace))
        self.local.register_node(node)
        return node

    def advertise(self, node: Node, topic: str, msg_type: str) -> TopicHandle:
        handle = self.local.advertise(node, topic, msg_type)
        # Push-on-change: let peers learn about the new topic right away
        # instead of waiting out the discovery period.
        self.announce()
        return handle

    def subscribe(self, node: Node, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> SubscriptionHandle:
        sub = self.local.subscribe(node, topic, msg_type, callback)
        self._bind_remote()
        return sub

    def relay(self, src_topic: str, dst_topic: str) -> RelayNode:
        relay = RelayNode(self.local, self.topology.net, self.domain,
                          src_topic, dst_topic)
        self.announce()
        return relay


class MultiMasterTopology:
    """A set of domains joined by a discovery broadcast bus."""

    def __init__(self, net: VirtualNet,
                 discovery_period_s: float = DEFAULT_DISCOVERY_PERIOD_S,
                 mcast_group: str = DEFAULT_MCAST_GROUP):
        self.net = net
        self.discovery_period_s = discovery_period_s
        self.mcast_group = mcast_group
        self.domains: dict[str, DomainRegistry] = {}

    def add_domain(self, domain: str, address: str | None = None,
                   start: bool = True) -> DomainRegistry:
        if domain in self.domains:
            return self.domains[domain]
        reg = DomainRegistry(self, domain, address or f"{domain}:11311",
                             self.discovery_period_s)
        # join the broadcast bus: every domain hears every other domain
        for other in self.domains.values():
            reg._announce_handle.connect(other._discovery_sub)
            other._announce_handle.connect(reg._discovery_sub)
        self.domains[domain] = reg
        if start:
            reg.start()
        return reg
