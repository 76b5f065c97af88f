"""Cloud-broker architecture: task sets, containers, interfaces, connections.

Robots authenticate against the master task set (handshake on the request
port, answered with a websocket endpoint URL on the external port), then
upload a configuration document that provisions containers, behavior nodes,
typed interfaces, and the explicit interface-to-interface connections that
are the only path data may take across the robot/cloud boundary.

Containers here are in-process sandboxes: each one owns its own local topic
registry, behavior-node table, and namespace set.  They are NOT operating
system containers; the isolation the paper gets from Linux containers is
modeled at the registry/namespace level so the whole system stays
self-contained and deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from ..errors import (
    AlreadyConnected,
    AuthFailed,
    ConfigError,
    InvalidConnection,
    NameConflict,
    TypeMismatch,
    UnknownBehavior,
)
from ..messaging import Envelope, Node, NodeId, SubscriptionHandle, TopicHandle
from ..virtualnet import VirtualNet
from .registry import Registry

# Port labels preserved from the conventional deployment; in sim mode they
# are labels only, in socket mode they are real TCP ports.
DEFAULT_REQUEST_PORT = 9000   # handshake requests land here
DEFAULT_WS_PORT = 9010        # external data plane
DEFAULT_MASTER_PORT = 8080    # master task set internal control
DEFAULT_COMM_PORT = 10030     # container <-> endpoint internal traffic

PUBLISHER_IFACE = "PublisherInterface"
SUBSCRIBER_IFACE = "SubscriberInterface"
SERVICE_CLIENT_IFACE = "ServiceClientInterface"
SERVICE_PROVIDER_IFACE = "ServiceProviderInterface"
INTERFACE_TYPES = {
    PUBLISHER_IFACE,
    SUBSCRIBER_IFACE,
    SERVICE_CLIENT_IFACE,
    SERVICE_PROVIDER_IFACE,
}
# sides that originate data on a connection
_SOURCE_TYPES = {SUBSCRIBER_IFACE, SERVICE_CLIENT_IFACE}


def _norm_topic(raw: str) -> str:
    topic = raw.strip()
    return topic if topic.startswith("/") else f"/{topic}"


def _check_schema(doc: dict) -> None:
    import importlib.resources

    import jsonschema

    ref = importlib.resources.files("fleetsim") / "schemas" \
        / "cloud_config.schema.json"
    schema = json.loads(ref.read_text(encoding="utf-8"))
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"cloud config invalid at {path}: "
                          f"{exc.message}") from exc


# ---------------------------------------------------------------------------
# configuration document
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterfaceDecl:
    eTag: str
    iTag: str
    iType: str
    iCls: str
    addr: str

    @property
    def tag(self) -> str:
        return f"{self.eTag}/{self.iTag}"


@dataclass(frozen=True)
class NodeDecl:
    cTag: str
    nTag: str
    pkg: str
    exe: str
    args: str
    namespace: str


@dataclass(frozen=True)
class ConnectionDecl:
    tagA: str
    tagB: str


@dataclass
class CloudConfig:
    """Parsed robot-side configuration document."""

    url: str
    user_id: str
    password: str
    robot_id: str
    containers: list[str]
    nodes: list[NodeDecl]
    interfaces: list[InterfaceDecl]
    connections: list[ConnectionDecl]

    @classmethod
    def from_dict(cls, doc: dict) -> "CloudConfig":
        _check_schema(doc)
        try:
            containers = [c["cTag"] for c in doc.get("containers", [])]
            nodes = [NodeDecl(c["cTag"], c["nTag"], c["pkg"], c["exe"],
                              c.get("args", ""), c.get("namespace", ""))
                     for c in doc.get("nodes", [])]
            interfaces = [InterfaceDecl(i["eTag"], i["iTag"], i["iType"],
                                        i["iCls"], i["addr"])
                          for i in doc.get("interfaces", [])]
            connections = [ConnectionDecl(c["tagA"], c["tagB"])
                           for c in doc.get("connections", [])]
            cfg = cls(
                url=doc["url"],
                user_id=doc["userID"],
                password=doc["password"],
                robot_id=doc["robotID"],
                containers=containers,
                nodes=nodes,
                interfaces=interfaces,
                connections=connections,
            )
        except KeyError as exc:
            raise ConfigError(f"cloud config missing field: {exc.args[0]}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "CloudConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cloud config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        declared_containers = set(self.containers)
        if len(self.containers) != len(declared_containers):
            raise ConfigError("duplicate cTag in containers block")
        for node in self.nodes:
            if node.cTag not in declared_containers:
                raise ConfigError(
                    f"node {node.nTag} references undeclared container {node.cTag}")
        iface_tags: set[str] = set()
        for iface in self.interfaces:
            if iface.iType not in INTERFACE_TYPES:
                raise ConfigError(f"unknown iType {iface.iType!r} on {iface.tag}")
            if iface.tag in iface_tags:
                raise ConfigError(f"duplicate interface tag {iface.tag}")
            iface_tags.add(iface.tag)
        for conn in self.connections:
            for tag in (conn.tagA, conn.tagB):
                if "/" not in tag:
                    raise InvalidConnection(
                        f"connection tag {tag!r} is not endpointTag/interfaceTag")
                if tag not in iface_tags:
                    raise InvalidConnection(
                        f"connection references undeclared interface {tag!r}")


# ---------------------------------------------------------------------------
# runtime entities
# ---------------------------------------------------------------------------

class EndpointInterface:
    """Typed attachment point on a robot endpoint or container endpoint.

    SubscriberInterface / ServiceClientInterface originate data on a
    connection; PublisherInterface / ServiceProviderInterface terminate it.
    """

    def __init__(self, decl: InterfaceDecl, owner_node: Node, scope: Registry):
        self.decl = decl
        self.owner_node = owner_node
        self.scope = scope
        self.addr = _norm_topic(decl.addr)
        self.connections: list["Connection"] = []
        self._sub: SubscriptionHandle | None = None
        self._pub: TopicHandle | None = None
        self._service: Callable[[bytes], bytes] | None = None
        self._pending_calls: dict[int, Callable[[bytes], None]] = {}
        self._call_seq = 0
        if decl.iType == SUBSCRIBER_IFACE:
            self._sub = scope.subscribe(owner_node, self.addr, decl.iCls,
                                        self._on_local)
        elif decl.iType == PUBLISHER_IFACE:
            self._pub = scope.advertise(owner_node, self.addr, decl.iCls)
        elif decl.iType == SERVICE_PROVIDER_IFACE:
            # trivial echo service; the config format names services but the
            # deployments exercised here never call anything richer
            self._service = lambda request: request

    @property
    def tag(self) -> str:
        return self.decl.tag

    @property
    def is_source(self) -> bool:
        return self.decl.iType in _SOURCE_TYPES

    # -- pub/sub path -------------------------------------------------------

    def _on_local(self, env: Envelope) -> None:
        for conn in self.connections:
            conn.transfer(self, env)

    def receive(self, env: Envelope) -> None:
        """Terminate a connection crossing: publish into the local scope."""
        if self._pub is not None:
            self._pub.publish(env.payload)

    # -- service path ---------------------------------------------------------

    def call(self, request: bytes, callback: Callable[[bytes], None]) -> None:
        if self.decl.iType != SERVICE_CLIENT_IFACE:
            raise TypeMismatch(f"{self.tag} is not a service client")
        if not self.connections:
            raise InvalidConnection(f"{self.tag} has no wired connection")
        self._call_seq += 1
        self._pending_calls[self._call_seq] = callback
        env = Envelope(topic=self.addr, msg_type=self.decl.iCls,
                       payload=request, msg_id=self._call_seq,
                       sent_at=self.owner_node.net.loop.now_ns,
                       sender=self.owner_node.node_id)
        self.connections[0].transfer(self, env)

    def handle_request(self, env: Envelope, reply: Callable[[bytes, int], None]) -> None:
        if self._service is not None:
            reply(self._service(env.payload), env.msg_id)

    def handle_response(self, env: Envelope) -> None:
        callback = self._pending_calls.pop(env.msg_id, None)
        if callback is not None:
            callback(env.payload)


class Connection:
    """Explicit wiring between two interfaces; the only boundary data path."""

    def __init__(self, net: VirtualNet, a: EndpointInterface, b: EndpointInterface):
        if a.decl.iCls != b.decl.iCls:
            raise TypeMismatch(
                f"connection {a.tag} <-> {b.tag}: class "
                f"{a.decl.iCls!r} != {b.decl.iCls!r}")
        pair = {a.decl.iType, b.decl.iType}
        if pair == {SUBSCRIBER_IFACE, PUBLISHER_IFACE}:
            self.source, self.sink = (a, b) if a.is_source else (b, a)
        elif pair == {SERVICE_CLIENT_IFACE, SERVICE_PROVIDER_IFACE}:
            self.source, self.sink = (a, b) if a.is_source else (b, a)
        else:
            raise TypeMismatch(
                f"connection {a.tag} <-> {b.tag}: incompatible directions "
                f"({a.decl.iType} <-> {b.decl.iType})")
        self.net = net
        self.closed = False
        self.crossings = 0
        self.dropped_in_flight = 0
        self._seq = 0
        # rx subscription handles live on the terminating side's node
        self._sink_rx = SubscriptionHandle(
            node=self.sink.owner_node, topic=self.sink.addr,
            msg_type=self.sink.decl.iCls, callback=self._at_sink)
        self._source_rx = SubscriptionHandle(
            node=self.source.owner_node, topic=self.source.addr,
            msg_type=self.source.decl.iCls, callback=self._at_source)
        a.connections.append(self)
        b.connections.append(self)

    @property
    def key(self) -> str:
        return f"{self.source.tag}~{self.sink.tag}"

    def transfer(self, origin: EndpointInterface, env: Envelope) -> None:
        """Re-frame once and carry the envelope across the boundary."""
        if self.closed:
            return
        self._seq += 1
        self.crossings += 1
        framed = Envelope(topic=self.sink.addr, msg_type=env.msg_type,
                          payload=env.payload, msg_id=env.msg_id,
                          sent_at=self.net.loop.now_ns,
                          sender=origin.owner_node.node_id)
        self.net.send(framed, origin.owner_node.host, self._sink_rx)

    def reply(self, payload: bytes, call_id: int) -> None:
        if self.closed:
            return
        self.crossings += 1
        framed = Envelope(topic=self.source.addr, msg_type=self.source.decl.iCls,
                          payload=payload, msg_id=call_id,
                          sent_at=self.net.loop.now_ns,
                          sender=self.sink.owner_node.node_id)
        self.net.send(framed, self.sink.owner_node.host, self._source_rx)

    def _at_sink(self, env: Envelope) -> None:
        if self.closed:
            self.dropped_in_flight += 1
            return
        if self.sink.decl.iType == SERVICE_PROVIDER_IFACE:
            self.sink.handle_request(env, self.reply)
        else:
            self.sink.receive(env)

    def _at_source(self, env: Envelope) -> None:
        if self.closed:
            self.dropped_in_flight += 1
            return
        self.source.handle_response(env)

    def close(self) -> None:
        self.closed = True


class BehaviorNode:
    """One behavior instance running inside a container."""

    def __init__(self, decl: NodeDecl, node: Node, container: "Container"):
        self.decl = decl
        self.node = node
        self.container = container
        self.state = "running"
        self._subs: list[SubscriptionHandle] = []

    @property
    def nTag(self) -> str:
        return self.decl.nTag

    def _subscribe(self, topic: str, msg_type: str,
                   callback: Callable[[Envelope], None]) -> None:
        sub = self.container.scope.subscribe(self.node, _norm_topic(topic),
                                             msg_type, callback)
        self._subs.append(sub)

    def stop(self) -> None:
        self.state = "stopped"
        for sub in self._subs:
            self.container.scope.unsubscribe(sub)


class MoveClientBehavior(BehaviorNode):
    """Bridges planner output to a robot: consumes the per-robot goal list,
    cancel flag, and map stream, republishing each as a namespaced command
    topic the robot endpoint forwards down.

    Argument string: comma-separated "goal topic, cancel topic, map topic".
    """

    def __init__(self, decl: NodeDecl, node: Node, container: "Container"):
        super().__init__(decl, node, container)
        parts = [p.strip() for p in decl.args.split(",") if p.strip()]
        if len(parts) != 3:
            raise ConfigError(
                f"move_client args must be 'goal, cancel, map': {decl.args!r}")
        goal_topic, cancel_topic, map_topic = parts
        ns = decl.namespace or decl.nTag
        scope = container.scope
        self.out_path = scope.advertise(node, f"/{ns}/cmd/path", "PathMsg")
        self.out_cancel = scope.advertise(node, f"/{ns}/cmd/cancel", "Flag")
        self.out_map = scope.advertise(node, f"/{ns}/cmd/map", "MapMsg")
        self._subscribe(goal_topic, "PathMsg",
                        lambda env: self.out_path.publish(env.payload))
        self._subscribe(cancel_topic, "Flag",
                        lambda env: self.out_cancel.publish(env.payload))
        self._subscribe(map_topic, "MapMsg",
                        lambda env: self.out_map.publish(env.payload))


class EchoBehavior(BehaviorNode):
    """Consumes one topic; optionally republishes it (benchmark loopback).

    Argument string: "input[, output[, msg_type]]".  Without an output topic
    the node just counts what it hears, standing in for echoing to a console.
    """

    def __init__(self, decl: NodeDecl, node: Node, container: "Container"):
        super().__init__(decl, node, container)
        parts = [p.strip() for p in decl.args.split(",") if p.strip()]
        if not parts:
            raise ConfigError("echo args must name an input topic")
        msg_type = parts[2] if len(parts) > 2 else "Blob"
        self.echoed = 0
        self.out = None
        if len(parts) > 1:
            self.out = container.scope.advertise(
                node, _norm_topic(parts[1]), msg_type)
        self._subscribe(parts[0], msg_type, self._on_input)

    def _on_input(self, env: Envelope) -> None:
        self.echoed += 1
        if self.out is not None:
            self.out.publish(env.payload)


BEHAVIOR_REGISTRY: dict[tuple[str, str], type[BehaviorNode]] = {
    ("move_client", "move_client_pthread"): MoveClientBehavior,
    ("benchmark", "echo"): EchoBehavior,
}


class Container:
    """In-process compute sandbox hosting behavior nodes."""

    def __init__(self, cTag: str, net: VirtualNet, host: str,
                 comm_port: int = DEFAULT_COMM_PORT):
        self.cTag = cTag
        self.host = host
        self.comm_port = comm_port
        self.state = "running"
        self.scope = Registry(f"container[{cTag}]", net)
        self.endpoint_node = net.node(NodeId(host, f"rce-container-{cTag}"))
        self.scope.register_node(self.endpoint_node)
        self.nodes: dict[str, BehaviorNode] = {}
        self.interfaces: dict[str, EndpointInterface] = {}
        self._net = net

    def spawn_node(self, decl: NodeDecl) -> BehaviorNode:
        existing = self.nodes.get(decl.nTag)
        if existing is not None:
            if existing.decl == decl:
                return existing
            raise NameConflict(
                f"node tag {decl.nTag} already used in container {self.cTag}")
        if decl.namespace and any(b.decl.namespace == decl.namespace
                                  for b in self.nodes.values()):
            raise NameConflict(
                f"namespace {decl.namespace!r} already used in container "
                f"{self.cTag}")
        behavior_cls = BEHAVIOR_REGISTRY.get((decl.pkg, decl.exe))
        if behavior_cls is None:
            raise UnknownBehavior(f"no behavior for pkg={decl.pkg!r} "
                                  f"exe={decl.exe!r}")
        node = self._net.node(NodeId(self.host, decl.nTag, decl.namespace))
        self.scope.register_node(node)
        try:
            behavior = behavior_cls(decl, node, self)
        except Exception:
            # keep the name free so a corrected declaration can retry
            self.scope.nodes.pop(node.node_id.fqn, None)
            raise
        self.nodes[decl.nTag] = behavior
        return behavior

    def stop(self) -> None:
        self.state = "stopped"
        for behavior in self.nodes.values():
            behavior.stop()


class RobotEndpoint:
    """Cloud-side representation of one connected robot."""

    def __init__(self, robot_id: str, robot_host: str, net: VirtualNet):
        self.robot_id = robot_id
        self.robot_host = robot_host
        self.live = True
        self.scope = Registry(f"robot[{robot_id}]", net)
        self.endpoint_node = net.node(NodeId(robot_host, f"rce-ros-{robot_id}"))
        self.scope.register_node(self.endpoint_node)
        self.interfaces: dict[str, EndpointInterface] = {}


@dataclass
class ProvisionReport:
    """What apply_config created (or found already present)."""

    robot_id: str
    containers: list[tuple[str, str]] = field(default_factory=list)
    nodes: list[tuple[str, str]] = field(default_factory=list)
    interfaces: list[tuple[str, str]] = field(default_factory=list)
    connections: list[tuple[str, str]] = field(default_factory=list)

    def created(self, kind: str) -> list[str]:
        entries: list[tuple[str, str]] = getattr(self, kind)
        return [tag for tag, status in entries if status == "created"]

    def failures(self) -> list[tuple[str, str]]:
        out = []
        for kind in ("containers", "nodes", "interfaces", "connections"):
            out.extend((tag, status) for tag, status in getattr(self, kind)
                       if status.startswith("failed"))
        return out

    def is_noop(self) -> bool:
        for kind in ("containers", "nodes", "interfaces", "connections"):
            if any(status == "created" for _, status in getattr(self, kind)):
                return False
        return True


class CloudServer:
    """Master, robot, and container task sets of the broker."""

    def __init__(self, net: VirtualNet, host: str = "server",
                 accounts: dict[str, str] | None = None,
                 request_port: int = DEFAULT_REQUEST_PORT,
                 ws_port: int = DEFAULT_WS_PORT,
                 master_port: int = DEFAULT_MASTER_PORT):
        self.net = net
        self.host = host
        self.accounts = accounts if accounts is not None else {"testUser": "testUser"}
        self.request_port = request_port
        self.ws_port = ws_port
        self.master_port = master_port
        self.master_node = net.node(NodeId(host, "rce-master"))
        self.endpoints: dict[str, RobotEndpoint] = {}
        self.containers: dict[str, Container] = {}
        self.connections: dict[str, Connection] = {}

    # -- handshake ------------------------------------------------------------

    def handshake(self, request: dict, robot_host: str) -> str:
        """Authenticate a robot; returns the external endpoint URL."""
        user = request.get("userID", "")
        password = request.get("password", "")
        robot_id = request.get("robotID", "")
        self._account_traffic(robot_host, "/__cloud/handshake", request)
        if self.accounts.get(user) != password:
            raise AuthFailed(f"bad credentials for user {user!r}")
        existing = self.endpoints.get(robot_id)
        if existing is not None and existing.live:
            raise AlreadyConnected(f"robot {robot_id!r} already connected")
        endpoint = RobotEndpoint(robot_id, robot_host, self.net)
        self.endpoints[robot_id] = endpoint
        return f"ws://{self.host}:{self.ws_port}/"

    def disconnect(self, robot_id: str) -> None:
        endpoint = self.endpoints.get(robot_id)
        if endpoint is not None:
            endpoint.live = False

    # -- provisioning -----------------------------------------------------------

    def apply_config(self, cfg: CloudConfig,
                     container_host: str | None = None) -> ProvisionReport:
        """Provision containers, then nodes, then interfaces, then connections."""
        endpoint = self.endpoints.get(cfg.robot_id)
        if endpoint is None or not endpoint.live:
            raise AuthFailed(f"no live endpoint for robot {cfg.robot_id!r}; "
                             "handshake first")
        self._account_traffic(endpoint.robot_host, "/__cloud/config",
                              {"robotID": cfg.robot_id})
        report = ProvisionReport(robot_id=cfg.robot_id)

        for cTag in cfg.containers:
            if cTag in self.containers:
                report.containers.append((cTag, "exists"))
            else:
                self.containers[cTag] = Container(
                    cTag, self.net, container_host or self.host)
                report.containers.append((cTag, "created"))

        for decl in cfg.nodes:
            container = self.containers[decl.cTag]
            try:
                before = decl.nTag in container.nodes
                container.spawn_node(decl)
                report.nodes.append((decl.nTag, "exists" if before else "created"))
            except (UnknownBehavior, NameConflict, ConfigError) as exc:
                report.nodes.append((decl.nTag, f"failed: {exc}"))

        for decl in cfg.interfaces:
            try:
                status = self._provision_interface(decl, endpoint)
                report.interfaces.append((decl.tag, status))
            except (TypeMismatch, NameConflict, InvalidConnection) as exc:
                report.interfaces.append((decl.tag, f"failed: {exc}"))

        for conn_decl in cfg.connections:
            key_fwd = f"{conn_decl.tagA}~{conn_decl.tagB}"
            key_rev = f"{conn_decl.tagB}~{conn_decl.tagA}"
            if key_fwd in self.connections or key_rev in self.connections:
                report.connections.append((key_fwd, "exists"))
                continue
            a = self._find_interface(conn_decl.tagA, endpoint)
            b = self._find_interface(conn_decl.tagB, endpoint)
            if a is None or b is None:
                missing = conn_decl.tagA if a is None else conn_decl.tagB
                report.connections.append(
                    (key_fwd, f"failed: undeclared interface {missing}"))
                continue
            try:
                conn = Connection(self.net, a, b)
            except TypeMismatch as exc:
                report.connections.append((key_fwd, f"failed: {exc}"))
                continue
            self.connections[key_fwd] = conn
            report.connections.append((key_fwd, "created"))
        return report

    def _provision_interface(self, decl: InterfaceDecl,
                             endpoint: RobotEndpoint) -> str:
        if decl.eTag == endpoint.robot_id:
            owner_node = endpoint.endpoint_node
            scope = endpoint.scope
            table = endpoint.interfaces
        elif decl.eTag in self.containers:
            container = self.containers[decl.eTag]
            owner_node = container.endpoint_node
            scope = container.scope
            table = container.interfaces
        else:
            raise InvalidConnection(
                f"interface {decl.tag} names unknown endpoint {decl.eTag!r}")
        existing = table.get(decl.iTag)
        if existing is not None:
            if existing.decl == decl:
                return "exists"
            raise NameConflict(f"interface tag {decl.tag} already declared")
        table[decl.iTag] = EndpointInterface(decl, owner_node, scope)
        return "created"

    def _find_interface(self, tag: str,
                        endpoint: RobotEndpoint) -> EndpointInterface | None:
        eTag, _, iTag = tag.partition("/")
        if eTag == endpoint.robot_id:
            return endpoint.interfaces.get(iTag)
        container = self.containers.get(eTag)
        if container is not None:
            return container.interfaces.get(iTag)
        # a connection may legitimately name another live robot's interface
        other = self.endpoints.get(eTag)
        if other is not None and other.live:
            return other.interfaces.get(iTag)
        return None

    def remove_connection(self, key: str) -> None:
        conn = self.connections.pop(key, None)
        if conn is not None:
            conn.close()

    def _account_traffic(self, robot_host: str, topic: str, body: dict) -> None:
        if robot_host == self.host:
            return
        size = len(json.dumps(body, sort_keys=True).encode("utf-8")) \
            + self.net.header_overhead
        self.net.link_counters(robot_host, self.host).record_send(topic, size)
        self.net.total_bytes_sent += size
        self.net.total_msgs_sent += 1
