"""Socket-mode transport: real TCP peers, master server, cloud handshake.

The wire format everywhere is the envelope framing from `messaging`:
4-byte big-endian length prefix, then a UTF-8 JSON object.  Control traffic
rides the reserved "/__master/…" topic namespace.

The single-master server only brokers addresses: publishers learn subscriber
listener addresses through it and then connect peer to peer, so killing the
master stops name resolution but leaves established flows running, exactly
like the virtual topology.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable
from urllib.parse import parse_qs, urlparse

from .errors import ConnectFailed, MasterDown, NameConflict, StartupError, TypeMismatch
from .messaging import Envelope, NodeId, decode_frame, encode_frame

CONTROL_TYPE = "Control"


def recv_frame(sock: socket.socket) -> Envelope | None:
    """Read exactly one framed envelope; None on clean EOF."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    body = _recv_exact(sock, length)
    if body is None:
        return None
    env, _rest = decode_frame(header + body)
    return env


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError:
            return None
        if not chunk:
            return None
        buf += chunk
    return buf


def _control_env(op: str, body: dict, sender: NodeId, seq: int) -> Envelope:
    return Envelope(topic=f"/__master/{op}", msg_type=CONTROL_TYPE,
                    payload=json.dumps(body, sort_keys=True).encode("utf-8"),
                    msg_id=seq, sent_at=time.monotonic_ns(), sender=sender)


def bind_or_startup_error(sock: socket.socket, host: str, port: int,
                          what: str) -> None:
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise StartupError(f"{what} cannot bind port {port}: {exc}") from exc


# ---------------------------------------------------------------------------
# single-master socket server
# ---------------------------------------------------------------------------

class MasterServer:
    """Name service over TCP: register/advertise/subscribe plus peer pushes."""

    def __init__(self, host: str = "127.0.0.1", port: int = 11311):
        self.host = host
        self.port = port
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        bind_or_startup_error(self._sock, host, port, "master")
        self.port = self._sock.getsockname()[1]
        self._sock.listen(32)
        self.alive = True
        self.nodes: dict[str, socket.socket] = {}
        self.topics: dict[str, dict] = {}  # topic -> {type, pubs{fqn:conn}, subs{fqn:addr}}
        self._lock = threading.Lock()
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._accept_thread.start()

    @property
    def uri(self) -> str:
        return f"http://{self.host}:{self.port}"

    def _accept_loop(self) -> None:
        while self.alive:
            try:
                conn, _addr = self._sock.accept()
            except OSError:
                return
            thread = threading.Thread(target=self._serve_client,
                                      args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve_client(self, conn: socket.socket) -> None:
        while True:
            env = recv_frame(conn)
            if env is None:
                conn.close()
                return
            op = env.topic.rsplit("/", 1)[-1]
            body = json.loads(env.payload.decode("utf-8"))
            with self._lock:
                reply = self._handle(op, body, env.sender, conn)
            frame = _control_env("reply", reply, NodeId("master", "master"), 0)
            try:
                conn.sendall(encode_frame(frame))
            except OSError:
                conn.close()
                return

    def _handle(self, op: str, body: dict, sender: NodeId,
                conn: socket.socket) -> dict:
        if not self.alive:
            return {"error": "MasterDown"}
        fqn = sender.fqn
        if op == "register":
            if fqn in self.nodes and not body.get("reregister"):
                return {"error": "NameConflict", "node": fqn}
            self.nodes[fqn] = conn
            return {"ok": True}
        if fqn not in self.nodes:
            return {"error": "NotRegistered"}
        if op == "advertise":
            topic, msg_type = body["topic"], body["type"]
            entry = self.topics.setdefault(
                topic, {"type": msg_type, "pubs": {}, "subs": {}})
            if entry["type"] != msg_type:
                return {"error": "TypeMismatch", "have": entry["type"]}
            entry["pubs"][fqn] = conn
            # push every known subscriber address to this publisher
            return {"ok": True,
                    "peers": sorted(entry["subs"].values())}
        if op == "subscribe":
            topic, msg_type = body["topic"], body["type"]
            addr = body["addr"]  # "host:port" data listener of the subscriber
            entry = self.topics.setdefault(
                topic, {"type": msg_type, "pubs": {}, "subs": {}})
            if entry["type"] != msg_type:
                return {"error": "TypeMismatch", "have": entry["type"]}
            entry["subs"][fqn] = addr
            # notify existing publishers about the new subscriber
            note = _control_env("peer", {"topic": topic, "addr": addr},
                                NodeId("master", "master"), 0)
            for pub_conn in entry["pubs"].values():
                try:
                    pub_conn.sendall(encode_frame(note))
                except OSError:
                    pass
            return {"ok": True}
        if op == "lookup":
            entry = self.topics.get(body["topic"])
            if entry is None:
                return {"ok": True, "pubs": []}
            return {"ok": True, "pubs": sorted(entry["pubs"])}
        return {"error": f"unknown op {op!r}"}

    def kill(self) -> None:
        """Stop answering; peers keep their established links."""
        self.alive = False

    def close(self) -> None:
        self.alive = False
        try:
            self._sock.close()
        except OSError:
            pass


class SocketNode:
    """Client-side node: a control channel to the master plus peer links."""

    def __init__(self, node_id: NodeId, master_host: str, master_port: int,
                 connect_timeout: float = 2.0):
        self.node_id = node_id
        self._seq = 0
        self._lock = threading.Lock()
        self._control = socket.create_connection(
            (master_host, master_port), timeout=connect_timeout)
        self._control.settimeout(None)
        self._replies: list[Envelope] = []
        self._reply_ready = threading.Condition()
        self._subs: dict[str, Callable[[Envelope], None]] = {}
        self._pub_links: dict[str, list[socket.socket]] = {}
        self._pub_types: dict[str, str] = {}
        self._pub_msg_ids: dict[str, int] = {}
        self._known_peer_addrs: dict[str, set[str]] = {}
        # data listener for incoming peer links
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(16)
        self.data_addr = "{}:{}".format(*self._listener.getsockname())
        self.closed = False
        threading.Thread(target=self._accept_data, daemon=True).start()
        threading.Thread(target=self._control_reader, daemon=True).start()

    # -- control plane ------------------------------------------------------

    def _control_reader(self) -> None:
        while not self.closed:
            env = recv_frame(self._control)
            if env is None:
                return
            if env.topic.endswith("/peer"):
                body = json.loads(env.payload.decode("utf-8"))
                self._connect_peer(body["topic"], body["addr"])
            else:
                with self._reply_ready:
                    self._replies.append(env)
                    self._reply_ready.notify()

    def _call(self, op: str, body: dict, timeout: float = 5.0) -> dict:
        with self._lock:
            self._seq += 1
            frame = _control_env(op, body, self.node_id, self._seq)
            self._control.sendall(encode_frame(frame))
        with self._reply_ready:
            if not self._replies:
                self._reply_ready.wait(timeout)
            if not self._replies:
                raise ConnectFailed(f"master did not answer {op}")
            reply = self._replies.pop(0)
        doc = json.loads(reply.payload.decode("utf-8"))
        if "error" in doc:
            error = doc["error"]
            if error == "MasterDown":
                raise MasterDown("master is not alive")
            if error == "NameConflict":
                raise NameConflict(doc.get("node", ""))
            if error == "TypeMismatch":
                raise TypeMismatch(doc.get("have", ""))
            raise ConnectFailed(f"master refused {op}: {error}")
        return doc

    def register(self) -> None:
        self._call("register", {"addr": self.data_addr})

    def advertise(self, topic: str, msg_type: str) -> None:
        self._pub_types[topic] = msg_type
        self._pub_msg_ids.setdefault(topic, 0)
        reply = self._call("advertise", {"topic": topic, "type": msg_type})
        for addr in reply.get("peers", []):
            self._connect_peer(topic, addr)

    def subscribe(self, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> None:
        self._subs[topic] = callback
        self._call("subscribe", {"topic": topic, "type": msg_type,
                                 "addr": self.data_addr})

    def lookup(self, topic: str) -> list[str]:
        return self._call("lookup", {"topic": topic})["pubs"]

    # -- data plane ----------------------------------------------------------

    def _connect_peer(self, topic: str, addr: str) -> None:
        seen = self._known_peer_addrs.setdefault(topic, set())
        if addr in seen:
            return
        seen.add(addr)
        host, port = addr.rsplit(":", 1)
        try:
            link = socket.create_connection((host, int(port)), timeout=2.0)
        except OSError:
            return
        self._pub_links.setdefault(topic, []).append(link)

    def _accept_data(self) -> None:
        while not self.closed:
            try:
                conn, _addr = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._peer_reader, args=(conn,),
                             daemon=True).start()

    def _peer_reader(self, conn: socket.socket) -> None:
        while not self.closed:
            env = recv_frame(conn)
            if env is None:
                conn.close()
                return
            callback = self._subs.get(env.topic)
            if callback is not None:
                callback(env)

    def publish(self, topic: str, payload: bytes) -> int:
        """Send to every connected peer; returns the assigned msg id."""
        self._pub_msg_ids[topic] += 1
        env = Envelope(topic=topic, msg_type=self._pub_types[topic],
                       payload=payload, msg_id=self._pub_msg_ids[topic],
                       sent_at=time.monotonic_ns(), sender=self.node_id)
        frame = encode_frame(env)
        for link in self._pub_links.get(topic, []):
            try:
                link.sendall(frame)
            except OSError:
                pass
        return env.msg_id

    def close(self) -> None:
        self.closed = True
        for sock in (self._control, self._listener):
            try:
                sock.close()
            except OSError:
                pass
        for links in self._pub_links.values():
            for link in links:
                try:
                    link.close()
                except OSError:
                    pass


# ---------------------------------------------------------------------------
# multi-master discovery over UDP
# ---------------------------------------------------------------------------

class UdpDiscoveryDomain:
    """Discovery announcements for one domain over real UDP sockets.

    Broadcast is modeled as unicast to a peer list (sandboxes and many LANs
    filter real multicast); the conventional group address is kept as a
    label on the heartbeat payload.
    """

    def __init__(self, name: str, host: str = "127.0.0.1", port: int = 0,
                 period_s: float = 1.0, mcast_label: str = "224.0.0.1",
                 on_discover: Callable[[str], None] | None = None):
        self.name = name
        self.period_s = period_s
        self.mcast_label = mcast_label
        self.on_discover = on_discover or (lambda domain: None)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        bind_or_startup_error(self._sock, host, port, f"domain {name}")
        self.addr = self._sock.getsockname()
        self.peers: list[tuple[str, int]] = []
        self.known_peers: dict[str, float] = {}
        self._seq = 0
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        for target in (self._announce_loop, self._recv_loop):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)

    def _announce_loop(self) -> None:
        while not self._stop.is_set():
            self._seq += 1
            payload = json.dumps({
                "domain": self.name, "address": f"{self.addr[0]}:{self.addr[1]}",
                "group": self.mcast_label, "seq": self._seq,
            }).encode("utf-8")
            for peer in self.peers:
                try:
                    self._sock.sendto(payload, peer)
                except OSError:
                    pass
            self._stop.wait(self.period_s)

    def _recv_loop(self) -> None:
        self._sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                data, _addr = self._sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                return
            try:
                doc = json.loads(data.decode("utf-8"))
            except ValueError:
                continue
            domain = doc.get("domain")
            if domain and domain != self.name:
                fresh = domain not in self.known_peers
                self.known_peers[domain] = time.monotonic()
                if fresh:
                    self.on_discover(domain)

    def close(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# cloud handshake + data bridge
# ---------------------------------------------------------------------------

class CloudHandshakeServer:
    """HTTP front door: credentials in, websocket endpoint URL out."""

    def __init__(self, cloud_server, host: str = "127.0.0.1",
                 request_port: int = 9000, ws_port: int = 9010):
        self.cloud = cloud_server
        self.host = host
        self.ws_port = ws_port
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):  # quiet
                pass

            def _respond(self, code: int, doc: dict) -> None:
                body = json.dumps(doc).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def _handshake(self, params: dict) -> None:
                from .errors import AlreadyConnected, AuthFailed
                try:
                    url = outer.cloud.handshake(
                        params, robot_host=self.client_address[0])
                except AuthFailed as exc:
                    self._respond(401, {"error": "AuthFailed",
                                        "detail": str(exc)})
                    return
                except AlreadyConnected as exc:
                    self._respond(409, {"error": "AlreadyConnected",
                                        "detail": str(exc)})
                    return
                # advertise the real websocket data port, not the virtual label
                self._respond(200, {"url": f"ws://{outer.host}:{outer.ws_port}/"})

            def do_GET(self):
                qs = parse_qs(urlparse(self.path).query)
                self._handshake({k: v[0] for k, v in qs.items()})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                doc = json.loads(self.rfile.read(length) or b"{}")
                self._handshake(doc)

        try:
            self._httpd = ThreadingHTTPServer((host, request_port), Handler)
        except OSError as exc:
            raise StartupError(
                f"handshake server cannot bind port {request_port}: {exc}"
            ) from exc
        self.request_port = self._httpd.server_address[1]
        threading.Thread(target=self._httpd.serve_forever, daemon=True).start()

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()


class CloudDataServer:
    """Framed-envelope data plane on the external port.

    Clients say hello with their robotID, then either push data envelopes
    (published into their endpoint scope, where declared interfaces take
    over) or send control frames: /__cloud/config uploads a configuration
    document, /__cloud/subscribe asks for a topic to be streamed back.
    """

    def __init__(self, cloud_server, host: str = "127.0.0.1",
                 ws_port: int = 9010):
        from .topology.cloud import CloudConfig

        self.cloud = cloud_server
        self._CloudConfig = CloudConfig
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        bind_or_startup_error(self._sock, host, ws_port, "data plane")
        self.ws_port = self._sock.getsockname()[1]
        self._sock.listen(32)
        self.lock = threading.Lock()  # serializes access to the virtual loop
        self._stop = threading.Event()
        threading.Thread(target=self._accept_loop, daemon=True).start()
        threading.Thread(target=self._pump_loop, daemon=True).start()

    def _pump_loop(self) -> None:
        while not self._stop.is_set():
            with self.lock:
                self.cloud.net.loop.run_until_idle()
            self._stop.wait(0.005)

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(conn,),
                             daemon=True).start()

    def _serve(self, conn: socket.socket) -> None:
        hello = recv_frame(conn)
        if hello is None or hello.topic != "/__cloud/hello":
            conn.close()
            return
        robot_id = json.loads(hello.payload.decode("utf-8"))["robotID"]
        endpoint = self.cloud.endpoints.get(robot_id)
        if endpoint is None or not endpoint.live:
            conn.close()
            return
        node = self.cloud.net.node(
            NodeId(endpoint.robot_host, f"bridge-{robot_id}"))
        handles: dict[str, object] = {}
        send_lock = threading.Lock()

        def stream_back(env: Envelope) -> None:
            try:
                with send_lock:
                    conn.sendall(encode_frame(env))
            except OSError:
                pass

        while True:
            env = recv_frame(conn)
            if env is None:
                conn.close()
                self.cloud.disconnect(robot_id)
                return
            if env.topic == "/__cloud/config":
                try:
                    cfg = self._CloudConfig.from_json(
                        env.payload.decode("utf-8"))
                    with self.lock:
                        report = self.cloud.apply_config(cfg)
                    body = {"ok": True,
                            "containers": report.containers,
                            "nodes": report.nodes,
                            "interfaces": report.interfaces,
                            "connections": report.connections}
                except Exception as exc:  # report parse/provision failures
                    body = {"ok": False, "error": str(exc)}
                reply = _control_env("report", body,
                                     NodeId(self.cloud.host, "rce-master"), 0)
                stream_back(reply)
            elif env.topic == "/__cloud/subscribe":
                body = json.loads(env.payload.decode("utf-8"))
                with self.lock:
                    endpoint.scope.subscribe(node, body["topic"],
                                             body["type"], stream_back)
            else:
                with self.lock:
                    handle = handles.get(env.topic)
                    if handle is None:
                        handle = endpoint.scope.advertise(
                            node, env.topic, env.msg_type)
                        handles[env.topic] = handle
                    handle.publish(env.payload)

    def close(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass


class CloudRobotClient:
    """Client side of the robot bridge: handshake, config upload, data."""

    def __init__(self, config_doc: dict | str, server_url: str | None = None,
                 retries: int = 3, backoff_s: float = 0.2):
        from .topology.cloud import CloudConfig

        if isinstance(config_doc, str):
            self.config = CloudConfig.from_json(config_doc)
            self._config_text = config_doc
        else:
            self.config = CloudConfig.from_dict(config_doc)
            self._config_text = json.dumps(config_doc)
        self.url = server_url or self.config.url
        self.retries = retries
        self.backoff_s = backoff_s
        self.node_id = NodeId("robot", self.config.robot_id)
        self._sock: socket.socket | None = None
        self._seq = 0
        self._subs: dict[str, Callable[[Envelope], None]] = {}
        self._report: dict | None = None
        self._report_ready = threading.Event()
        self._lock = threading.Lock()

    def connect(self) -> dict:
        """Handshake, open the data plane, upload the config; returns the
        provisioning report."""
        ws_url = http_handshake(self.url, self.config.user_id,
                                self.config.password, self.config.robot_id,
                                retries=self.retries,
                                backoff_s=self.backoff_s)
        parsed = urlparse(ws_url)
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                self._sock = socket.create_connection(
                    (parsed.hostname, parsed.port), timeout=2.0)
                break
            except OSError as exc:
                last_error = exc
                time.sleep(self.backoff_s * (2 ** attempt))
        else:
            raise ConnectFailed(f"data plane {ws_url} unreachable: "
                                f"{last_error}")
        self._sock.settimeout(None)
        threading.Thread(target=self._reader, daemon=True).start()
        self._send("/__cloud/hello", json.dumps(
            {"robotID": self.config.robot_id}).encode("utf-8"), CONTROL_TYPE)
        self._send("/__cloud/config", self._config_text.encode("utf-8"),
                   CONTROL_TYPE)
        if not self._report_ready.wait(5.0):
            raise ConnectFailed("no provisioning report from the cloud")
        report = self._report
        if not report.get("ok"):
            raise ConnectFailed(f"provisioning failed: {report.get('error')}")
        return report

    def _send(self, topic: str, payload: bytes, msg_type: str) -> None:
        with self._lock:
            self._seq += 1
            env = Envelope(topic=topic, msg_type=msg_type, payload=payload,
                           msg_id=self._seq, sent_at=time.monotonic_ns(),
                           sender=self.node_id)
            self._sock.sendall(encode_frame(env))

    def _reader(self) -> None:
        while self._sock is not None:
            env = recv_frame(self._sock)
            if env is None:
                return
            if env.topic == "/__master/report":
                self._report = json.loads(env.payload.decode("utf-8"))
                self._report_ready.set()
                continue
            callback = self._subs.get(env.topic)
            if callback is not None:
                callback(env)

    def publish(self, topic: str, payload: bytes, msg_type: str) -> None:
        self._send(topic, payload, msg_type)

    def subscribe(self, topic: str, msg_type: str,
                  callback: Callable[[Envelope], None]) -> None:
        self._subs[topic] = callback
        self._send("/__cloud/subscribe", json.dumps(
            {"topic": topic, "type": msg_type}).encode("utf-8"), CONTROL_TYPE)

    def close(self) -> None:
        sock, self._sock = self._sock, None
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass


def http_handshake(url: str, user_id: str, password: str, robot_id: str,
                   retries: int = 3, backoff_s: float = 0.2,
                   timeout: float = 2.0) -> str:
    """Client side of the handshake; retries with backoff, then gives up."""
    parsed = urlparse(url)
    host, port = parsed.hostname, parsed.port or 9000
    body = json.dumps({"url": url, "userID": user_id, "password": password,
                       "robotID": robot_id}).encode("utf-8")
    request = (f"POST / HTTP/1.1\r\nHost: {host}\r\n"
               f"Content-Type: application/json\r\n"
               f"Content-Length: {len(body)}\r\n"
               f"Connection: close\r\n\r\n").encode("ascii") + body
    last_error: Exception | None = None
    for attempt in range(retries):
        try:
            with socket.create_connection((host, port), timeout=timeout) as s:
                s.sendall(request)
                raw = b""
                while True:
                    chunk = s.recv(65536)
                    if not chunk:
                        break
                    raw += chunk
            header, _, payload = raw.partition(b"\r\n\r\n")
            status = int(header.split(b" ", 2)[1])
            doc = json.loads(payload.decode("utf-8"))
            if status == 200:
                return doc["url"]
            from .errors import AlreadyConnected, AuthFailed
            if doc.get("error") == "AuthFailed":
                raise AuthFailed(doc.get("detail", "credentials rejected"))
            raise AlreadyConnected(doc.get("detail", "robot already live"))
        except (OSError, ValueError, IndexError) as exc:
            last_error = exc
            time.sleep(backoff_s * (2 ** attempt))
    raise ConnectFailed(f"handshake to {url} failed after {retries} "
                        f"attempts: {last_error}")
