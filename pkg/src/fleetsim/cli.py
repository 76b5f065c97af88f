"""`fleet` command line: server, robot, sim, bench, replay.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
Environment overrides, mirroring the middleware-URI convention:
    FLEET_MASTER_URI   default server address for `robot` (and `server` port)
    FLEET_HOST         bind host for servers (default 127.0.0.1)
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
import time
from pathlib import Path
from urllib.parse import urlparse

from . import metrics as bench
from .errors import ConfigError, FleetError, StartupError
from .fleet import build_stack
from .messages import MSG_POSE, PosePayload
from .scenario import Scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SIZE_SUFFIXES = {"k": 1024, "m": 1024 * 1024, "g": 1024 * 1024 * 1024}


def _env_host() -> str:
    return os.environ.get("FLEET_HOST", "127.0.0.1")


def _env_master_uri() -> str | None:
    return os.environ.get("FLEET_MASTER_URI")


def parse_size(text: str) -> int:
    raw = text.strip().lower()
    if raw and raw[-1] in SIZE_SUFFIXES:
        return int(float(raw[:-1]) * SIZE_SUFFIXES[raw[-1]])
    return int(raw)


def _wait_for_stop(duration: float | None, stop: threading.Event) -> None:
    def handler(_signum, _frame):
        stop.set()

    signal.signal(signal.SIGINT, handler)
    signal.signal(signal.SIGTERM, handler)
    if duration is not None:
        stop.wait(duration)
        stop.set()
    else:
        while not stop.wait(0.2):
            pass


# ---------------------------------------------------------------------------
# server
# ---------------------------------------------------------------------------

def cmd_server(args) -> int:
    from .sockets import (
        CloudDataServer,
        CloudHandshakeServer,
        MasterServer,
        UdpDiscoveryDomain,
    )

    host = args.host or _env_host()
    stop = threading.Event()
    if args.mode == "single":
        port = args.port if args.port is not None else 11311
        uri = _env_master_uri()
        if uri and args.port is None:
            port = urlparse(uri).port or port
        server = MasterServer(host=host, port=port)
        print(f"[fleet] single-master ready on {server.uri}", flush=True)
        _wait_for_stop(args.duration, stop)
        server.close()
        print("[fleet] master stopped", flush=True)
        return EXIT_OK

    if args.mode == "multi":
        if args.config:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
            domain_specs = doc["domains"]
        else:
            domain_specs = [{"name": "machine1", "port": 0},
                            {"name": "machine2", "port": 0}]
        domains = []
        for spec in domain_specs:
            domain = UdpDiscoveryDomain(
                spec["name"], host=host, port=spec.get("port", 0),
                period_s=spec.get("periodS", 1.0),
                on_discover=lambda peer, me=spec["name"]: print(
                    f"[fleet] domain {me} discovered {peer}", flush=True))
            domains.append(domain)
        addresses = [d.addr for d in domains]
        for domain in domains:
            domain.peers = [a for a in addresses if a != domain.addr]
            print(f"[fleet] domain {domain.name} ready on "
                  f"udp://{domain.addr[0]}:{domain.addr[1]}", flush=True)
            domain.start()
        _wait_for_stop(args.duration, stop)
        for domain in domains:
            domain.close()
        print("[fleet] domains stopped", flush=True)
        return EXIT_OK

    # cloud
    from .clock import EventLoop
    from .topology.cloud import CloudServer
    from .virtualnet import VirtualNet

    accounts = None
    if args.accounts:
        accounts = json.loads(Path(args.accounts).read_text(encoding="utf-8"))
    loop = EventLoop()
    net = VirtualNet(loop, seed=0)
    cloud = CloudServer(net, host="server", accounts=accounts)
    data = CloudDataServer(cloud, host=host,
                           ws_port=args.ws_port if args.ws_port is not None else 9010)
    try:
        front = CloudHandshakeServer(
            cloud, host=host,
            request_port=args.port if args.port is not None else 9000,
            ws_port=data.ws_port)
    except StartupError:
        data.close()
        raise
    print(f"[fleet] master task set ready on http://{host}:"
          f"{front.request_port} (control port {cloud.master_port})",
          flush=True)
    print(f"[fleet] robot task set ready on ws://{host}:{data.ws_port}/",
          flush=True)
    print(f"[fleet] container task set ready (comm port 10030)", flush=True)
    _wait_for_stop(args.duration, stop)
    front.close()
    data.close()
    print("[fleet] cloud stopped", flush=True)
    return EXIT_OK


# ---------------------------------------------------------------------------
# robot
# ---------------------------------------------------------------------------

def cmd_robot(args) -> int:
    from .sockets import CloudRobotClient

    text = Path(args.config).read_text(encoding="utf-8")
    client = CloudRobotClient(text, server_url=args.server or _env_master_uri(),
                              retries=args.retries)
    report = client.connect()
    for kind in ("containers", "nodes", "interfaces", "connections"):
        for tag, status in report.get(kind, []):
            print(f"[fleet] {kind[:-1]} {tag}: {status}", flush=True)
    print(f"[fleet] robot {client.config.robot_id} connected; pose flowing",
          flush=True)

    cell = args.start_cell
    width = args.grid_width
    stop = threading.Event()

    def pose_stream() -> None:
        seq = 0
        while not stop.is_set():
            pose = PosePayload(robot=client.config.robot_id,
                               x=float(cell % width), y=float(cell // width),
                               heading=0.0, cell=cell,
                               stamp_ns=time.monotonic_ns())
            client.publish("/amcl_pose", pose.encode(), MSG_POSE)
            seq += 1
            stop.wait(1.0 / args.pose_rate)

    threading.Thread(target=pose_stream, daemon=True).start()
    _wait_for_stop(args.duration, stop)
    client.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# sim
# ---------------------------------------------------------------------------

def _load_scenario(ref: str, seed_override: int | None) -> Scenario:
    if Path(ref).exists():
        scenario = Scenario.from_file(ref)
    else:
        scenario = Scenario.preset(ref)
    if seed_override is not None:
        scenario.seed = seed_override
    return scenario


def cmd_sim(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stack = build_stack(scenario)

    if args.console_port is not None:
        from .console import ConsoleHub, ConsoleServer, attach_console, run_paced

        hub = ConsoleHub()
        server = ConsoleServer(hub, port=args.console_port)
        attach_console(stack, hub)
        print(f"[fleet] console socket on {server.url}", flush=True)
        stop = threading.Event()
        signal.signal(signal.SIGINT, lambda *_: stop.set())
        run_paced(stack, hub, realtime=not args.fast, stop_flag=stop)
        server.close()
    else:
        stack.run()

    log_path = out / "events.ndjson"
    stack.log.save(log_path)
    snap = stack.grid.snapshot()
    (out / "map.json").write_text(json.dumps(
        {"width": snap.width, "height": snap.height,
         "blocked": list(snap.blocked), "version": snap.version},
        sort_keys=True) + "\n", encoding="utf-8")
    hub_host = {"single": "master", "multi": "planner",
                "cloud": "server"}[scenario.topology]
    record = bench._freeze_record(
        scenario.name, bench.normalize_topology(scenario.topology),
        stack.net, scenario.duration_s, hub_host, {}, {})
    bench.emit_report([record], None, out)
    summary = stack.log.of_kind("summary")[0]
    print(f"[fleet] run complete: goals={summary['goals']} "
          f"finalCells={summary['finalCells']}", flush=True)
    print(f"[fleet] log: {log_path}", flush=True)
    return EXIT_OK if summary["allGoalsResolved"] or not summary["goals"] \
        else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _topologies(arg: str) -> list[str]:
    if arg == "all":
        return ["SMS", "MMS", "CRS"]
    return [bench.normalize_topology(arg)]


def cmd_bench(args) -> int:
    out = Path(args.out)
    labels = _topologies(args.topology)
    records, samples = [], []
    if args.experiment == "exp1":
        for label in labels:
            kwargs = {"seed": args.seed}
            if args.duration is not None:
                kwargs["duration_s"] = args.duration
            records.append(bench.run_experiment1(label, **kwargs))
    elif args.experiment == "exp2":
        for label in labels:
            kwargs = {"seed": args.seed}
            if args.duration is not None:
                kwargs["duration_s"] = args.duration
            records.append(bench.run_experiment2(label, **kwargs))
    else:
        sizes = tuple(parse_size(s) for s in args.sizes.split(","))
        for label in labels:
            samples.extend(bench.measure_rtt(label, sizes=sizes,
                                             trials=args.trials,
                                             seed=args.seed))
    paths = bench.emit_report(records, samples or None, out)
    for record in records:
        print(f"[fleet] {record.scenario} {record.topology}: "
              f"hub_bytes={record.hub_bytes} "
              f"cpu_proxy={record.cpu_proxy_total:.2f}/s", flush=True)
    if len(records) == 3 and args.experiment == "exp1":
        by_label = {r.topology: r.hub_bytes for r in records}
        print(f"[fleet] ordering: SMS={by_label['SMS']} > "
              f"MMS={by_label['MMS']} >= CRS={by_label['CRS']}", flush=True)
    for name, path in sorted(paths.items()):
        print(f"[fleet] wrote {path}", flush=True)
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def replay_final_cells(log_path: str | Path) -> dict[str, int]:
    """Reconstruct final robot cells from a run log."""
    cells: dict[str, int] = {}
    with open(log_path, "r", encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            if record["event"] in ("robot_started", "cell_entered"):
                cells[record["robot"]] = record["cell"]
    return cells


def cmd_replay(args) -> int:
    cells = replay_final_cells(args.log)
    print(json.dumps({"finalCells": cells}, sort_keys=True), flush=True)
    with open(args.log, "r", encoding="utf-8") as fh:
        summaries = [json.loads(line) for line in fh
                     if '"event": "summary"' in line
                     or '"event":"summary"' in line]
    if summaries:
        recorded = {k: v for k, v in summaries[-1]["finalCells"].items()}
        if recorded != cells:
            print(f"[fleet] MISMATCH: live run ended at {recorded}",
                  flush=True)
            return EXIT_RUNTIME
        print("[fleet] replay matches the live run", flush=True)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleet",
        description="Multi-robot fleet management simulator and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("server", help="run a topology stack on real sockets")
    p.add_argument("--mode", choices=("single", "multi", "cloud"),
                   required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None,
                   help="master port (single) or handshake port (cloud)")
    p.add_argument("--ws-port", type=int, default=None)
    p.add_argument("--config", default=None, help="domains file (multi)")
    p.add_argument("--accounts", default=None, help="accounts file (cloud)")
    p.add_argument("--duration", type=float, default=None,
                   help="exit after N seconds instead of waiting for a signal")
    p.set_defaults(fn=cmd_server)

    p = sub.add_parser("robot", help="connect a robot to a cloud server")
    p.add_argument("--config", required=True)
    p.add_argument("--server", default=None, help="override handshake URL")
    p.add_argument("--start-cell", type=int, default=0)
    p.add_argument("--grid-width", type=int, default=8)
    p.add_argument("--pose-rate", type=float, default=5.0)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--duration", type=float, default=None)
    p.set_defaults(fn=cmd_robot)

    p = sub.add_parser("sim", help="run a scenario deterministically")
    p.add_argument("scenario", help="scenario file path or preset name")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--console-port", type=int, default=None)
    p.add_argument("--fast", action="store_true",
                   help="with a console: run unpaced instead of real time")
    p.set_defaults(fn=cmd_sim)

    p = sub.add_parser("bench", help="run the comparative experiments")
    p.add_argument("experiment", choices=("exp1", "exp2", "rtt"))
    p.add_argument("--topology", default="all",
                   help="single|multi|cloud|sms|mms|crs|all")
    p.add_argument("--out", default="bench-out")
    p.add_argument("--sizes", default="1k,10k,100k,1m")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("replay", help="reconstruct final state from a log")
    p.add_argument("log")
    p.set_defaults(fn=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as exc:
        print(f"[fleet] config error: {exc}", file=sys.stderr, flush=True)
        return EXIT_CONFIG
    except StartupError as exc:
        print(f"[fleet] startup error: {exc}", file=sys.stderr, flush=True)
        return EXIT_RUNTIME
    except FleetError as exc:
        print(f"[fleet] error: {exc}", file=sys.stderr, flush=True)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"[fleet] i/o error: {exc}", file=sys.stderr, flush=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
