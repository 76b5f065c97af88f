#!/usr/bin/env python3
"""Walk the reference robot configuration through the cloud broker.

Loads the shipped robot1.config (credentials, one container, a move_client
node, a pose interface pair and its connection), handshakes, provisions,
and pushes a pose through the declared connection.
"""

import importlib.resources

from fleetsim.clock import EventLoop
from fleetsim.errors import AuthFailed
from fleetsim.messaging import NodeId
from fleetsim.topology.cloud import CloudConfig, CloudServer
from fleetsim.virtualnet import VirtualNet


def main():
    text = (importlib.resources.files("fleetsim") / "configs"
            / "robot1.config").read_text(encoding="utf-8")
    cfg = CloudConfig.from_json(text)
    print(f"config for {cfg.robot_id}: {len(cfg.containers)} container(s), "
          f"{len(cfg.nodes)} node(s), {len(cfg.interfaces)} interface(s), "
          f"{len(cfg.connections)} connection(s)")

    loop = EventLoop()
    net = VirtualNet(loop, seed=0)
    server = CloudServer(net, host="server")

    try:
        server.handshake({"url": cfg.url, "userID": cfg.user_id,
                          "password": "nope", "robotID": cfg.robot_id},
                         robot_host="robot1")
    except AuthFailed as exc:
        print("wrong password ->", exc)

    url = server.handshake({"url": cfg.url, "userID": cfg.user_id,
                            "password": cfg.password,
                            "robotID": cfg.robot_id}, robot_host="robot1")
    print("handshake ->", url)

    report = server.apply_config(cfg)
    for kind in ("containers", "nodes", "interfaces", "connections"):
        for tag, status in getattr(report, kind):
            print(f"  {kind[:-1]:10s} {tag}: {status}")

    again = server.apply_config(cfg)
    print("second apply is a no-op:", again.is_noop())

    endpoint = server.endpoints[cfg.robot_id]
    container = server.containers["cTag_01"]
    got = []
    probe = net.node(NodeId("server", "probe"))
    container.scope.subscribe(probe, "/Robot1/amcl_pose",
                              "geometry_msgs/PoseWithCovarianceStamped",
                              got.append)
    amcl = net.node(NodeId("robot1", "amcl"))
    pose = endpoint.scope.advertise(
        amcl, "/amcl_pose", "geometry_msgs/PoseWithCovarianceStamped")
    pose.publish(b"x=3.2 y=1.4 cov=[...]")
    loop.run_until_idle()
    print(f"pose crossed the declared connection: {got[0].payload!r}")


if __name__ == "__main__":
    main()
