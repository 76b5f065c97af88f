#!/usr/bin/env python3
"""Tour of the three communication architectures and their visibility rules.

Single-master: one registry, every topic visible everywhere, and the name
service is a single point of failure (established flows survive it, new
subscriptions do not).  Multi-master: per-machine registries, heartbeats,
and a sync allowlist deciding exactly what crosses.  Cloud broker: nothing
crosses unless an interface pair and a connection say so.
"""

from fleetsim.clock import EventLoop
from fleetsim.errors import MasterDown
from fleetsim.messaging import NodeId
from fleetsim.topology.cloud import CloudConfig, CloudServer
from fleetsim.topology.multi import MultiMasterTopology
from fleetsim.topology.single import SingleMasterTopology
from fleetsim.virtualnet import VirtualNet


def single_master():
    print("=== single master ===")
    loop = EventLoop()
    net = VirtualNet(loop, seed=0)
    topo = SingleMasterTopology(net, master_host="master")
    robot = topo.node("robot1", "talker", "Robot1")
    pose = topo.advertise(robot, "/Robot1/amcl_pose", "PoseMsg")
    got = []
    hub = topo.node("master", "hub")
    topo.subscribe(hub, "/Robot1/amcl_pose", "PoseMsg", got.append)
    print("hub sees topics:", topo.visible_topics(hub))
    pose.publish(b"alive")
    loop.run_until_idle()
    print("delivered before kill:", len(got))
    topo.kill_master()
    pose.publish(b"still alive")
    loop.run_until_idle()
    print("delivered after kill:", len(got), "(existing flow survives)")
    try:
        topo.subscribe(net.node(NodeId("master", "late")), "/Robot1/amcl_pose",
                       "PoseMsg", got.append)
    except MasterDown as exc:
        print("new subscription:", exc)
    print()


def multi_master():
    print("=== multi master ===")
    loop = EventLoop()
    net = VirtualNet(loop, seed=0)
    topo = MultiMasterTopology(net)
    planner = topo.add_domain("planner")
    robot1 = topo.add_domain("robot1")
    amcl = robot1.node("amcl")
    pose = robot1.advertise(amcl, "/amcl_pose", "PoseMsg")
    robot1.advertise(amcl, "/scan", "Blob")
    robot1.relay("/amcl_pose", "/Robot1/amcl_pose")
    got = []
    planner.subscribe(planner.node("gp"), "/Robot1/amcl_pose", "PoseMsg",
                      got.append)
    planner.sync_topics({"/Robot1/amcl_pose"})
    loop.run_for(2.0)
    print("planner domain peers:", sorted(planner.known_peers))
    print("planner sees:", planner.visible_topics(),
          "(scan stays private)")
    pose.publish(b"pose")
    loop.run_for(0.5)
    print("relayed + synced deliveries:", len(got))
    scan_bytes = net.link_counters("robot1", "planner").by_topic.get("/scan")
    print("cross-domain /scan bytes:", scan_bytes or 0)
    print()


def cloud_broker():
    print("=== cloud broker ===")
    loop = EventLoop()
    net = VirtualNet(loop, seed=0)
    server = CloudServer(net, host="server")
    url = server.handshake({"url": "http://server:9000/",
                            "userID": "testUser", "password": "testUser",
                            "robotID": "Robot1"}, robot_host="robot1")
    print("handshake ->", url)
    cfg = CloudConfig.from_dict({
        "url": "http://server:9000/", "userID": "testUser",
        "password": "testUser", "robotID": "Robot1",
        "containers": [{"cTag": "cTag_01"}],
        "nodes": [],
        "interfaces": [
            {"eTag": "Robot1", "iTag": "poseSender",
             "iType": "SubscriberInterface", "iCls": "PoseMsg",
             "addr": "/amcl_pose"},
            {"eTag": "cTag_01", "iTag": "poseReceiver",
             "iType": "PublisherInterface", "iCls": "PoseMsg",
             "addr": "/Robot1/amcl_pose"},
        ],
        "connections": [{"tagA": "Robot1/poseSender",
                         "tagB": "cTag_01/poseReceiver"}],
    })
    report = server.apply_config(cfg)
    print("provisioned:", dict(report.containers), dict(report.connections))
    endpoint = server.endpoints["Robot1"]
    talker = net.node(NodeId("robot1", "amcl"))
    pose = endpoint.scope.advertise(talker, "/amcl_pose", "PoseMsg")
    rogue = endpoint.scope.advertise(talker, "/secret", "Blob")
    got = []
    probe = net.node(NodeId("server", "probe"))
    server.containers["cTag_01"].scope.subscribe(
        probe, "/Robot1/amcl_pose", "PoseMsg", got.append)
    pose.publish(b"declared")
    rogue.publish(b"undeclared")
    loop.run_until_idle()
    link = net.link_counters("robot1", "server")
    print("pose crossed the boundary:", len(got) == 1)
    print("topics on the wire:",
          sorted(t for t in link.by_topic if not t.startswith("/__")),
          "(the undeclared one never leaves the robot)")


if __name__ == "__main__":
    single_master()
    multi_master()
    cloud_broker()
