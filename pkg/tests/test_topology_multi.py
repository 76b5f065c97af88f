"""Multi-master semantics: discovery, sync allowlists, relays, isolation."""

import hashlib

import pytest

from fleetsim.clock import EventLoop
from fleetsim.errors import InvalidRelay
from fleetsim.topology.multi import MultiMasterTopology
from fleetsim.virtualnet import VirtualNet


@pytest.fixture()
def world():
    loop = EventLoop()
    net = VirtualNet(loop, seed=9)
    topo = MultiMasterTopology(net, discovery_period_s=1.0)
    return loop, net, topo


def test_two_domains_discover_each_other(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    loop.run_for(2.0)  # within 2 discovery periods
    assert "machine2" in d1.known_peers
    assert "machine1" in d2.known_peers


def test_peer_expires_after_missed_heartbeats(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    loop.run_for(2.0)
    assert "machine2" in d1.known_peers
    d2.stop_announcing()
    loop.run_for(5.0)  # > 3 missed periods + one sweep
    assert "machine2" not in d1.known_peers
    assert "machine1" in d2.known_peers  # d1 kept announcing


def test_single_domain_alone_has_no_peers(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    loop.run_for(10.0)
    assert d1.known_peers == {}


def test_allowlisted_topic_resolves_cross_domain(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    robot = d2.node("talker")
    d2.advertise(robot, "/amcl_pose", "PoseMsg")
    d2.advertise(robot, "/scan", "Blob")
    d1.sync_topics({"/amcl_pose"})
    loop.run_for(2.0)
    assert d1.resolvable("/amcl_pose") == [robot.node_id.fqn]
    assert d1.resolvable("/scan") == []
    assert d1.visible_topics() == ["/amcl_pose"]


def test_empty_allowlist_means_total_isolation(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    robot = d2.node("talker")
    handle = d2.advertise(robot, "/scan", "Blob")
    got = []
    d1.subscribe(d1.node("hub"), "/scan", "Blob", got.append)
    loop.run_for(2.0)
    for _ in range(20):
        handle.publish(b"s" * 512)
    loop.run_for(1.0)
    assert got == []
    assert net.link_counters("machine2", "machine1").by_topic.get("/scan") is None


def test_cross_domain_data_flows_once_synced(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    robot = d2.node("talker")
    handle = d2.advertise(robot, "/scan", "Blob")
    got = []
    d1.subscribe(d1.node("hub"), "/scan", "Blob", got.append)
    d1.sync_topics({"/scan"})
    loop.run_for(2.0)
    handle.publish(b"payload")
    loop.run_for(1.0)
    assert [env.payload for env in got] == [b"payload"]


def test_allowlist_binds_late_appearing_topic(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    d1.sync_topics({"/scan"})  # nothing advertises /scan yet
    got = []
    d1.subscribe(d1.node("hub"), "/scan", "Blob", got.append)
    loop.run_for(3.0)
    handle = d2.advertise(d2.node("talker"), "/scan", "Blob")
    loop.run_for(2.0)
    handle.publish(b"late")
    loop.run_for(1.0)
    assert [env.payload for env in got] == [b"late"]


def test_wildcard_allowlist_form(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    robot = d2.node("talker", "Robot1")
    d2.advertise(robot, "/Robot1/scan", "Blob")
    d2.advertise(robot, "/Robot1/amcl_pose", "PoseMsg")
    d2.advertise(robot, "/other", "Blob")
    d1.sync_topics({"/Robot1/*"})
    loop.run_for(2.0)
    assert d1.visible_topics() == ["/Robot1/amcl_pose", "/Robot1/scan"]


def test_same_topic_name_in_two_domains_no_cross_talk(world):
    loop, net, topo = world
    d1 = topo.add_domain("machine1")
    d2 = topo.add_domain("machine2")
    h1 = d1.advertise(d1.node("talker"), "/amcl_pose", "PoseMsg")
    h2 = d2.advertise(d2.node("talker"), "/amcl_pose", "PoseMsg")
    got1, got2 = [], []
    d1.subscribe(d1.node("l1"), "/amcl_pose", "PoseMsg", got1.append)
    d2.subscribe(d2.node("l2"), "/amcl_pose", "PoseMsg", got2.append)
    loop.run_for(2.0)
    h1.publish(b"from-d1")
    h2.publish(b"from-d2")
    loop.run_for(1.0)
    assert [e.payload for e in got1] == [b"from-d1"]
    assert [e.payload for e in got2] == [b"from-d2"]


def test_relay_renames_and_preserves_payload(world):
    loop, net, topo = world
    d2 = topo.add_domain("machine2")
    robot = d2.node("amcl")
    pose = d2.advertise(robot, "/amcl_pose", "PoseMsg")
    relay = d2.relay("/amcl_pose", "/Robot1/amcl_pose")
    got = []
    d2.subscribe(d2.node("checker"), "/Robot1/amcl_pose", "PoseMsg", got.append)
    payloads = [b"p1", b"p2", b"p3"]
    for p in payloads:
        pose.publish(p)
        loop.run_for(0.1)
    assert [hashlib.sha256(e.payload).hexdigest() for e in got] == \
        [hashlib.sha256(p).hexdigest() for p in payloads]
    assert [e.msg_id for e in got] == [1, 2, 3]  # relay's own sequence


def test_relay_chain_preserves_order_and_content(world):
    loop, net, topo = world
    d = topo.add_domain("machine1")
    src = d.advertise(d.node("origin"), "/a", "Blob")
    d.relay("/a", "/b")
    d.relay("/b", "/c")
    got = []
    d.subscribe(d.node("end"), "/c", "Blob", got.append)
    for i in range(10):
        src.publish(bytes([i]))
        loop.run_for(0.1)
    assert [e.payload for e in got] == [bytes([i]) for i in range(10)]


def test_relay_to_self_is_invalid(world):
    loop, net, topo = world
    d = topo.add_domain("machine1")
    d.advertise(d.node("origin"), "/a", "Blob")
    with pytest.raises(InvalidRelay):
        d.relay("/a", "/a")


def test_planner_consumes_relayed_pose_cross_domain(world):
    """Local /amcl_pose relayed to /Robot1/amcl_pose, synced to the planner."""
    loop, net, topo = world
    planner_domain = topo.add_domain("planner")
    robot_domain = topo.add_domain("robot1")
    amcl = robot_domain.node("amcl")
    pose = robot_domain.advertise(amcl, "/amcl_pose", "PoseMsg")
    robot_domain.relay("/amcl_pose", "/Robot1/amcl_pose")
    got = []
    planner_domain.subscribe(planner_domain.node("planner"),
                             "/Robot1/amcl_pose", "PoseMsg", got.append)
    planner_domain.sync_topics({"/Robot1/amcl_pose"})
    loop.run_for(2.0)
    pose.publish(b"pose-bytes")
    loop.run_for(1.0)
    assert [e.payload for e in got] == [b"pose-bytes"]
    # the un-namespaced local topic never crossed the boundary
    assert net.link_counters("robot1", "planner").by_topic.get("/amcl_pose") is None
