"""Single-master semantics: global visibility, kill-master survival."""

import pytest

from fleetsim.clock import EventLoop
from fleetsim.errors import MasterDown, NameConflict, TypeMismatch
from fleetsim.messaging import NodeId
from fleetsim.topology.single import SingleMasterTopology
from fleetsim.virtualnet import VirtualNet


@pytest.fixture()
def stack():
    loop = EventLoop()
    net = VirtualNet(loop, seed=5)
    topo = SingleMasterTopology(net, master_host="master")
    return loop, net, topo


def test_register_three_nodes(stack):
    loop, net, topo = stack
    topo.node("robot1", "amcl", "Robot1")
    topo.node("robot2", "amcl", "Robot2")
    topo.node("master", "planner")
    # master node itself is also registered
    assert len(topo.registry.nodes) == 4


def test_duplicate_node_name_rejected_unless_namespaced(stack):
    loop, net, topo = stack
    topo.node("robot1", "amcl")
    with pytest.raises(NameConflict):
        topo.register_node(net.node(NodeId("robot1", "amcl")))
    # namespacing disambiguates
    topo.node("robot1", "amcl", "Robot1")


def test_advertise_idempotent_and_type_checked(stack):
    loop, net, topo = stack
    r1 = topo.node("robot1", "amcl", "Robot1")
    h1 = topo.advertise(r1, "/amcl_pose", "PoseMsg")
    h2 = topo.advertise(r1, "/amcl_pose", "PoseMsg")
    assert h1 is h2
    with pytest.raises(TypeMismatch):
        topo.advertise(r1, "/amcl_pose", "Flag")


def test_subscribe_before_advertise_gets_first_publish(stack):
    loop, net, topo = stack
    sub_node = topo.node("robot2", "listener")
    got = []
    topo.subscribe(sub_node, "/late", "Blob", got.append)
    pub_node = topo.node("robot1", "talker")
    handle = topo.advertise(pub_node, "/late", "Blob")
    handle.publish(b"first")
    loop.run_until_idle()
    assert [env.payload for env in got] == [b"first"]


def test_two_subscribers_both_receive_everything(stack):
    loop, net, topo = stack
    pub = topo.node("robot1", "talker")
    handle = topo.advertise(pub, "/scan", "Blob")
    boxes = []
    for i, host in enumerate(("robot2", "master")):
        box = []
        boxes.append(box)
        topo.subscribe(topo.node(host, f"l{i}"), "/scan", "Blob", box.append)
    for i in range(10):
        handle.publish(bytes([i]))
        loop.run_until_idle()
    assert all(len(box) == 10 for box in boxes)


def test_global_visibility_while_alive(stack):
    loop, net, topo = stack
    r1 = topo.node("robot1", "talker", "Robot1")
    topo.advertise(r1, "/Robot1/amcl_pose", "PoseMsg")
    topo.advertise(r1, "/Robot1/scan", "Blob")
    r2 = topo.node("robot2", "observer", "Robot2")
    assert topo.lookup(r2, "/Robot1/amcl_pose") == [r1.node_id.fqn]
    assert set(topo.visible_topics(r2)) == {"/Robot1/amcl_pose", "/Robot1/scan"}
    assert topo.lookup(r2, "/never_advertised") == []


def test_resolve_and_connect_pairs(stack):
    loop, net, topo = stack
    pub = topo.node("robot1", "talker")
    topo.advertise(pub, "/scan", "Blob")
    s1 = topo.node("robot2", "a")
    s2 = topo.node("master", "b")
    topo.subscribe(s1, "/scan", "Blob", lambda e: None)
    topo.subscribe(s2, "/scan", "Blob", lambda e: None)
    pairs = topo.resolve_and_connect("/scan")
    assert pairs == {(pub.node_id.fqn, s1.node_id.fqn),
                     (pub.node_id.fqn, s2.node_id.fqn)}
    assert topo.resolve_and_connect("/nonexistent") == set()


def test_subscribe_never_advertised_topic_stays_silent(stack):
    loop, net, topo = stack
    got = []
    sub = topo.subscribe(topo.node("robot2", "hopeful"), "/ghost", "Blob",
                         got.append)
    loop.run_for(10.0)
    assert got == []
    assert sub.delivered == 0


def test_kill_master_keeps_existing_flow_alive(stack):
    loop, net, topo = stack
    pub = topo.node("robot1", "talker")
    handle = topo.advertise(pub, "/scan", "Blob")
    got = []
    topo.subscribe(topo.node("robot2", "listener"), "/scan", "Blob", got.append)
    handle.publish(b"before")
    loop.run_until_idle()
    topo.kill_master()
    for i in range(100):
        handle.publish(b"after%d" % i)
        loop.run_until_idle()
    assert len(got) == 101
    # name service is frozen now
    with pytest.raises(MasterDown):
        topo.subscribe(topo.net.node(NodeId("robot2", "new")), "/scan",
                       "Blob", lambda e: None)
    with pytest.raises(MasterDown):
        topo.node("robot3", "late")
    with pytest.raises(MasterDown):
        topo.lookup(pub, "/scan")
    # second kill is a no-op
    topo.kill_master()
    assert not topo.alive


def test_hub_ingress_grows_linearly_in_robots_times_subscribers(stack):
    """Remote hub subscribing all sensor topics: ingress ~ robots x subscribers."""
    loop, net, topo = stack

    def run(m_robots, k_subs):
        loop_ = EventLoop()
        net_ = VirtualNet(loop_, seed=5)
        topo_ = SingleMasterTopology(net_, master_host="hub")
        handles = []
        for m in range(m_robots):
            node = topo_.node(f"robot{m}", "talker", f"Robot{m}")
            handles.append(topo_.advertise(node, f"/Robot{m}/scan", "Blob"))
        for k in range(k_subs):
            sub = topo_.node("hub", f"listener{k}")
            for m in range(m_robots):
                topo_.subscribe(sub, f"/Robot{m}/scan", "Blob", lambda e: None)
        baseline = net_.host_ingress_bytes("hub")
        for _ in range(20):
            for h in handles:
                h.publish(b"s" * 1000)
            loop_.run_until_idle()
        return net_.host_ingress_bytes("hub") - baseline

    one = run(1, 1)
    assert run(2, 1) == 2 * one
    assert run(1, 3) == 3 * one
    assert run(3, 2) == 6 * one
