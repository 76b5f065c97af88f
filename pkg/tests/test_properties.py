"""Property tests for the transport invariants under random link models."""

from hypothesis import given, settings, strategies as st

from fleetsim.clock import EventLoop, s_to_ns
from fleetsim.messaging import LinkModel, NodeId, SubscriptionHandle, TopicHandle
from fleetsim.virtualnet import VirtualNet

link_models = st.builds(
    LinkModel,
    base_latency=st.floats(min_value=0.0, max_value=0.05),
    bandwidth=st.floats(min_value=1e3, max_value=1e8),
    jitter=st.floats(min_value=0.0, max_value=0.02),
    loss_rate=st.floats(min_value=0.0, max_value=0.5),
)


@settings(max_examples=40, deadline=None)
@given(link=link_models, seed=st.integers(min_value=0, max_value=2**16),
       count=st.integers(min_value=1, max_value=60),
       gap_ms=st.floats(min_value=0.01, max_value=20.0))
def test_stream_order_preserved_under_any_link(link, seed, count, gap_ms):
    """Delivered msg_ids strictly increase per (publisher, topic, subscriber)."""
    loop = EventLoop()
    net = VirtualNet(loop, seed=seed, default_link=link)
    pub = net.node(NodeId("m1", "pub"))
    handle = TopicHandle(pub, "/t", "Blob")
    received = []
    sub = SubscriptionHandle(node=net.node(NodeId("m2", "sub")), topic="/t",
                             msg_type="Blob", callback=received.append)
    handle.connect(sub)
    for i in range(count):
        loop.call_at(s_to_ns(gap_ms / 1000.0) * i,
                     lambda: handle.publish(b"x" * 32))
    loop.run_until_idle()
    ids = [env.msg_id for env in received]
    assert ids == sorted(ids)
    assert len(set(ids)) == len(ids)
    counters = net.link_counters("m1", "m2")
    assert counters.msgs_delivered + counters.msgs_lost == count


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**16),
       payloads=st.lists(st.integers(min_value=0, max_value=4096),
                         min_size=1, max_size=40),
       header=st.integers(min_value=0, max_value=256),
       fanout=st.integers(min_value=1, max_value=4))
def test_byte_ledger_equals_delivered_wire_sizes(seed, payloads, header,
                                                 fanout):
    """At zero loss, per-link byte counters sum to payload+header exactly."""
    loop = EventLoop()
    net = VirtualNet(loop, seed=seed, header_overhead=header)
    pub = net.node(NodeId("m0", "pub"))
    handle = TopicHandle(pub, "/t", "Blob")
    for k in range(fanout):
        sub = SubscriptionHandle(node=net.node(NodeId(f"h{k}", "sub")),
                                 topic="/t", msg_type="Blob",
                                 callback=lambda e: None)
        handle.connect(sub)
    for i, size in enumerate(payloads):
        loop.call_at(s_to_ns(0.001) * i,
                     lambda n=size: handle.publish(b"b" * n))
    loop.run_until_idle()
    expected = fanout * sum(size + header for size in payloads)
    assert net.ledger_total() == expected
    delivered = sum(c.bytes_delivered for c in net.counters.values())
    assert delivered == expected


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**16))
def test_same_seed_reproduces_lossy_jittery_delivery(seed):
    link = LinkModel(base_latency=0.003, bandwidth=5e5, jitter=0.002,
                     loss_rate=0.3)

    def run():
        loop = EventLoop()
        net = VirtualNet(loop, seed=seed, default_link=link)
        pub = net.node(NodeId("m1", "pub"))
        handle = TopicHandle(pub, "/t", "Blob")
        log = []
        sub = SubscriptionHandle(
            node=net.node(NodeId("m2", "sub")), topic="/t", msg_type="Blob",
            callback=lambda env: log.append((loop.now_ns, env.msg_id)))
        handle.connect(sub)
        for i in range(50):
            loop.call_at(s_to_ns(0.002) * i, lambda: handle.publish(b"y" * 64))
        loop.run_until_idle()
        return log

    assert run() == run()
