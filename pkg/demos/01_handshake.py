"""
One handshake, step by step
===========================

Drive a node and the sink by hand through the five messages, without the
network simulator, and look at what goes over the air.
"""

import random

from banzkp.crypto import ProtocolParams, extract_interval, modexp
from banzkp.protocol import (
    Incoming, NodeFsm, SinkSessionFsm, Start, encode, node_step, register_nodes, sink_step,
)

params = ProtocolParams.generate(2048)
rng = random.Random(1)

# the operator registers node 5: a session key and a secret V, both shared with the sink
ident = register_nodes([5], params, rng)[5]
node, sink = NodeFsm(ident, params), SinkSessionFsm(ident, params)

res = node_step(node, Start(b"spo2=97"), rng)
m1 = res.outgoing[0]
print("M1", len(encode(m1)), "bytes, node is", res.fsm.state.value)

s = sink_step(sink, Incoming(m1), rng)
m2 = s.outgoing[0]
print("M2", len(encode(m2)), "bytes, challenge window starts at bit", s.fsm.ri)

res = node_step(res.fsm, Incoming(m2), rng)
m3 = res.outgoing[0]
print("M3", len(encode(m3)), "bytes, node is", res.fsm.state.value)

s = sink_step(s.fsm, Incoming(m3), rng)
m4 = s.outgoing[0]
print("M4", len(encode(m4)), "bytes (commit key in the clear), sink is", s.fsm.state.value)

res = node_step(res.fsm, Incoming(m4), rng)
m5 = res.outgoing[0]
print("M5", len(encode(m5)), "bytes, node is", res.fsm.state.value)

s = sink_step(s.fsm, Incoming(m5), rng)
print("sink delivered", s.delivered)

# both sides computed V^(pq); the 200-bit window they compared is the same slice
v = ident.secret.v
shared = modexp(modexp(v, res.fsm.p, params), s.fsm.q, params)
print("window", extract_interval(shared, params.width, s.fsm.ri, 200).hex())
print("node  ", res.fsm.response_window.hex())
