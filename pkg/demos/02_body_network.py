"""
Seven sensors on a body
=======================

Run the default layout through the simulator, show the collection tree it
builds and how many bytes each role moved.
"""

from banzkp.costmodel import comm_cost, PAPER, WIRE
from banzkp.crypto import ProtocolParams
from banzkp.netsim import BODY_LABELS, honest_scenario, run

params = ProtocolParams.generate(2048)
trace = run(honest_scenario(seed=1, params=params))

for n, parent in sorted(trace.routing.parent.items()):
    print(f"{BODY_LABELS[n]:>12} -> {BODY_LABELS[parent]:<10} hops={trace.routing.hop_count[n]}")

print()
print("node states:", trace.node_states)
print("deliveries :", len(trace.deliveries))
print("frames     :", trace.conservation())

# end-to-end bits, over-the-air bits (counting relays) and the nominal field count
print("wire bits, end to end:", comm_cost(trace, WIRE))
print("wire bits, per hop   :", comm_cost(trace, WIRE, per_hop=True))
print("field bits per session:", comm_cost("banzkp", PAPER))

for role in trace.ledger.roles():
    c = trace.ledger[role]
    print(f"{'sink' if role == 0 else BODY_LABELS[role]:>12}: tx={c.bits_tx:6d} rx={c.bits_rx:6d} "
          f"modmul={c.modmuls:5d} energy={c.energy_mJ:.3f} mJ")

print("trace digest:", trace.digest())
