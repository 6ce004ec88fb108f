"""
Lossy links and retries
=======================

Sweep the loss rate on the left wrist's first hop and watch completion fall
as the node runs out of retries.
"""

from banzkp.crypto import ProtocolParams
from banzkp.netsim import default_topology, honest_scenario, run

params = ProtocolParams.generate(1096)

for loss in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9):
    topo = default_topology().with_link(1, 4, loss=loss)
    done = retx = 0
    for seed in range(100):
        tr = run(honest_scenario(seed, params, topology=topo))
        done += tr.node_states[4] == "Authenticated"
        retx += len([r for r in tr.frames() if r["src"] == 4]) - 3
    print(f"loss={loss:.1f}: left wrist authenticated in {done}/100 runs, "
          f"{retx / 100:.2f} extra frames per run")
