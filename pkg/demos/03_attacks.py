"""
Attacking the handshake
=======================

Each attacker only sees and sends frames. Verdicts are read back from the
trace afterwards.
"""

from banzkp import adversary as adv
from banzkp.crypto import ProtocolParams
from banzkp.netsim import run

params = ProtocolParams.generate(1096)

for kind in adv.KINDS:
    trials = 1 if kind == "guess" else 50
    print(adv.run_attack(kind, trials=trials, seed=3, params=params).line())

# a closer look at one replay: old M1 gets a fresh challenge, old M3 fails it
trace = run(adv.attack_scenario("replay", 3, params, variant="m1m3"))
for r in trace.of_type("adv"):
    print(f"{r['t']:8.1f} ms  attacker: {r['action']}")
for r in trace.of_type("transition"):
    if r["party"] == "sink":
        print(f"{r['t']:8.1f} ms  sink session {r['node']}: {r['frm']} -> {r['to']}")
for r in trace.of_type("audit"):
    print(f"{r['t']:8.1f} ms  audit: {r['msg']}")
