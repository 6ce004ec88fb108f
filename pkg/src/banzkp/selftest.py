"""Fast in-package invariant checks behind ``banzkp selftest``.

The full property suites live in the test tree; these are reduced-size
versions that need nothing beyond the installed package.
"""

from __future__ import annotations

import random

from . import adversary, costmodel
from .crypto import DecryptError, ProtocolParams, extract_interval, modexp, seal, unseal
from .netsim import honest_scenario, run
from .protocol import M1, M2, M3, M4, M5, RouteFlood, decode, encode


def _brute_pow(b, e, m):
    r = 1 % m
    for _ in range(e):
        r = r * b % m
    return r


def check_cipher(rng):
    for _ in range(200):
        k, m, c = rng.randbytes(16), rng.randbytes(rng.randrange(1, 64)), rng.randbytes(8)
        ct = seal(k, m, c)
        if unseal(k, ct, c) != m:
            return False
        bad = bytearray(ct)
        bit = rng.randrange(8 * len(ct))
        bad[bit // 8] ^= 1 << (bit % 8)
        for key, data in ((rng.randbytes(16), ct), (k, bytes(bad))):
            try:
                unseal(key, data, c)
                return False
            except DecryptError:
                pass
    return True


def check_commutativity(rng):
    for _ in range(500):
        m = rng.randrange(2, 1 << 10)
        v, p, q = rng.randrange(m), rng.randrange(1, 40), rng.randrange(1, 40)
        a = modexp(modexp(v, p, m), q, m)
        if a != modexp(modexp(v, q, m), p, m) or a != _brute_pow(v, p * q, m):
            return False
    return True


def check_interval(rng):
    for _ in range(1000):
        w = rng.randrange(1, 300)
        v = rng.getrandbits(w)
        s = rng.randrange(w)
        n = rng.randrange(0, w - s + 1)
        bits = format(v, f"0{w}b")[s:s + n]
        bits += "0" * (-len(bits) % 8)
        want = int(bits, 2).to_bytes(len(bits) // 8, "big") if bits else b""
        if extract_interval(v, w, s, n) != want:
            return False
    return True


def check_codec(rng):
    msgs = [M1(3, rng.getrandbits(64), rng.randbytes(40)),
            M2(rng.getrandbits(64), rng.randbytes(30), rng.randbytes(20)),
            M3(2, rng.randbytes(34)), M4(rng.randbytes(25)), M5(6, 0, rng.randbytes(20)),
            RouteFlood(1, 2)]
    return all(decode(encode(m)) == m for m in msgs)


def check_completeness(params):
    for seed in range(20):
        tr = run(honest_scenario(seed, params))
        if set(tr.node_states.values()) != {"Authenticated"} or len(tr.deliveries) != 6:
            return False
    return True


def check_determinism(params):
    return all(run(honest_scenario(s, params)).digest() == run(honest_scenario(s, params)).digest()
               for s in range(3))


def check_costs():
    return (costmodel.comm_cost("banzkp") == 1000 and costmodel.comm_cost("tinyzkp") == 1710
            and costmodel.modmul_cost(1, 20) == 11)


def run_selftest(out=print) -> bool:
    rng = random.Random(0)
    params = ProtocolParams.generate(1096)
    checks = [
        ("cipher roundtrip and tamper rejection", lambda: check_cipher(rng)),
        ("modexp commutativity vs repeated multiplication", lambda: check_commutativity(rng)),
        ("interval extraction vs bit-string slicing", lambda: check_interval(rng)),
        ("codec roundtrip", lambda: check_codec(rng)),
        ("honest completeness, 20 runs", lambda: check_completeness(params)),
        ("trace determinism", lambda: check_determinism(params)),
        ("field-count cost constants", check_costs),
    ]
    ok = True
    for name, fn in checks:
        passed = bool(fn())
        ok &= passed
        out(f"{name}: {'PASS' if passed else 'FAIL'}")
    for kind in adversary.KINDS:
        v = adversary.run_attack(kind, trials=1 if kind == "guess" else 10, seed=0, params=params)
        ok &= v.passed
        out(v.line())
    return ok
