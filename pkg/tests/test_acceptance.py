"""Acceptance criteria, one test each.

Every test records a one-line verdict; ``conftest.py`` prints them together at
the end of the run.
"""

import random
import subprocess
import sys
import time

import pytest

from banzkp import adversary as adv
from banzkp import costmodel as cm
from banzkp.crypto import ProtocolParams, extract_interval, modexp
from banzkp.netsim import default_topology, honest_scenario, run, star_topology

from oracles import interval_by_slicing, pow_by_multiplication

VERDICTS = {}


def record(n, ok, detail):
    VERDICTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    return ok


@pytest.fixture(scope="module")
def w2048():
    return ProtocolParams.generate(2048)


def test_criterion_1_paper_comm_cost():
    t0 = time.perf_counter()
    res = subprocess.run([sys.executable, "-m", "banzkp", "cost", "--mode", "paper", "--format", "csv"],
                         capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    row = next(l for l in res.stdout.splitlines() if l.startswith("comm_bits,"))
    _, b, t, _ = row.split(",")
    ok = res.returncode == 0 and (b, t) == ("1000", "1710") and elapsed < 1.0
    assert record(1, ok, f"BANZKP={b} bits, TinyZKP={t} bits, {elapsed:.2f} s")


def test_criterion_2_modmul_cost():
    v = cm.modmul_cost(1, 20)
    assert record(2, v == 11, f"modmul_cost(1, 20) = {v}")


def test_criterion_3_memory(w2048):
    red = 100 * cm.memory_reduction(w2048, 6)
    keys, sink_keys = cm.TINYZKP.keys_per_node, cm.TINYZKP.sink_public_keys(6)
    ok = abs(red - 56.13) <= 5 and keys == 40 and sink_keys == 120
    b = cm.memory_footprint(w2048, 6)["total"]
    t = cm.memory_footprint(cm.TINYZKP, 6)["total"]
    assert record(3, ok, f"{red:.2f}% reduction ({b} B vs {t} B), {keys} keys/node, "
                         f"{sink_keys} sink keys")


def test_criterion_4_energy():
    e = cm.energy_comparison(6)
    red = 100 * e["reduction"]
    ok = e["banzkp_mJ"] < e["tinyzkp_mJ"] and 5 <= red <= 15
    assert record(4, ok, f"{e['banzkp_mJ']:.3f} mJ vs {e['tinyzkp_mJ']:.3f} mJ, {red:.2f}% less")


def test_criterion_5_completeness(w2048):
    t0 = time.perf_counter()
    good = 0
    for seed in range(1000):
        tr = run(honest_scenario(seed, w2048))
        sent = {r["node"]: r["data"] for r in tr.of_type("session") if r["party"] == "node"}
        got = {d["node"]: d["data"] for d in tr.deliveries}
        if (list(tr.node_states.values()).count("Authenticated") == 6
                and set(tr.sink_states.values()) == {"Authenticated"}
                and len(tr.deliveries) == 6 and got == sent):
            good += 1
    elapsed = time.perf_counter() - t0
    ok = good == 1000 and elapsed < 60
    assert record(5, ok, f"{good}/1000 runs complete at W=2048, {elapsed:.1f} s")


def test_criterion_6_attack_suite(w2048):
    lines, ok = [], True
    for kind in ("replay", "forge_node", "forge_sink", "inject", "mitm"):
        v = adv.run_attack(kind, trials=1000 if kind == "replay" else 200, seed=6, params=w2048)
        ok &= v.passed and v.trials >= 100
        lines.append(f"{kind} {v.accepted}/{v.trials}")
    tr = run(adv.attack_scenario("guess", 6, w2048))
    hits = adv.secret_hits(tr, w2048)
    fr = adv.freshness(tr, adv.DEFAULT_VICTIM)
    fresh = fr["sessions"] == 100 and fr["distinct_tuples"] == 100 \
        and fr["distinct_kcs"] == fr["kcs_seen"] >= 100
    ok &= not hits and fresh
    lines.append(f"guess {len(hits)} hits in {fr['sessions']} sessions, "
                 f"{fr['distinct_tuples']} distinct (p,q,RI,K_CS)")
    assert record(6, ok, "; ".join(lines))


def test_criterion_7_oracles():
    r = random.Random(2024)
    bad_pow = 0
    for _ in range(10_000):
        m = r.randrange(2, 1 << 16)
        v, p, q = r.randrange(m), r.randrange(1, 64), r.randrange(1, 64)
        a = modexp(modexp(v, p, m), q, m)
        b = modexp(modexp(v, q, m), p, m)
        ref = pow_by_multiplication(pow_by_multiplication(v, p, m), q, m)
        bad_pow += not (a == b == ref)
    bad_int = 0
    for _ in range(10_000):
        w = r.randrange(1, 2100)
        v = r.getrandbits(w)
        s = r.randrange(w)
        n = r.randrange(0, w - s + 1)
        bad_int += extract_interval(v, w, s, n) != interval_by_slicing(v, w, s, n)
    ok = bad_pow == 0 and bad_int == 0
    assert record(7, ok, f"modexp {bad_pow} mismatches / 10000, interval {bad_int} mismatches / 10000")


def _pairs(params):
    lossy = default_topology().with_link(1, 4, loss=0.3).with_link(0, 3, loss=0.2)
    for seed in range(8):
        yield lambda s=seed: honest_scenario(s, params)
    for seed in range(4):
        yield lambda s=seed: honest_scenario(s, params, topology=lossy)
    for seed in range(2):
        yield lambda s=seed: honest_scenario(s, params, topology=star_topology(4))
    for kind in ("replay", "forge_node", "forge_sink", "inject", "mitm", "eavesdrop"):
        yield lambda k=kind: adv.attack_scenario(k, 11, params, variant=adv.VARIANTS[k][-1])


def test_criterion_8_determinism():
    params = ProtocolParams.generate(1096)
    builders = list(_pairs(params))
    same = 0
    for build in builders:
        a, b = run(build()), run(build())
        same += (a.digest() == b.digest()
                 and cm.ledger_csv(a.ledger) == cm.ledger_csv(b.ledger))
    ok = same == len(builders) == 20
    assert record(8, ok, f"{same}/{len(builders)} scenario pairs bit-identical")
