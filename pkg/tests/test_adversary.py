import pytest

from banzkp import adversary as adv
from banzkp.netsim import run


def trace_of(kind, seed, params, variant=None, enabled=True):
    return run(adv.attack_scenario(kind, seed, params, adv.DEFAULT_VICTIM, variant, enabled))


@pytest.mark.parametrize("kind", ["forge_node", "forge_sink", "replay", "inject", "mitm", "eavesdrop"])
def test_batch_has_no_acceptances(kind, params):
    v = adv.run_attack(kind, trials=30, seed=5, params=params)
    assert v.passed, v.failed[:3]
    assert v.accepted == 0 and v.control_ok


def test_guess_batch(params):
    v = adv.guess(trials=1, seed=2, params=params)
    assert v.passed, v.failed


@pytest.mark.parametrize("kind", sorted(adv.VARIANTS))
def test_control_runs_complete(kind, params):
    tr = trace_of(kind, 17, params, enabled=False)
    assert adv.control_ok(tr)


def test_attacks_actually_fire(params):
    actions = {
        ("forge_node", "full"): "forged M1",
        ("forge_node", "m5"): "forged M5",
        ("forge_sink", "m2"): "forged M2",
        ("forge_sink", "m4"): "forged M4",
        ("replay", "m1m3"): "replayed M3",
        ("replay", "m3"): "replayed M3",
        ("inject", None): "spliced old M5",
    }
    for (kind, variant), action in actions.items():
        tr = trace_of(kind, 1, params, variant)
        assert any(r["action"] == action for r in tr.of_type("adv")), (kind, variant)


def test_forged_m1_rejected_and_m5_dropped(params):
    tr = trace_of("forge_node", 3, params, "full")
    assert tr.sink_states[adv.DEFAULT_VICTIM] == "Rejected"
    assert adv.adversary_deliveries(tr) == []
    tr = trace_of("forge_node", 3, params, "m5")
    audits = [r["msg"] for r in tr.of_type("audit") if r["node"] == adv.DEFAULT_VICTIM]
    assert "data from unauthenticated node dropped" in audits


def test_forged_sink_gets_no_data(params):
    for variant in ("m2", "m4"):
        tr = trace_of("forge_sink", 4, params, variant)
        assert tr.node_states[adv.DEFAULT_VICTIM] == "Aborted"
        assert [r for r in tr.frames("M5") if r["src"] == adv.DEFAULT_VICTIM] == []


def test_replayed_m1_draws_fresh_challenge_then_rejection(params):
    tr = trace_of("replay", 6, params, "m1m3")
    fids = {r["fid"] for r in tr.frames(origin="adv")}
    moves = [(r["frm"], r["to"]) for r in tr.of_type("transition")
             if r["party"] == "sink" and r["fid"] in fids]
    assert ("Authenticated", "SentM2") in moves
    assert moves[-1][1] == "Rejected"
    sessions = [r for r in tr.of_type("session") if r["party"] == "sink"]
    assert len(sessions) == 2 and sessions[0]["kcs"] != sessions[1]["kcs"]


def test_replayed_m3_against_live_session(params):
    tr = trace_of("replay", 6, params, "m3")
    assert adv.judge_replay(tr).passed
    assert not adv.adversary_deliveries(tr)


@pytest.mark.parametrize("msg", ["M1", "M2", "M3", "M4"])
def test_handshake_mutation_ends_badly(msg, params):
    for seed in range(5):
        tr = trace_of("mitm", seed, params, msg)
        v = adv.DEFAULT_VICTIM
        assert tr.node_states[v] == "Aborted" or tr.sink_states[v] == "Rejected"
        if msg in ("M2", "M4"):
            assert tr.node_states[v] == "Aborted"


def test_m5_mutation_never_delivered(params):
    for seed in range(10):
        tr = trace_of("mitm", seed, params, "M5")
        tampered = {r["fid"] for r in tr.of_type("tamper")}
        assert tampered
        assert not [d for d in tr.deliveries if d["fid"] in tampered]


def test_mitm_pass_through_completes(params):
    tr = trace_of("mitm", 0, params, None)
    assert adv.judge_mitm(tr).passed
    assert tr.node_states[adv.DEFAULT_VICTIM] == "Authenticated"


def test_guess_scan_and_freshness(params):
    tr = trace_of("guess", 0, params)
    assert adv.secret_hits(tr, params) == []
    fr = adv.freshness(tr, adv.DEFAULT_VICTIM)
    assert fr["sessions"] == 100 and fr["distinct_tuples"] == 100
    assert fr["kcs_seen"] >= 100 and fr["distinct_kcs"] == fr["kcs_seen"]


def test_secret_scan_detects_a_leak(params):
    # the scanner must be able to see a secret when one is on the air
    tr = trace_of("eavesdrop", 0, params)
    key = next(r["key"] for r in tr.of_type("register") if r["node"] == 1)
    tr.records.append({"type": "send", "data": "00" + key + "00"})
    assert "K1" in adv.secret_hits(tr, params)


def test_verdict_is_a_function_of_the_trace(params):
    tr = trace_of("inject", 9, params)
    copy = type(tr)(tr.name, tr.seed, [dict(r) for r in tr.records], dict(tr.node_states),
                    dict(tr.sink_states), tr.ledger, tr.routing)
    assert adv.judge("inject", tr, params) == adv.judge("inject", copy, params)


def test_verdict_line_format():
    v = adv.Verdict("replay", 1000)
    assert v.line() == "replay: PASS (0/1000 accepted)"
    v.accepted = 1
    v.failed.append((0, None, "x"))
    assert v.line().startswith("replay: FAIL")


def test_unknown_kind():
    with pytest.raises(ValueError):
        adv.run_attack("teleport", 1)
