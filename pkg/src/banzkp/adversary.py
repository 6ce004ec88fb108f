"""External attackers as simulator plug-ins, and trace-only verdicts.

An attacker holds no pre-distributed key or secret. It sees every frame on
the air (``observe``), may sit on one link and drop or rewrite what crosses it
(``intercept``), and may transmit crafted frames next to any node
(``Simulator.inject``). It never touches a state machine.

Each ``judge_*`` function decides PASS/FAIL from a finished trace alone; the
attacker leaves ``adv`` records in the trace naming its victim and actions.
The batch functions (:func:`replay`, :func:`forge_node`, ...) run many seeded
trials plus an attacker-free control run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .crypto import NONCE_BYTES, TAG_BYTES, ProtocolParams
from .netsim import Scenario, Simulator, Trace, Traffic, default_topology, run
from .protocol import SINK_ID, M1, M2, M3, M4, M5, DecodeError, decode, encode

KINDS = ("forge_node", "forge_sink", "replay", "inject", "mitm", "guess", "eavesdrop")


class Adversary:
    """Passive eavesdropper; subclasses add active behaviour."""

    kind = "eavesdrop"

    def __init__(self, victim: int):
        self.victim = victim
        self.knowledge: list = []

    def attach(self, sim: Simulator) -> None:
        self.note(sim, "attach")

    def note(self, sim: Simulator, action: str, **extra) -> None:
        sim.record("adv", kind=self.kind, victim=self.victim, action=action, **extra)

    def observe(self, sim: Simulator, frame, frm, to) -> None:
        self.knowledge.append((sim.now, frame.fid, frm, to, frame.data))

    def intercept(self, sim: Simulator, frame, frm, to) -> Optional[bytes]:
        return frame.data

    def inject(self, sim: Simulator, data: bytes, dst: int, entry: int, action: str) -> None:
        f = sim.inject(data, dst, entry)
        self.note(sim, action, fid=f.fid)

    def recorded(self, tag: str, src: int, before: float = float("inf")) -> list:
        """Frames first heard leaving ``src`` with message tag ``tag``."""
        out = []
        for t, _, frm, _, data in self.knowledge:
            if frm == src and t < before and _tag(data) == tag:
                out.append(data)
        return out


def _tag(data: bytes) -> str:
    return {1: "M1", 2: "M2", 3: "M3", 4: "M4", 5: "M5"}.get(data[0], "?") if data else "?"


def _on_uplink(sim: Simulator, victim: int, frm, to) -> bool:
    return {frm, to} == {victim, sim.routing.parent[victim]}


def random_m1(rng: random.Random, sender: int, params: ProtocolParams) -> bytes:
    return encode(M1(sender, rng.getrandbits(8 * NONCE_BYTES),
                     rng.randbytes(1 + params.width_bytes + TAG_BYTES)))


def random_m2(rng: random.Random, params: ProtocolParams) -> bytes:
    return encode(M2(rng.getrandbits(8 * NONCE_BYTES), rng.randbytes(1 + params.width_bytes + 2 + TAG_BYTES),
                     rng.randbytes(params.width_bytes + TAG_BYTES)))


def random_m3(rng: random.Random, sender: int, params: ProtocolParams) -> bytes:
    return encode(M3(sender, rng.randbytes(1 + params.interval_bytes + TAG_BYTES)))


def random_m4(rng: random.Random, params: ProtocolParams) -> bytes:
    return encode(M4(rng.randbytes(params.kcs_bits // 8)))


def random_m5(rng: random.Random, sender: int, seq: int = 0, size: int = 16) -> bytes:
    return encode(M5(sender, seq, rng.randbytes(1 + size + TAG_BYTES)))


# --- attackers -----------------------------------------------------------------

class ForgeNode(Adversary):
    """Impersonates an idle node towards the sink without its key."""

    kind = "forge_node"

    def __init__(self, victim: int, variant: str = "full", start_ms: float = 5.0):
        super().__init__(victim)
        self.variant = variant
        self.start_ms = start_ms

    def attach(self, sim):
        super().attach(sim)
        rng, p, v = sim.adv_rng, sim.params, self.victim
        entry = sim.routing.parent[v]
        t = self.start_ms
        if self.variant == "full":
            sim.at(t, lambda s: self.inject(s, random_m1(rng, v, p), SINK_ID, entry, "forged M1"))
            sim.at(t + 50, lambda s: self.inject(s, random_m3(rng, v, p), SINK_ID, entry, "forged M3"))
        sim.at(t + 100, lambda s: self.inject(s, random_m5(rng, v), SINK_ID, entry, "forged M5"))


class ForgeSink(Adversary):
    """Answers the victim in place of the sink.

    ``variant="m2"`` swallows the victim's M1 and returns a crafted challenge;
    ``variant="m4"`` lets the real handshake run and swaps the revealed key.
    """

    kind = "forge_sink"

    def __init__(self, victim: int, variant: str = "m2"):
        super().__init__(victim)
        self.variant = variant

    def intercept(self, sim, frame, frm, to):
        if frame.origin == "adv" or not _on_uplink(sim, self.victim, frm, to):
            return frame.data
        tag = _tag(frame.data)
        if self.variant == "m2" and tag == "M1" and frm == self.victim:
            self.note(sim, "swallowed M1", fid=frame.fid)
            self.inject(sim, random_m2(sim.adv_rng, sim.params), self.victim, self.victim, "forged M2")
            return None
        if self.variant == "m4" and tag == "M4" and to == self.victim:
            self.note(sim, "swallowed M4", fid=frame.fid)
            self.inject(sim, random_m4(sim.adv_rng, sim.params), self.victim, self.victim, "forged M4")
            return None
        return frame.data


class Replay(Adversary):
    """Records one full session of the victim and replays it later.

    ``variant="m1m3"`` replays the old M1, waits for the sink's fresh
    challenge and answers it with the old M3. ``variant="m3"`` waits for the
    victim's own second session and races the old M3 to the sink.
    """

    kind = "replay"

    def __init__(self, victim: int, variant: str = "m1m3", replay_at: float = 2000.0):
        super().__init__(victim)
        self.variant = variant
        self.replay_at = replay_at
        self._armed = False

    def attach(self, sim):
        super().attach(sim)
        if self.variant == "m1m3":
            sim.at(self.replay_at, self._replay_m1)
        else:
            sim.at(self.replay_at, lambda s: setattr(self, "_armed", True))

    def _replay_m1(self, sim):
        old = self.recorded("M1", self.victim, before=self.replay_at)
        if old:
            self._armed = True
            self.inject(sim, old[0], SINK_ID, sim.routing.parent[self.victim], "replayed M1")

    def observe(self, sim, frame, frm, to):
        super().observe(sim, frame, frm, to)
        if self._armed and frm == SINK_ID and frame.dst == self.victim and _tag(frame.data) == "M2":
            self._armed = False
            old = self.recorded("M3", self.victim, before=self.replay_at)
            if old:
                self.inject(sim, old[0], SINK_ID, SINK_ID, "replayed M3")


class Inject(Adversary):
    """Pushes random and spliced data frames at the sink in every session phase."""

    kind = "inject"

    def __init__(self, victim: int, second_session_at: float = 2000.0):
        super().__init__(victim)
        self.second = second_session_at
        self._seen_m2 = set()

    def attach(self, sim):
        super().attach(sim)
        rng, v = sim.adv_rng, self.victim
        entry = sim.routing.parent[v]
        sim.at(0.5, lambda s: self.inject(s, random_m5(rng, v), SINK_ID, entry, "random M5 before handshake"))
        sim.at(self.second - 10, lambda s: self.inject(s, random_m5(rng, v, 1), SINK_ID, entry,
                                                       "random M5 after handshake"))
        sim.at(self.second - 5, self._splice_same_session)

    def _splice_same_session(self, sim):
        for data in self.recorded("M5", self.victim)[:1]:
            self.inject(sim, data, SINK_ID, sim.routing.parent[self.victim], "duplicate M5")

    def observe(self, sim, frame, frm, to):
        super().observe(sim, frame, frm, to)
        if frm == SINK_ID and frame.dst == self.victim and _tag(frame.data) == "M4":
            # authenticated in the current session: splice the previous session's data frame
            old = self.recorded("M5", self.victim, before=self.second if sim.now > self.second else 0)
            if old:
                self.inject(sim, old[0], SINK_ID, SINK_ID, "spliced old M5")
        if frm == SINK_ID and frame.dst == self.victim and _tag(frame.data) == "M2" \
                and frame.fid not in self._seen_m2:
            self._seen_m2.add(frame.fid)
            self.inject(sim, random_m5(sim.adv_rng, self.victim), SINK_ID, SINK_ID,
                        "random M5 mid-handshake")


class MitM(Adversary):
    """Sits on the victim's uplink; flips one bit of every frame of type ``mutate``."""

    kind = "mitm"

    def __init__(self, victim: int, mutate: Optional[str] = None):
        super().__init__(victim)
        self.mutate = mutate

    def attach(self, sim):
        super().attach(sim)
        self.note(sim, f"mode {self.mutate or 'pass'}")

    def intercept(self, sim, frame, frm, to):
        if self.mutate is None or not _on_uplink(sim, self.victim, frm, to):
            return frame.data
        if _tag(frame.data) != self.mutate or frame.origin == "adv":
            return frame.data
        bit = sim.adv_rng.randrange(8 * len(frame.data))
        data = bytearray(frame.data)
        data[bit // 8] ^= 0x80 >> (bit % 8)
        self.note(sim, f"flipped bit {bit} of {self.mutate}", fid=frame.fid)
        return bytes(data)


# --- verdicts ------------------------------------------------------------------

def _adv_records(trace: Trace) -> list:
    return trace.of_type("adv")


def _victim(trace: Trace) -> int:
    return _adv_records(trace)[0]["victim"]


def _adv_fids(trace: Trace) -> set:
    return {r["fid"] for r in trace.frames(origin="adv")}


def _sink_transitions(trace: Trace, node: int) -> list:
    return [r for r in trace.of_type("transition") if r["party"] == "sink" and r["node"] == node]


def adversary_deliveries(trace: Trace) -> list:
    return [r for r in trace.deliveries if r["origin"] == "adv"]


@dataclass
class Judgement:
    passed: bool
    accepted: bool = False
    reason: str = ""


def judge_forge_node(trace: Trace) -> Judgement:
    v = _victim(trace)
    forged_m1 = any(r["action"] == "forged M1" for r in _adv_records(trace))
    accepted = trace.sink_states[v] == "Authenticated" or bool(adversary_deliveries(trace))
    ok = not accepted and (trace.sink_states[v] == "Rejected" if forged_m1 else True)
    return Judgement(ok, accepted, f"sink state for {v}: {trace.sink_states[v]}")


def judge_forge_sink(trace: Trace) -> Judgement:
    v = _victim(trace)
    m5 = [r for r in trace.frames(tag="M5", origin="node") if r["src"] == v]
    accepted = bool(m5)
    ok = trace.node_states[v] == "Aborted" and not m5
    return Judgement(ok, accepted, f"node {v}: {trace.node_states[v]}, {len(m5)} M5 sent")


def judge_replay(trace: Trace) -> Judgement:
    v, fids = _victim(trace), _adv_fids(trace)
    caused = [r for r in _sink_transitions(trace, v) if r["fid"] in fids]
    accepted = any(r["to"] == "Authenticated" for r in caused) or bool(adversary_deliveries(trace))
    rejected = any(r["to"] == "Rejected" for r in caused)
    replayed_m3 = any(r["action"] == "replayed M3" for r in _adv_records(trace))
    return Judgement(rejected and replayed_m3 and not accepted, accepted,
                     "rejected" if rejected else "replayed M3 not rejected")


def judge_inject(trace: Trace) -> Judgement:
    bad = adversary_deliveries(trace)
    return Judgement(not bad, bool(bad), f"{len(bad)} injected deliveries")


def _intact_delivery(trace: Trace, node: int) -> bool:
    sent = {r["data"] for r in trace.of_type("session") if r["party"] == "node" and r["node"] == node}
    got = [r["data"] for r in trace.deliveries if r["node"] == node]
    return bool(got) and all(d in sent for d in got)


def judge_mitm(trace: Trace) -> Judgement:
    """A tampered frame is accepted if it moves either party to Authenticated
    or yields a delivery.

    Handshake mutations (M1 to M4) must also end the session in Aborted or
    Rejected. M5 gets no reply, so a flip in its unauthenticated header is
    only dropped; for M5 a drop without delivery passes.
    """
    v = _victim(trace)
    mode = next(r["action"] for r in _adv_records(trace) if r["action"].startswith("mode "))
    both = trace.node_states[v] == "Authenticated" and trace.sink_states[v] == "Authenticated"
    if mode == "mode pass":
        ok = both and _intact_delivery(trace, v)
        return Judgement(ok, False, "pass-through " + ("completed" if ok else "failed"))
    tampered = {r["fid"] for r in trace.of_type("tamper")}
    caused = [r for r in trace.of_type("transition")
              if r["fid"] in tampered and r["to"] == "Authenticated"]
    caused += [r for r in trace.deliveries if r["fid"] in tampered]
    forged = [r for r in trace.deliveries if r["node"] == v] and not _intact_delivery(trace, v)
    accepted = bool(caused or forged)
    ended_bad = trace.node_states[v] == "Aborted" or trace.sink_states[v] == "Rejected"
    detected = ended_bad or mode == "mode M5"
    return Judgement(bool(tampered) and detected and not accepted, accepted,
                     f"{len(tampered)} tampered, node {trace.node_states[v]}, "
                     f"sink {trace.sink_states[v]}")


def secret_material(trace: Trace, params: ProtocolParams) -> dict:
    """Fixed-width encodings of every key, secret and exponent in the run."""
    out = {}
    for r in trace.of_type("register"):
        out[f"K{r['node']}"] = bytes.fromhex(r["key"])
        out[f"V{r['node']}"] = int(r["v"], 16).to_bytes(params.width_bytes, "big")
    for i, r in enumerate(trace.of_type("session")):
        for name in ("p", "q"):
            if name in r:
                out[f"{name}{r['node']}#{i}"] = int(r[name], 16).to_bytes(params.exponent_bytes, "big")
    return out


def wire_bytes(trace: Trace) -> list:
    """Every byte string that was ever on the air."""
    return [bytes.fromhex(r["data"]) for r in trace.records if r["type"] in ("send", "tamper")]


def secret_hits(trace: Trace, params: ProtocolParams) -> list:
    frames = wire_bytes(trace)
    return [name for name, enc in secret_material(trace, params).items()
            if any(enc in f for f in frames)]


def freshness(trace: Trace, node: Optional[int] = None) -> dict:
    """Distinctness of per-session randomness, matched node session to sink session by nonce."""
    nodes = {(r["node"], r["nonce"]): r for r in trace.of_type("session") if r["party"] == "node"}
    sinks = {(r["node"], r["nonce"]): r for r in trace.of_type("session") if r["party"] == "sink"}
    tuples = [(nodes[k]["p"], s["q"], s["ri"], s["kcs"]) for k, s in sinks.items()
              if k in nodes and (node is None or k[0] == node)]
    kcs_wire = []
    for r in trace.frames(tag="M4", origin="sink"):
        if node is None or r["dst"] == node:
            kcs_wire.append(decode(bytes.fromhex(r["data"])).kcs)
    return {
        "sessions": len(tuples),
        "distinct_tuples": len(set(tuples)),
        "kcs_seen": len(kcs_wire),
        "distinct_kcs": len(set(kcs_wire)),
    }


def judge_guess(trace: Trace, params: ProtocolParams) -> Judgement:
    hits = secret_hits(trace, params)
    fr = freshness(trace)
    fresh = fr["distinct_tuples"] == fr["sessions"] and fr["distinct_kcs"] == fr["kcs_seen"]
    return Judgement(not hits and fresh, bool(hits),
                     f"{len(hits)} secret hits, {fr['distinct_tuples']}/{fr['sessions']} fresh")


def judge_eavesdrop(trace: Trace) -> Judgement:
    frames = wire_bytes(trace)
    plain = [bytes.fromhex(r["data"]) for r in trace.of_type("session") if r["party"] == "node"]
    leaks = [d for d in plain if d and any(d in f for f in frames)]
    return Judgement(not leaks, bool(leaks), f"{len(leaks)} plaintext readings on air")


# --- scenarios and batches -----------------------------------------------------

DEFAULT_VICTIM = 4  # two hops out, so every attack crosses a relay


def _data(seed: int, tag: str, n: int = 16) -> bytes:
    return random.Random(f"{tag}:{seed}").randbytes(n)


def attack_scenario(kind: str, seed: int, params: Optional[ProtocolParams] = None,
                    victim: int = DEFAULT_VICTIM, variant: Optional[str] = None,
                    enabled: bool = True) -> Scenario:
    """Preset scenario for one attack class; ``enabled=False`` gives its control run."""
    topo = default_topology()
    first = (Traffic(0.0, victim, _data(seed, "a")),)
    second = first + (Traffic(2000.0, victim, _data(seed, "b")),)
    if kind == "forge_node":
        other = 1 if victim != 1 else 2
        traffic = (Traffic(0.0, other, _data(seed, "a")),)
        adv = ForgeNode(victim, variant or "full")
        if not enabled:
            traffic += (Traffic(0.0, victim, _data(seed, "c")),)
    elif kind == "forge_sink":
        traffic, adv = first, ForgeSink(victim, variant or "m2")
    elif kind == "replay":
        variant = variant or "m1m3"
        traffic = second if variant == "m3" or not enabled else first
        adv = Replay(victim, variant)
    elif kind == "inject":
        traffic, adv = second, Inject(victim)
    elif kind == "mitm":
        traffic, adv = first, MitM(victim, variant if enabled else None)
    elif kind in ("guess", "eavesdrop"):
        sessions = 100 if kind == "guess" else 3
        traffic = tuple(Traffic(500.0 * i, victim, _data(seed, f"g{i}")) for i in range(sessions))
        adv = Adversary(victim)
        adv.kind = kind
    else:
        raise ValueError(f"unknown attack kind {kind!r}")
    advs = (adv,) if enabled or kind == "mitm" else ()
    return Scenario(topology=topo, seed=seed, traffic=traffic, adversaries=advs,
                    params=params, name=f"{kind}{'' if enabled else '-control'}")


def judge(kind: str, trace: Trace, params: ProtocolParams) -> Judgement:
    if kind == "guess":
        return judge_guess(trace, params)
    return {
        "forge_node": judge_forge_node,
        "forge_sink": judge_forge_sink,
        "replay": judge_replay,
        "inject": judge_inject,
        "mitm": judge_mitm,
        "eavesdrop": judge_eavesdrop,
    }[kind](trace)


def control_ok(trace: Trace) -> bool:
    """Every node that had traffic completed and its data arrived intact."""
    active = {r["node"] for r in trace.of_type("session") if r["party"] == "node"}
    return all(trace.node_states[n] == "Authenticated" and trace.sink_states[n] == "Authenticated"
               and _intact_delivery(trace, n) for n in active)


VARIANTS = {
    "forge_node": ("full", "m5"),
    "forge_sink": ("m2", "m4"),
    "replay": ("m1m3", "m3"),
    "inject": (None,),
    "mitm": ("M1", "M2", "M3", "M4", "M5"),
    "guess": (None,),
    "eavesdrop": (None,),
}


@dataclass
class Verdict:
    kind: str
    trials: int
    accepted: int = 0
    failed: list = field(default_factory=list)
    control_ok: bool = True
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failed and self.accepted == 0 and self.control_ok

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "" if self.control_ok else ", control run failed"
        return f"{self.kind}: {status} ({self.accepted}/{self.trials} accepted{extra})"


def trial_seed(seed: int, i: int) -> int:
    return seed * 1_000_003 + i


def run_attack(kind: str, trials: int = 100, seed: int = 0, params: Optional[ProtocolParams] = None,
               victim: int = DEFAULT_VICTIM, progress: Optional[Callable] = None) -> Verdict:
    """Run ``trials`` seeded attack scenarios of one class plus a control run."""
    if kind not in VARIANTS:
        raise ValueError(f"unknown attack kind {kind!r}")
    params = params or ProtocolParams.generate(2048)
    verdict = Verdict(kind, trials)
    variants = VARIANTS[kind]
    for i in range(trials):
        s = trial_seed(seed, i)
        variant = variants[i % len(variants)]
        trace = run(attack_scenario(kind, s, params, victim, variant))
        j = judge(kind, trace, params)
        verdict.accepted += j.accepted
        if not j.passed:
            verdict.failed.append((s, variant, j.reason))
        if progress:
            progress(i, j)
    control = run(attack_scenario(kind, trial_seed(seed, trials), params, victim, enabled=False))
    verdict.control_ok = control_ok(control)
    return verdict


def forge_node(trials: int = 100, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    return run_attack("forge_node", trials, seed, params)


def forge_sink(trials: int = 100, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    return run_attack("forge_sink", trials, seed, params)


def replay(trials: int = 100, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    return run_attack("replay", trials, seed, params)


def inject(trials: int = 100, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    return run_attack("inject", trials, seed, params)


def mitm(trials: int = 100, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    return run_attack("mitm", trials, seed, params)


def guess(trials: int = 1, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    """Each trial is one run in which the victim completes 100 sessions."""
    return run_attack("guess", trials, seed, params)


def eavesdrop(trials: int = 10, seed: int = 0, params: Optional[ProtocolParams] = None) -> Verdict:
    return run_attack("eavesdrop", trials, seed, params)
