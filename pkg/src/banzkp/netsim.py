"""Deterministic discrete-event simulator of a small body-area network.

The sink floods a route announcement, every node keeps one parent towards it,
and all protocol frames travel over that collection tree: up towards the sink,
or down along the reversed path. Relays forward bytes untouched and never
decode them. Only simulated time exists; a run is a pure function of its
:class:`Scenario`.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional

from .costmodel import CostLedger, RadioModel, energy_cost, memory_footprint
from .crypto import ProtocolParams, derive_rng
from .protocol import (
    SINK_ID,
    DecodeError,
    Incoming,
    NodeFsm,
    NodeState,
    Sink,
    SinkState,
    Start,
    Timeout,
    decode,
    encode,
    node_step,
    register_nodes,
)


class RouteError(ValueError):
    def __init__(self, unreachable):
        self.unreachable = sorted(unreachable)
        super().__init__(f"nodes unreachable from the sink: {self.unreachable}")


class ConfigError(ValueError):
    pass


# --- topology ------------------------------------------------------------------

@dataclass(frozen=True)
class NodeSpec:
    id: int
    label: str = ""


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    delay_ms: float = 5.0
    loss: float = 0.0


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    links: tuple

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate node id in topology")
        if SINK_ID not in ids:
            raise ConfigError("topology has no sink (node 0)")
        for ln in self.links:
            if ln.a not in ids or ln.b not in ids or ln.a == ln.b:
                raise ConfigError(f"bad link {ln.a}-{ln.b}")
            if not 0.0 <= ln.loss <= 1.0 or ln.delay_ms < 0:
                raise ConfigError(f"bad link parameters on {ln.a}-{ln.b}")

    @property
    def ids(self) -> list:
        return sorted(n.id for n in self.nodes)

    def link(self, a: int, b: int) -> Link:
        for ln in self.links:
            if {ln.a, ln.b} == {a, b}:
                return ln
        raise KeyError((a, b))

    def neighbors(self, n: int) -> list:
        out = [ln.b if ln.a == n else ln.a for ln in self.links if n in (ln.a, ln.b)]
        return sorted(out)

    def with_link(self, a: int, b: int, **changes) -> "Topology":
        links = tuple(Link(ln.a, ln.b, changes.get("delay_ms", ln.delay_ms), changes.get("loss", ln.loss))
                      if {ln.a, ln.b} == {a, b} else ln for ln in self.links)
        return Topology(self.nodes, links)


BODY_LABELS = {0: "chest", 1: "left_arm", 2: "right_arm", 3: "head",
               4: "left_wrist", 5: "right_wrist", 6: "hip"}


def default_topology(delay_ms: float = 5.0) -> Topology:
    """Seven nodes on a body, sink on the chest; wrists sit two hops out."""
    edges = [(0, 1), (0, 2), (0, 3), (0, 6), (1, 4), (2, 5), (4, 6), (5, 6)]
    return Topology(tuple(NodeSpec(i, lbl) for i, lbl in BODY_LABELS.items()),
                    tuple(Link(a, b, delay_ms) for a, b in edges))


def star_topology(n: int, delay_ms: float = 5.0) -> Topology:
    return Topology(tuple(NodeSpec(i) for i in range(n + 1)),
                    tuple(Link(0, i, delay_ms) for i in range(1, n + 1)))


def chain_topology(n: int, delay_ms: float = 5.0) -> Topology:
    return Topology(tuple(NodeSpec(i) for i in range(n + 1)),
                    tuple(Link(i, i + 1, delay_ms) for i in range(n)))


# --- routing -------------------------------------------------------------------

@dataclass(frozen=True)
class RoutingTable:
    parent: dict
    hop_count: dict

    def path_to_sink(self, n: int) -> list:
        path = [n]
        while path[-1] != SINK_ID:
            path.append(self.parent[path[-1]])
        return path

    def edges(self) -> set:
        return {(n, p) for n, p in self.parent.items()}


def build_routes(topology: Topology) -> RoutingTable:
    """Route-Flood from the sink with a hop-count metric.

    Each node keeps one parent: among neighbours one hop closer to the sink,
    the one whose flood copy arrives first (summed link delay), lowest id on a
    tie.
    """
    hop = {SINK_ID: 0}
    arrival = {SINK_ID: 0.0}
    parent = {}
    frontier = [SINK_ID]
    while frontier:
        level = {}
        for u in frontier:
            for v in topology.neighbors(u):
                if v in hop:
                    continue
                t = arrival[u] + topology.link(u, v).delay_ms
                if v not in level or (t, u) < level[v]:
                    level[v] = (t, u)
        for v, (t, u) in level.items():
            hop[v] = hop[u] + 1
            arrival[v] = t
            parent[v] = u
        frontier = sorted(level)
    missing = set(topology.ids) - set(hop)
    if missing:
        raise RouteError(missing)
    return RoutingTable(parent, {n: h for n, h in hop.items() if n != SINK_ID})


class Forward(NamedTuple):
    action: str  # "deliver", "forward" or "drop"
    next_hop: Optional[int] = None


def relay(frame: "Frame", at_node: int, routing: RoutingTable) -> Forward:
    """Next move of ``frame`` sitting at ``at_node`` on the collection tree."""
    if frame.dst == at_node:
        return Forward("deliver")
    if frame.dst != SINK_ID and frame.dst not in routing.parent:
        return Forward("drop")
    if at_node != SINK_ID and at_node not in routing.parent:
        return Forward("drop")
    path = routing.path_to_sink(frame.dst)
    if at_node in path:
        return Forward("forward", path[path.index(at_node) - 1])
    return Forward("forward", routing.parent[at_node])


# --- scenario and events -------------------------------------------------------

@dataclass(frozen=True)
class Traffic:
    time_ms: float
    node: int
    data: bytes


@dataclass
class Scenario:
    topology: Topology = field(default_factory=default_topology)
    seed: int = 0
    traffic: tuple = ()
    adversaries: tuple = ()
    params: Optional[ProtocolParams] = None
    horizon_ms: float = 60_000.0
    timeout_ms: float = 100.0
    radio: RadioModel = RadioModel()
    name: str = "custom"

    def __post_init__(self):
        if self.params is None:
            self.params = ProtocolParams.generate(2048)
        ids = set(self.topology.ids)
        for tr in self.traffic:
            if tr.node not in ids or tr.node == SINK_ID:
                raise ConfigError(f"traffic references unknown sensor node {tr.node}")


def honest_scenario(seed: int, params: Optional[ProtocolParams] = None,
                    topology: Optional[Topology] = None, data_len: int = 16,
                    **kwargs) -> Scenario:
    """Every sensor authenticates once and reports one reading."""
    topology = topology or default_topology()
    rng = random.Random(f"data:{seed}")
    traffic = tuple(Traffic(float(i), n, rng.randbytes(data_len))
                    for i, n in enumerate(n for n in topology.ids if n != SINK_ID))
    kwargs.setdefault("name", "honest")
    return Scenario(topology=topology, seed=seed, traffic=traffic, params=params, **kwargs)


@dataclass(frozen=True)
class Frame:
    fid: int
    src: Any  # node id, or "adv" for injected frames
    dst: int
    data: bytes
    origin: str


@dataclass(frozen=True)
class Deliver:
    frame: Frame
    at_node: int
    from_node: Any


@dataclass(frozen=True)
class AppStart:
    node: int
    data: bytes


@dataclass(frozen=True)
class TimerFire:
    node: int
    timer_id: int


@dataclass(frozen=True)
class Action:
    fn: Callable


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def _tag_name(data: bytes) -> str:
    names = {1: "M1", 2: "M2", 3: "M3", 4: "M4", 5: "M5", 0x10: "RouteFlood"}
    return names.get(data[0], "?") if data else "?"


# --- trace ---------------------------------------------------------------------

@dataclass
class Trace:
    name: str
    seed: int
    records: list
    node_states: dict
    sink_states: dict
    ledger: CostLedger
    routing: RoutingTable

    def of_type(self, kind: str) -> list:
        return [r for r in self.records if r["type"] == kind]

    @property
    def deliveries(self) -> list:
        return self.of_type("deliver")

    def frames(self, tag: Optional[str] = None, origin: Optional[str] = None) -> list:
        return [r for r in self.of_type("send")
                if (tag is None or r["tag"] == tag) and (origin is None or r["origin"] == origin)]

    def conservation(self) -> dict:
        sent = len(self.of_type("send"))
        arrived = len(self.of_type("arrive"))
        lost = len(self.of_type("lost")) + len(self.of_type("intercepted"))
        noroute = len(self.of_type("noroute"))
        return {"sent": sent, "arrived": arrived, "dropped": lost + noroute,
                "in_flight": sent - arrived - lost - noroute}

    def summary(self) -> dict:
        return {
            "type": "summary",
            "scenario": self.name,
            "seed": self.seed,
            "node_states": {str(k): v for k, v in sorted(self.node_states.items())},
            "sink_states": {str(k): v for k, v in sorted(self.sink_states.items())},
            "deliveries": len(self.deliveries),
            "conservation": self.conservation(),
            "ledger": self.ledger.as_dict(),
        }

    def lines(self):
        for r in self.records:
            yield json.dumps(r, sort_keys=True)
        yield json.dumps(self.summary(), sort_keys=True)

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode() + b"\n")
        return h.hexdigest()


# --- simulator -----------------------------------------------------------------

class Simulator:
    """Single-threaded event loop hosting the node and sink machines."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.params = scenario.params
        self.topology = scenario.topology
        self.routing = build_routes(scenario.topology)
        master = random.Random(scenario.seed)
        sensors = [n for n in self.topology.ids if n != SINK_ID]
        self.registry = register_nodes(sensors, self.params, derive_rng(master, "register"))
        self.loss_rng = derive_rng(master, "loss")
        self.sink_rng = derive_rng(master, "sink")
        self.node_rngs = {n: derive_rng(master, f"node{n}") for n in sensors}
        self.adv_rng = derive_rng(master, "adversary")
        self.nodes = {n: NodeFsm(self.registry[n], self.params) for n in sensors}
        self.sink = Sink(self.registry, self.params)
        self.ledger = CostLedger()
        self.records: list = []
        self.now = 0.0
        self._queue: list = []
        self._seq = itertools.count()
        self._fids = itertools.count(1)
        self._timer_ids = itertools.count(1)
        self._armed: dict = {}
        self.adversaries = list(scenario.adversaries)

    # scheduling
    def schedule(self, time_ms: float, event) -> None:
        heapq.heappush(self._queue, (time_ms, next(self._seq), event))

    def at(self, time_ms: float, fn: Callable) -> None:
        self.schedule(time_ms, Action(fn))

    def record(self, rtype: str, /, **fields) -> None:
        fields["type"] = rtype
        fields["t"] = self.now
        self.records.append(fields)

    # transport
    def send(self, src, dst: int, data: bytes, origin: str = "node") -> Frame:
        frame = Frame(next(self._fids), src, dst, bytes(data), origin)
        self.record("send", fid=frame.fid, src=src, dst=dst, tag=_tag_name(data),
                    len=len(data), origin=origin, data=data.hex())
        if origin == "adv":
            # attacker radio next to the entry node ``src``
            self.schedule(self.now + 1.0, Deliver(frame, src, "adv"))
        else:
            self._transmit(frame, src)
        return frame

    def inject(self, data: bytes, dst: int, entry: int) -> Frame:
        """Attacker transmits ``data`` to the radio of ``entry``; routed on from there."""
        return self.send(entry, dst, data, origin="adv")

    def _transmit(self, frame: Frame, at_node: int) -> None:
        move = relay(frame, at_node, self.routing)
        if move.action == "drop":
            self.record("noroute", fid=frame.fid, node=at_node)
            return
        nxt = move.next_hop
        self.ledger[at_node].bits_tx += 8 * len(frame.data)
        self.record("hop", fid=frame.fid, frm=at_node, to=nxt, len=len(frame.data),
                    digest=_digest(frame.data))
        for adv in self.adversaries:
            adv.observe(self, frame, at_node, nxt)
        for adv in self.adversaries:
            data = adv.intercept(self, frame, at_node, nxt)
            if data is None:
                self.record("intercepted", fid=frame.fid, frm=at_node, to=nxt)
                return
            if data != frame.data:
                frame = Frame(frame.fid, frame.src, frame.dst, bytes(data), frame.origin)
                self.record("tamper", fid=frame.fid, frm=at_node, to=nxt, data=frame.data.hex())
        link = self.topology.link(at_node, nxt)
        if link.loss > 0 and self.loss_rng.random() < link.loss:
            self.record("lost", fid=frame.fid, frm=at_node, to=nxt)
            return
        self.schedule(self.now + link.delay_ms, Deliver(frame, nxt, at_node))

    # event handlers
    def _deliver(self, ev: Deliver) -> None:
        frame, node = ev.frame, ev.at_node
        self.ledger[node].bits_rx += 8 * len(frame.data)
        if frame.dst == node:
            self._arrive(frame, node)
        else:
            self._transmit(frame, node)

    def _arrive(self, frame: Frame, node: int) -> None:
        self.record("arrive", fid=frame.fid, node=node, digest=_digest(frame.data))
        try:
            msg = decode(frame.data)
        except DecodeError as exc:
            self.record("audit", party="sink" if node == SINK_ID else "node", node=node, msg=str(exc))
            return
        self.record("process", node=node, fid=frame.fid, tag=_tag_name(frame.data))
        if node == SINK_ID:
            self._sink_receive(msg, frame)
        else:
            self._node_event(node, Incoming(msg), frame.fid)

    def _node_event(self, n: int, event, fid: Optional[int] = None) -> None:
        before = self.nodes[n]
        res = node_step(before, event, self.node_rngs[n])
        after = res.fsm
        self.nodes[n] = after
        self.ledger[n].modmuls += res.modmuls
        if isinstance(event, Start):
            self.record("session", party="node", node=n, nonce=after.nonce, p=hex(after.p),
                        data=after.pending_data.hex())
        if after.state is not before.state:
            self.record("transition", party="node", node=n, frm=before.state.value,
                        to=after.state.value, fid=fid)
        for why in res.audit:
            self.record("audit", party="node", node=n, msg=why)
        for m in res.outgoing:
            self.send(n, SINK_ID, encode(m))
        if after.state in (NodeState.SENT_M1, NodeState.SENT_M3):
            if res.outgoing:
                self._arm(n, after.retries)
        else:
            self._armed.pop(n, None)

    def _arm(self, n: int, retries: int) -> None:
        tid = next(self._timer_ids)
        self._armed[n] = tid
        self.schedule(self.now + self.scenario.timeout_ms * (2 ** retries), TimerFire(n, tid))

    def _sink_receive(self, msg, frame: Frame) -> None:
        sender = getattr(msg, "sender_id", None)
        before = self.sink.sessions.get(sender)
        nid, res = self.sink.receive(msg, self.sink_rng)
        for why in res.audit:
            self.record("audit", party="sink", node=nid if nid is not None else sender, msg=why)
        if nid is None:
            return
        after = res.fsm
        self.ledger[SINK_ID].modmuls += res.modmuls
        old_state = before.state if before is not None else SinkState.IDLE
        fresh = after.q is not None and (before is None or before.q != after.q)
        if fresh:
            self.record("session", party="sink", node=nid, nonce=after.nonce, q=hex(after.q),
                        ri=after.ri, kcs=after.kcs.key.hex())
        if after.state is not old_state or (fresh and after.state is SinkState.SENT_M2):
            self.record("transition", party="sink", node=nid, frm=old_state.value,
                        to=after.state.value, fid=frame.fid)
        if res.delivered is not None:
            self.record("deliver", node=nid, fid=frame.fid, origin=frame.origin, data=res.delivered.hex())
        for m in res.outgoing:
            self.send(SINK_ID, nid, encode(m), origin="sink")

    def run(self) -> Trace:
        for n in sorted(self.registry):
            ident = self.registry[n]
            self.record("register", node=n, key=ident.session_key.key.hex(), v=hex(ident.secret.v))
        for n in sorted(self.routing.parent):
            self.record("route", node=n, parent=self.routing.parent[n], hop=self.routing.hop_count[n])
        for tr in self.scenario.traffic:
            self.schedule(tr.time_ms, AppStart(tr.node, tr.data))
        for adv in self.adversaries:
            adv.attach(self)
        while self._queue:
            t, _, ev = heapq.heappop(self._queue)
            if t > self.scenario.horizon_ms:
                break
            self.now = t
            if isinstance(ev, Deliver):
                self._deliver(ev)
            elif isinstance(ev, AppStart):
                self._node_event(ev.node, Start(ev.data))
            elif isinstance(ev, TimerFire):
                if self._armed.get(ev.node) == ev.timer_id:
                    self._node_event(ev.node, Timeout())
            else:
                ev.fn(self)
        return self._finish()

    def _finish(self) -> Trace:
        sensors = sorted(self.nodes)
        mem = memory_footprint(self.params, len(sensors), sessions=1)
        for n in sensors:
            self.ledger[n].mem_bytes = mem["node"]
        self.ledger[SINK_ID].mem_bytes = mem["sink"]
        energy_cost(self.ledger, self.scenario.radio)
        return Trace(
            name=self.scenario.name,
            seed=self.scenario.seed,
            records=self.records,
            node_states={n: self.nodes[n].state.value for n in sensors},
            sink_states={n: self.sink.session(n).state.value for n in sensors},
            ledger=self.ledger,
            routing=self.routing,
        )


def run(scenario: Scenario) -> Trace:
    return Simulator(scenario).run()
