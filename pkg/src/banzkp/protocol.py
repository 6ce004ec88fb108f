"""Wire messages, their byte codec, and the node / sink handshake machines.

Frame layout (all integers big-endian)::

    tag:u8  [sender:u8]  length:u16  payload[length]

``sender`` is present for messages sent by a sensor node (M1, M3, M5) and for
RouteFlood, where it is the originating node. Payloads:

    M1          nonce:u64 || ct          ct = E(K, id || V^p)
    M2          nonce:u64 || len_a:u16 || ct_a || ct_commit
                                         ct_a      = E(K, 0 || V^q || ri:u16)
                                         ct_commit = E(K_CS, (V^p)^q)
    M3          ct                       ct = E(K, id || window)
    M4          kcs                      commitment key, in the clear
    M5          seq:u16 || ct            ct = E(K, id || data)
    RouteFlood  hop_count:u8

Group elements are encoded as fixed ``W/8``-byte strings. Every ciphertext is
its plaintext length plus an 8-byte tag. Cipher contexts bind each ciphertext
to ``(node nonce, sink nonce, slot, node id, seq)``; M1 is sealed before the
sink nonce exists and uses zero there. Frames therefore cannot be moved
between sessions or message slots, and a replayed M1 still gets a challenge
sealed under a fresh keystream.

The step functions are pure: ``(state, event) -> StepResult``. Hosts own the
scheduling, the transport and any timers.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Union

from .crypto import (
    TAG_BYTES,
    CommitKey,
    CommitmentEnvelope,
    DecryptError,
    ParameterError,
    ProtocolParams,
    SessionKey,
    SharedSecret,
    commit,
    draw_commit_key,
    draw_exponent,
    draw_nonce,
    draw_ri,
    draw_secret,
    draw_session_key,
    encode_int,
    extract_interval,
    modexp,
    modmul_count,
    open_commitment,
    seal,
    unseal,
)

SINK_ID = 0
MAX_RETRIES = 3


class DecodeError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class Tag(enum.IntEnum):
    M1 = 1
    M2 = 2
    M3 = 3
    M4 = 4
    M5 = 5
    ROUTE_FLOOD = 0x10


# cipher context slots
_SLOT_M1, _SLOT_M2, _SLOT_COMMIT, _SLOT_M3, _SLOT_M5 = 1, 2, 0x2C, 3, 5


def _ctx(nonce: int, sink_nonce: int, slot: int, node_id: int, seq: int = 0) -> bytes:
    return struct.pack(">QQBBH", nonce, sink_nonce, slot, node_id, seq)


# --- messages ------------------------------------------------------------------

@dataclass(frozen=True)
class M1:
    sender_id: int
    nonce: int
    ct: bytes
    tag = Tag.M1


@dataclass(frozen=True)
class M2:
    nonce: int
    ct_a: bytes
    ct_commit: bytes
    tag = Tag.M2

    @property
    def commitment(self) -> CommitmentEnvelope:
        return CommitmentEnvelope(self.ct_commit)


@dataclass(frozen=True)
class M3:
    sender_id: int
    ct: bytes
    tag = Tag.M3


@dataclass(frozen=True)
class M4:
    kcs: bytes
    tag = Tag.M4


@dataclass(frozen=True)
class M5:
    sender_id: int
    seq: int
    ct: bytes
    tag = Tag.M5


@dataclass(frozen=True)
class RouteFlood:
    origin: int
    hop_count: int
    tag = Tag.ROUTE_FLOOD


Message = Union[M1, M2, M3, M4, M5, RouteFlood]

_HAS_SENDER = {Tag.M1, Tag.M3, Tag.M5, Tag.ROUTE_FLOOD}


def _payload(m: Message) -> bytes:
    if isinstance(m, M1):
        return struct.pack(">Q", m.nonce) + m.ct
    if isinstance(m, M2):
        return struct.pack(">QH", m.nonce, len(m.ct_a)) + m.ct_a + m.ct_commit
    if isinstance(m, M3):
        return m.ct
    if isinstance(m, M4):
        return m.kcs
    if isinstance(m, M5):
        return struct.pack(">H", m.seq) + m.ct
    if isinstance(m, RouteFlood):
        return bytes([m.hop_count])
    raise TypeError(f"not a protocol message: {m!r}")


def encode(m: Message) -> bytes:
    payload = _payload(m)
    if len(payload) > 0xFFFF:
        raise ParameterError("payload too long for the 16-bit length field")
    head = bytes([m.tag])
    if m.tag in _HAS_SENDER:
        sender = m.origin if isinstance(m, RouteFlood) else m.sender_id
        head += bytes([sender])
    return head + struct.pack(">H", len(payload)) + payload


def decode(data: bytes) -> Message:
    """Parse one frame. Raises :class:`DecodeError` on any malformation."""
    if len(data) < 1:
        raise DecodeError("empty frame", 0)
    try:
        tag = Tag(data[0])
    except ValueError:
        raise DecodeError(f"unknown tag 0x{data[0]:02x}", 0) from None
    off = 1
    sender = None
    if tag in _HAS_SENDER:
        if len(data) < 2:
            raise DecodeError("truncated sender id", off)
        sender = data[1]
        off = 2
    if len(data) < off + 2:
        raise DecodeError("truncated length field", off)
    (length,) = struct.unpack_from(">H", data, off)
    off += 2
    if len(data) - off != length:
        raise DecodeError(f"declared payload {length} bytes, frame carries {len(data) - off}", off)
    p = bytes(data[off:])

    if tag is Tag.M1:
        if length < 8 + TAG_BYTES:
            raise DecodeError("M1 payload too short", off)
        (nonce,) = struct.unpack_from(">Q", p)
        return M1(sender, nonce, p[8:])
    if tag is Tag.M2:
        if length < 10:
            raise DecodeError("M2 payload too short", off)
        nonce, la = struct.unpack_from(">QH", p)
        if la < TAG_BYTES or length - 10 - la < TAG_BYTES:
            raise DecodeError("M2 ciphertext split out of range", off)
        return M2(nonce, p[10:10 + la], p[10 + la:])
    if tag is Tag.M3:
        if length < TAG_BYTES:
            raise DecodeError("M3 payload too short", off)
        return M3(sender, p)
    if tag is Tag.M4:
        if length == 0:
            raise DecodeError("empty M4 key", off)
        return M4(p)
    if tag is Tag.M5:
        if length < 2 + TAG_BYTES:
            raise DecodeError("M5 payload too short", off)
        (seq,) = struct.unpack_from(">H", p)
        return M5(sender, seq, p[2:])
    if length != 1:
        raise DecodeError("RouteFlood payload must be 1 byte", off)
    return RouteFlood(sender, p[0])


# --- registration --------------------------------------------------------------

@dataclass(frozen=True)
class NodeIdentity:
    """Pre-distributed material of one sensor node; the sink holds a copy."""

    id: int
    session_key: SessionKey
    secret: SharedSecret

    def __post_init__(self):
        if not 1 <= self.id <= 255:
            raise ParameterError(f"node id {self.id} outside 1..255 (0 is the sink)")


def register_nodes(node_ids, params: ProtocolParams, rng: random.Random) -> dict[int, NodeIdentity]:
    """Operator-side registration: draw a key and secret for every node."""
    registry: dict[int, NodeIdentity] = {}
    for nid in node_ids:
        if nid in registry:
            raise ParameterError(f"duplicate node id {nid}")
        registry[nid] = NodeIdentity(nid, draw_session_key(rng, key_id=nid),
                                     draw_secret(rng, params).check(params))
    return registry


# --- events and results --------------------------------------------------------

@dataclass(frozen=True)
class Start:
    data: bytes


@dataclass(frozen=True)
class Incoming:
    message: Message


@dataclass(frozen=True)
class Timeout:
    pass


Event = Union[Start, Incoming, Timeout]


class StepResult(NamedTuple):
    fsm: object
    outgoing: tuple = ()
    delivered: Optional[bytes] = None
    modmuls: int = 0
    audit: tuple = ()


# --- node ----------------------------------------------------------------------

class NodeState(enum.Enum):
    IDLE = "Idle"
    SENT_M1 = "SentM1"
    SENT_M3 = "SentM3"
    AUTHENTICATED = "Authenticated"
    ABORTED = "Aborted"


@dataclass(frozen=True)
class NodeFsm:
    identity: NodeIdentity
    params: ProtocolParams
    state: NodeState = NodeState.IDLE
    nonce: Optional[int] = None
    sink_nonce: Optional[int] = None
    p: Optional[int] = None
    stored_commitment: Optional[CommitmentEnvelope] = None
    received_ri: Optional[int] = None
    received_vq: Optional[int] = None
    response_window: Optional[bytes] = None
    pending_data: bytes = b""
    last_sent: Optional[Message] = None
    retries: int = 0


def _abort(fsm: NodeFsm, why: str) -> StepResult:
    return StepResult(replace(fsm, state=NodeState.ABORTED), audit=(why,))


def node_step(fsm: NodeFsm, event: Event, rng: Optional[random.Random] = None) -> StepResult:
    """Advance a sensor node by one event."""
    ident, params = fsm.identity, fsm.params

    if isinstance(event, Start):
        if rng is None:
            raise ParameterError("starting a session needs an rng")
        nonce, p = draw_nonce(rng), draw_exponent(rng, params)
        vp = modexp(ident.secret.v, p, params)
        ct = seal(ident.session_key, bytes([ident.id]) + encode_int(vp, params.width_bytes),
                  _ctx(nonce, 0, _SLOT_M1, ident.id))
        m1 = M1(ident.id, nonce, ct)
        new = NodeFsm(ident, params, NodeState.SENT_M1, nonce=nonce, p=p,
                      pending_data=bytes(event.data), last_sent=m1)
        return StepResult(new, (m1,), modmuls=modmul_count(p))

    if isinstance(event, Timeout):
        if fsm.state not in (NodeState.SENT_M1, NodeState.SENT_M3):
            return StepResult(fsm)
        if fsm.retries >= MAX_RETRIES:
            return _abort(fsm, "retries exhausted")
        return StepResult(replace(fsm, retries=fsm.retries + 1), (fsm.last_sent,))

    m = event.message
    if isinstance(m, M2) and fsm.state is NodeState.SENT_M1:
        try:
            plain = unseal(ident.session_key, m.ct_a, _ctx(fsm.nonce, m.nonce, _SLOT_M2, ident.id))
        except DecryptError:
            return _abort(fsm, "M2 failed to decrypt")
        wb = params.width_bytes
        if len(plain) != 1 + wb + 2:
            return _abort(fsm, "M2 body has the wrong size")
        if plain[0] != SINK_ID:
            return _abort(fsm, "M2 not from the sink")
        vq = int.from_bytes(plain[1:1 + wb], "big")
        (ri,) = struct.unpack(">H", plain[1 + wb:])
        if vq >= params.modulus:
            return _abort(fsm, "V^q outside the group")
        if ri + params.interval_bits > params.width:
            return _abort(fsm, "RI out of range")
        if len(m.ct_commit) != wb + TAG_BYTES:
            return _abort(fsm, "commitment has the wrong width")
        vqp = modexp(vq, fsm.p, params)
        window = extract_interval(vqp, params.width, ri, params.interval_bits)
        ct = seal(ident.session_key, bytes([ident.id]) + window,
                  _ctx(fsm.nonce, m.nonce, _SLOT_M3, ident.id))
        m3 = M3(ident.id, ct)
        new = replace(fsm, state=NodeState.SENT_M3, sink_nonce=m.nonce, stored_commitment=m.commitment,
                      received_ri=ri, received_vq=vq, response_window=window,
                      last_sent=m3, retries=0)
        return StepResult(new, (m3,), modmuls=modmul_count(fsm.p))

    if isinstance(m, M4) and fsm.state is NodeState.SENT_M3:
        if len(m.kcs) != params.kcs_bits // 8:
            return _abort(fsm, "commit key has the wrong size")
        try:
            committed = open_commitment(CommitKey(m.kcs), fsm.stored_commitment, params,
                                        _ctx(fsm.nonce, fsm.sink_nonce, _SLOT_COMMIT, ident.id))
        except DecryptError:
            return _abort(fsm, "commitment failed to open")
        expected = extract_interval(committed, params.width, fsm.received_ri, params.interval_bits)
        if expected != fsm.response_window:
            return _abort(fsm, "committed window mismatch")
        ct = seal(ident.session_key, bytes([ident.id]) + fsm.pending_data,
                  _ctx(fsm.nonce, fsm.sink_nonce, _SLOT_M5, ident.id, 0))
        m5 = M5(ident.id, 0, ct)
        return StepResult(replace(fsm, state=NodeState.AUTHENTICATED, last_sent=m5), (m5,))

    return StepResult(fsm)


# --- sink ----------------------------------------------------------------------

class SinkState(enum.Enum):
    IDLE = "Idle"
    SENT_M2 = "SentM2"
    AUTHENTICATED = "Authenticated"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class SinkSessionFsm:
    identity: NodeIdentity
    params: ProtocolParams
    state: SinkState = SinkState.IDLE
    nonce: Optional[int] = None
    sink_nonce: Optional[int] = None
    q: Optional[int] = None
    ri: Optional[int] = None
    kcs: Optional[CommitKey] = None
    expected_interval: Optional[bytes] = None
    last_m1: Optional[M1] = None
    last_m3: Optional[M3] = None
    m2: Optional[M2] = None
    m4: Optional[M4] = None
    next_seq: int = 0


def _reject(fsm: SinkSessionFsm, why: str, **changes) -> StepResult:
    return StepResult(replace(fsm, state=SinkState.REJECTED, **changes), audit=(why,))


def sink_step(fsm: SinkSessionFsm, event: Incoming, rng: Optional[random.Random] = None) -> StepResult:
    """Advance the sink's session with one node by one incoming message."""
    ident, params = fsm.identity, fsm.params
    m = event.message

    if isinstance(m, M1):
        # retransmitted M1 while the challenge is outstanding: resend it
        if m == fsm.last_m1 and fsm.state is SinkState.SENT_M2:
            return StepResult(fsm, (fsm.m2,))
        if m == fsm.last_m1 and fsm.state is SinkState.REJECTED:
            return StepResult(fsm)
        if rng is None:
            raise ParameterError("answering M1 needs an rng")
        fresh = SinkSessionFsm(ident, params, nonce=m.nonce, last_m1=m)
        try:
            plain = unseal(ident.session_key, m.ct, _ctx(m.nonce, 0, _SLOT_M1, ident.id))
        except DecryptError:
            return _reject(fresh, "M1 failed to decrypt")
        if len(plain) != 1 + params.width_bytes or plain[0] != ident.id:
            return _reject(fresh, "M1 identity mismatch")
        vp = int.from_bytes(plain[1:], "big")
        if vp >= params.modulus:
            return _reject(fresh, "V^p outside the group")
        q, ri, kcs = draw_exponent(rng, params), draw_ri(rng, params), draw_commit_key(rng, params)
        sn = draw_nonce(rng)
        vq = modexp(ident.secret.v, q, params)
        vpq = modexp(vp, q, params)
        ct_a = seal(ident.session_key,
                    bytes([SINK_ID]) + encode_int(vq, params.width_bytes) + struct.pack(">H", ri),
                    _ctx(m.nonce, sn, _SLOT_M2, ident.id))
        envelope = commit(kcs, vpq, params, _ctx(m.nonce, sn, _SLOT_COMMIT, ident.id))
        m2 = M2(sn, ct_a, envelope.ciphertext)
        new = replace(fresh, state=SinkState.SENT_M2, sink_nonce=sn, q=q, ri=ri, kcs=kcs, m2=m2,
                      expected_interval=extract_interval(vpq, params.width, ri, params.interval_bits))
        return StepResult(new, (m2,), modmuls=2 * modmul_count(q))

    if isinstance(m, M3):
        if fsm.state is SinkState.AUTHENTICATED and m == fsm.last_m3:
            return StepResult(fsm, (fsm.m4,))
        if fsm.state is not SinkState.SENT_M2:
            return StepResult(fsm)
        try:
            plain = unseal(ident.session_key, m.ct, _ctx(fsm.nonce, fsm.sink_nonce, _SLOT_M3, ident.id))
        except DecryptError:
            return _reject(fsm, "M3 failed to decrypt", last_m3=m)
        if len(plain) != 1 + params.interval_bytes or plain[0] != ident.id:
            return _reject(fsm, "M3 identity mismatch", last_m3=m)
        if plain[1:] != fsm.expected_interval:
            return _reject(fsm, "interval mismatch", last_m3=m)
        m4 = M4(fsm.kcs.key)
        return StepResult(replace(fsm, state=SinkState.AUTHENTICATED, last_m3=m, m4=m4), (m4,))

    if isinstance(m, M5):
        if fsm.state is not SinkState.AUTHENTICATED:
            return StepResult(fsm, audit=("data from unauthenticated node dropped",))
        if m.seq != fsm.next_seq:
            return StepResult(fsm, audit=("stale data sequence dropped",))
        try:
            plain = unseal(ident.session_key, m.ct,
                           _ctx(fsm.nonce, fsm.sink_nonce, _SLOT_M5, ident.id, m.seq))
        except DecryptError:
            return _reject(fsm, "M5 failed to decrypt")
        if not plain or plain[0] != ident.id:
            return _reject(fsm, "M5 identity mismatch")
        return StepResult(replace(fsm, next_seq=fsm.next_seq + 1), delivered=plain[1:])

    return StepResult(fsm)


@dataclass
class Sink:
    """Host-side container dispatching frames to per-node session machines."""

    registry: dict
    params: ProtocolParams
    sessions: dict = field(default_factory=dict)

    def session(self, node_id: int) -> SinkSessionFsm:
        if node_id not in self.sessions:
            self.sessions[node_id] = SinkSessionFsm(self.registry[node_id], self.params)
        return self.sessions[node_id]

    def receive(self, message: Message, rng: random.Random) -> tuple[Optional[int], StepResult]:
        """Returns the node id the message was attributed to and the step result.

        Frames from unregistered or unknown senders produce ``(None, result)``
        with an audit entry and no state change.
        """
        sender = getattr(message, "sender_id", None)
        if sender is None:
            return None, StepResult(None, audit=(f"{type(message).__name__} is not sink-bound",))
        if sender not in self.registry:
            return None, StepResult(None, audit=(f"unregistered sender {sender} dropped",))
        result = sink_step(self.session(sender), Incoming(message), rng)
        self.sessions[sender] = result.fsm
        return sender, result
