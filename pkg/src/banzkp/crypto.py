"""Arithmetic and symmetric primitives used by the handshake.

Everything here is a pure function of its arguments. Randomness comes from an
explicit :class:`random.Random` handle supplied by the caller, so two runs fed
the same seed produce identical values.

The cipher is a small authenticated construction (SHAKE-256 keystream plus a
truncated HMAC-SHA256 tag). It honours the contract the protocol depends on
(roundtrip, wrong-key and tamper rejection) and nothing more; it is not meant
to protect real data.
"""

from __future__ import annotations

import functools
import hashlib
import hmac
import random
from dataclasses import dataclass
from typing import Union

import gmpy2

SESSION_KEY_BYTES = 16
TAG_BYTES = 8
NONCE_BYTES = 8
MIN_MODULUS_BITS = 1096


class ParameterError(ValueError):
    """Invalid protocol parameter or operand."""


class IntervalError(ValueError):
    """Requested bit window does not fit inside the encoded value."""


class DecryptError(Exception):
    """Authentication tag mismatch; the plaintext is never returned."""


@dataclass(frozen=True)
class ProtocolParams:
    """Public group modulus and field widths shared by every party.

    Parameters
    ----------
    modulus : int
        Odd, full-width public modulus. Its bit length ``W`` fixes the
        encoding width of every group element on the wire.
    exponent_bits : int
        Random exponents are drawn from ``[2, 2**exponent_bits)``.
    interval_bits : int
        Width of the revealed window of the shared value.
    kcs_bits : int
        Width of the per-session commitment key.
    """

    modulus: int
    exponent_bits: int = 160
    interval_bits: int = 200
    kcs_bits: int = 200

    def __post_init__(self):
        w = self.modulus.bit_length()
        if w < MIN_MODULUS_BITS:
            raise ParameterError(f"modulus width {w} < {MIN_MODULUS_BITS} bits")
        if w % 8:
            raise ParameterError(f"modulus width {w} is not a whole number of bytes")
        if self.modulus % 2 == 0:
            raise ParameterError("modulus must be odd")
        if self.exponent_bits < 2:
            raise ParameterError("exponent_bits must be >= 2")
        if not 0 < self.interval_bits <= w:
            raise ParameterError("interval_bits must lie in (0, W]")
        if w - self.interval_bits > 0xFFFF:
            raise ParameterError("interval start does not fit the 16-bit RI field")
        if self.kcs_bits <= 0 or self.kcs_bits % 8:
            raise ParameterError("kcs_bits must be a positive multiple of 8")

    @property
    def width(self) -> int:
        return self.modulus.bit_length()

    @property
    def width_bytes(self) -> int:
        return self.width // 8

    @property
    def interval_bytes(self) -> int:
        return (self.interval_bits + 7) // 8

    @property
    def exponent_bytes(self) -> int:
        return (self.exponent_bits + 7) // 8

    @classmethod
    def generate(cls, width: int = 2048, **kwargs) -> "ProtocolParams":
        """Parameters over a deterministic ``width``-bit prime modulus."""
        return cls(modulus=public_modulus(width), **kwargs)


@functools.lru_cache(maxsize=None)
def public_modulus(width: int) -> int:
    """Nothing-up-my-sleeve prime of exactly ``width`` bits.

    Derived from SHAKE-256 of a fixed label, top bit forced on and the next
    bit forced off so the following prime cannot spill past ``width`` bits.
    """
    if width < 16 or width % 8:
        raise ParameterError(f"unsupported modulus width {width}")
    seed = hashlib.shake_256(b"banzkp/modulus/%d" % width).digest(width // 8)
    x = int.from_bytes(seed, "big")
    x |= 1 << (width - 1)
    x &= ~(1 << (width - 2))
    return int(gmpy2.next_prime(x))


@dataclass(frozen=True)
class SharedSecret:
    """Per-node secret base shared with the sink."""

    v: int

    def __post_init__(self):
        if self.v < 2:
            raise ParameterError("shared secret must be >= 2")

    def check(self, params: ProtocolParams) -> "SharedSecret":
        if self.v >= params.modulus:
            raise ParameterError("shared secret must be < modulus")
        return self


@dataclass(frozen=True)
class SessionKey:
    key: bytes
    key_id: int = 0

    def __post_init__(self):
        if len(self.key) != SESSION_KEY_BYTES:
            raise ParameterError(f"session key must be {SESSION_KEY_BYTES} bytes")


@dataclass(frozen=True)
class CommitKey:
    key: bytes

    def check(self, params: ProtocolParams) -> "CommitKey":
        if len(self.key) != params.kcs_bits // 8:
            raise ParameterError(f"commit key must be {params.kcs_bits // 8} bytes")
        return self


@dataclass(frozen=True)
class CommitmentEnvelope:
    """Sealed fixed-width encoding of the sink's shared value."""

    ciphertext: bytes

    @property
    def width(self) -> int:
        return (len(self.ciphertext) - TAG_BYTES) * 8


KeyLike = Union[SessionKey, CommitKey, bytes]


# --- arithmetic ---------------------------------------------------------------

def _modulus_of(modulus: Union[int, ProtocolParams]) -> int:
    return modulus.modulus if isinstance(modulus, ProtocolParams) else int(modulus)


def modexp(base: int, exponent: int, modulus: Union[int, ProtocolParams]) -> int:
    """``base ** exponent mod modulus`` for ``0 <= base < modulus``, ``exponent >= 1``."""
    m = _modulus_of(modulus)
    if m < 2:
        raise ParameterError("modulus must be >= 2")
    if exponent < 1:
        raise ParameterError("exponent must be >= 1")
    if not 0 <= base < m:
        raise ParameterError("base must lie in [0, modulus)")
    return int(gmpy2.powmod(base, exponent, m))


def modmul_count(exponent: int) -> int:
    """Modular multiplications used by left-to-right square-and-multiply."""
    if exponent < 1:
        raise ParameterError("exponent must be >= 1")
    return exponent.bit_length() - 1 + bin(exponent).count("1") - 1


def encode_int(value: int, width_bytes: int) -> bytes:
    return value.to_bytes(width_bytes, "big")


def extract_interval(value: int, width: int, start: int, length: int) -> bytes:
    """Return ``length`` bits of the MSB-first ``width``-bit encoding of ``value``.

    The window begins at bit index ``start`` (0 is the most significant bit)
    and is packed MSB-first into ``ceil(length / 8)`` bytes, zero padded.
    """
    if width <= 0 or length < 0 or start < 0:
        raise IntervalError("width must be positive, start and length non-negative")
    if start + length > width:
        raise IntervalError(f"window [{start}, {start + length}) exceeds width {width}")
    if not 0 <= value < (1 << width):
        raise IntervalError("value does not fit in width bits")
    window = (value >> (width - start - length)) & ((1 << length) - 1)
    nbytes = (length + 7) // 8
    return (window << (nbytes * 8 - length)).to_bytes(nbytes, "big")


# --- authenticated cipher ------------------------------------------------------

def _raw_key(key: KeyLike) -> bytes:
    raw = key if isinstance(key, (bytes, bytearray)) else key.key
    if not raw:
        raise ParameterError("empty key")
    return bytes(raw)


def _keystream(key: bytes, context: bytes, n: int) -> bytes:
    h = hashlib.shake_256(b"banzkp/ks")
    h.update(len(key).to_bytes(2, "big") + key)
    h.update(len(context).to_bytes(2, "big") + context)
    return h.digest(n)


def _tag(key: bytes, context: bytes, body: bytes) -> bytes:
    msg = b"banzkp/tag" + len(context).to_bytes(2, "big") + context + body
    return hmac.new(key, msg, hashlib.sha256).digest()[:TAG_BYTES]


def seal(key: KeyLike, plaintext: bytes, context: bytes) -> bytes:
    """Encrypt and tag ``plaintext``; output is ``len(plaintext) + TAG_BYTES`` long.

    ``context`` binds the ciphertext to one session and message slot. Reusing
    a (key, context) pair for different plaintexts reuses the keystream.
    """
    k = _raw_key(key)
    body = bytes(a ^ b for a, b in zip(plaintext, _keystream(k, context, len(plaintext))))
    return body + _tag(k, context, body)


def unseal(key: KeyLike, ciphertext: bytes, context: bytes) -> bytes:
    """Inverse of :func:`seal`. Raises :class:`DecryptError` on any mismatch."""
    k = _raw_key(key)
    if len(ciphertext) < TAG_BYTES:
        raise DecryptError("ciphertext shorter than tag")
    body, tag = ciphertext[:-TAG_BYTES], ciphertext[-TAG_BYTES:]
    if not hmac.compare_digest(tag, _tag(k, context, body)):
        raise DecryptError("authentication tag mismatch")
    return bytes(a ^ b for a, b in zip(body, _keystream(k, context, len(body))))


def commit(kcs: CommitKey, value: int, params: ProtocolParams, context: bytes) -> CommitmentEnvelope:
    return CommitmentEnvelope(seal(kcs, encode_int(value, params.width_bytes), context))


def open_commitment(kcs: CommitKey, envelope: CommitmentEnvelope, params: ProtocolParams,
                    context: bytes) -> int:
    plain = unseal(kcs, envelope.ciphertext, context)
    if len(plain) != params.width_bytes:
        raise DecryptError("committed value has the wrong width")
    return int.from_bytes(plain, "big")


# --- seeded draws --------------------------------------------------------------

def draw_exponent(rng: random.Random, params: ProtocolParams) -> int:
    return rng.randrange(2, 1 << params.exponent_bits)


def draw_ri(rng: random.Random, params: ProtocolParams) -> int:
    return rng.randrange(0, params.width - params.interval_bits + 1)


def draw_commit_key(rng: random.Random, params: ProtocolParams) -> CommitKey:
    return CommitKey(rng.getrandbits(params.kcs_bits).to_bytes(params.kcs_bits // 8, "big"))


def draw_nonce(rng: random.Random) -> int:
    return rng.getrandbits(NONCE_BYTES * 8)


def draw_session_key(rng: random.Random, key_id: int = 0) -> SessionKey:
    return SessionKey(rng.getrandbits(SESSION_KEY_BYTES * 8).to_bytes(SESSION_KEY_BYTES, "big"), key_id)


def draw_secret(rng: random.Random, params: ProtocolParams) -> SharedSecret:
    return SharedSecret(rng.randrange(2, params.modulus))


def derive_rng(rng: random.Random, label: str) -> random.Random:
    """Child generator seeded from the parent stream and a label."""
    return random.Random(f"{rng.getrandbits(64)}:{label}")
