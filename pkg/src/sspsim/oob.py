"""Out-of-band side channel (a stand-in for NFC).

The exchange is atomic and loss-free.  By default the attacker can neither
read nor modify it; the two flags on :class:`OobChannelConfig` exist to test
that assumption.  Each exchange is stamped with a frequency id drawn from a
:class:`FrequencySchedule`; the varying schedule is a keyed permutation of the
session counter, so ids never repeat within 2**16 sessions.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import crypto
from .p256 import Point
from .protocol import DeviceConfig

FREQ_ID_BITS = 16


class OobUnavailable(Exception):
    pass


@dataclass
class OobPayload:
    sender_address: int
    r: bytes
    c: bytes
    freq_id: int
    # Set once an attacker has seen this payload.
    observed: bool = field(default=False, compare=False)

    def to_bytes(self) -> bytes:
        return self.sender_address.to_bytes(6, "big") + self.r + self.c + struct.pack(">H", self.freq_id)

    @classmethod
    def from_bytes(cls, data: bytes) -> "OobPayload":
        if len(data) != 40:
            raise ValueError(f"OOB payload is 40 bytes, got {len(data)}")
        return cls(int.from_bytes(data[:6], "big"), data[6:22], data[22:38], struct.unpack(">H", data[38:])[0])


def make_oob_payload(address: int, public_point: Point, r: bytes, freq_id: int) -> OobPayload:
    c = crypto.f1_commit(public_point, public_point, crypto.ZERO_16, r)
    return OobPayload(address, r, c, freq_id)


@dataclass(frozen=True)
class FrequencySchedule:
    mode: str
    value: int

    @classmethod
    def fixed(cls, freq_id: int) -> "FrequencySchedule":
        if not 0 <= freq_id < 1 << FREQ_ID_BITS:
            raise ValueError("frequency id must fit in 16 bits")
        return cls("fixed", freq_id)

    @classmethod
    def varying(cls, seed: int) -> "FrequencySchedule":
        return cls("varying", seed)

    def __str__(self) -> str:
        return f"{self.mode}:{self.value}"


@dataclass(frozen=True)
class OobChannelConfig:
    attacker_can_read: bool = False
    attacker_can_modify: bool = False
    frequency_schedule: FrequencySchedule = FrequencySchedule.fixed(0)


def _feistel16(key: bytes, x: int) -> int:
    left, right = x >> 8, x & 0xFF
    for rnd in range(4):
        f = hashlib.blake2b(bytes([rnd, right]), key=key, digest_size=1).digest()[0]
        left, right = right, left ^ f
    return (left << 8) | right


def next_oob_frequency(sched: FrequencySchedule, counter: int) -> int:
    if sched.mode == "fixed":
        return sched.value
    epoch, index = divmod(counter, 1 << FREQ_ID_BITS)
    key = (sched.value % (1 << 64)).to_bytes(8, "big") + epoch.to_bytes(8, "big")
    return _feistel16(key, index)


def attacker_oob_intercept_possible(cfg: OobChannelConfig, attacker_known_freqs, counter: int) -> bool:
    if not cfg.attacker_can_read:
        return False
    return next_oob_frequency(cfg.frequency_schedule, counter) in attacker_known_freqs


@dataclass
class OobExchange:
    payload_for_a: OobPayload
    payload_for_b: OobPayload
    freq_id: int
    attacker_view: Optional[tuple] = None
    forged: bool = False


# forger(target, claimed_sender, freq_id) -> payload handed to target
Forger = Callable[[DeviceConfig, int, int], OobPayload]


def exchange_oob(
    a: DeviceConfig,
    b: DeviceConfig,
    cfg: OobChannelConfig,
    counter: int,
    *,
    pk_a: Point,
    pk_b: Point,
    r_a: bytes,
    r_b: bytes,
    forger: Optional[Forger] = None,
    attacker_known_freqs: Optional[set] = None,
) -> OobExchange:
    """Hand each device its peer's (address, r, C).

    ``attacker_known_freqs`` of ``None`` means the attacker listens on every
    frequency; otherwise it only reaches exchanges whose id it knows.
    """
    for dev in (a, b):
        if not dev.oob_available:
            raise OobUnavailable(f"device {dev.address:012x} has no OOB interface")
    freq = next_oob_frequency(cfg.frequency_schedule, counter)
    from_a = make_oob_payload(a.address, pk_a, r_a, freq)
    from_b = make_oob_payload(b.address, pk_b, r_b, freq)
    reachable = attacker_known_freqs is None or freq in attacker_known_freqs
    result = OobExchange(payload_for_a=from_b, payload_for_b=from_a, freq_id=freq)
    if cfg.attacker_can_read and reachable:
        from_a.observed = from_b.observed = True
        result.attacker_view = (from_a, from_b)
    if cfg.attacker_can_modify and reachable and forger is not None:
        result.payload_for_a = forger(a, b.address, freq)
        result.payload_for_b = forger(b, a.address, freq)
        result.forged = True
    return result
