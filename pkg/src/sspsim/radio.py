"""Lock-step frequency-hopping channel.

Time advances in abstract slots.  Every radio follows a :class:`HopSequence`
and listens on ``hop_channel(seq, slot)``.  A frame reaches a radio only when
it is alone on its (channel, slot); two or more frames on the same channel in
the same slot destroy each other.  Noise frames are never delivered.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable

NUM_CHANNELS = 79


@dataclass(frozen=True)
class HopSequence:
    seed: int

    @classmethod
    def for_master(cls, address: int, clock_offset: int) -> "HopSequence":
        digest = hashlib.blake2b(
            address.to_bytes(6, "big") + clock_offset.to_bytes(8, "big"), digest_size=8
        ).digest()
        return cls(int.from_bytes(digest, "big"))


def hop_channel(seq: HopSequence, slot: int) -> int:
    """Channel in [0, 78] used by ``seq`` at ``slot``; keyed PRF, not the Bluetooth kernel."""
    digest = hashlib.blake2b(
        slot.to_bytes(8, "big"), key=seq.seed.to_bytes(8, "big"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") % NUM_CHANNELS


class DeliveryOutcome(enum.Enum):
    DELIVERED = "DELIVERED"
    COLLIDED = "COLLIDED"
    JAMMED = "JAMMED"


@dataclass(frozen=True)
class RadioFrame:
    sender: int
    claimed_sender: int
    slot: int
    channel: int
    payload: Any
    is_noise: bool = False

    @property
    def payload_tag(self) -> str:
        if self.is_noise:
            return "Noise"
        return getattr(self.payload, "NAME", type(self.payload).__name__)


@dataclass(frozen=True)
class DeliveryEvent:
    slot: int
    channel: int
    frame: RadioFrame
    outcome: DeliveryOutcome
    receivers: tuple = ()

    def to_line(self) -> str:
        f = self.frame
        return (
            f"{self.slot},{self.channel},{f.sender:012x},{f.claimed_sender:012x},"
            f"{self.outcome.value},{f.payload_tag}"
        )


DELIVERY_LOG_HEADER = "slot,channel,sender,claimed_sender,outcome,payload_tag"


class WrongSlot(Exception):
    pass


@dataclass
class Piconet:
    """Radios sharing a hop sequence, plus observers that see every frame."""

    name: str = "piconet"
    slot: int = 0
    members: dict = field(default_factory=dict)
    pending: list = field(default_factory=list)
    taps: list = field(default_factory=list)
    log: list = field(default_factory=list)

    def attach(self, address: int, seq: HopSequence) -> None:
        self.members[address] = seq

    def detach(self, address: int) -> None:
        self.members.pop(address, None)

    def add_tap(self, observer: Callable[[DeliveryEvent], None]) -> None:
        self.taps.append(observer)

    def transmit(self, frame: RadioFrame) -> None:
        if frame.slot != self.slot:
            raise WrongSlot(f"frame for slot {frame.slot} queued during slot {self.slot}")
        if not 0 <= frame.channel < NUM_CHANNELS:
            raise ValueError(f"channel {frame.channel} out of range")
        self.pending.append(frame)

    def resolve_slot(self) -> list:
        """Decide the fate of every queued frame and advance the slot."""
        by_channel: dict[int, list] = {}
        for frame in self.pending:
            by_channel.setdefault(frame.channel, []).append(frame)
        listening = None
        events = []
        for channel in sorted(by_channel):
            frames = sorted(by_channel[channel], key=lambda f: (f.sender, f.is_noise))
            jammed = any(f.is_noise for f in frames)
            for frame in frames:
                if frame.is_noise:
                    outcome, receivers = DeliveryOutcome.JAMMED, ()
                elif len(frames) > 1:
                    outcome = DeliveryOutcome.JAMMED if jammed else DeliveryOutcome.COLLIDED
                    receivers = ()
                else:
                    if listening is None:
                        listening = {
                            addr: hop_channel(seq, self.slot) for addr, seq in self.members.items()
                        }
                    receivers = tuple(
                        sorted(a for a, ch in listening.items() if ch == channel and a != frame.sender)
                    )
                    outcome = DeliveryOutcome.DELIVERED
                events.append(DeliveryEvent(self.slot, channel, frame, outcome, receivers))
        self.pending = []
        self.slot += 1
        self.log.extend(events)
        for event in events:
            for tap in self.taps:
                tap(event)
        return events

    def export_log(self) -> str:
        return "\n".join([DELIVERY_LOG_HEADER] + [e.to_line() for e in self.log]) + "\n"


@dataclass
class Jammer:
    """Sends a noise frame on the channel ``seq`` predicts for each slot."""

    address: int
    seq: HopSequence
    noise: Callable[[], bytes] = lambda: b"\x00" * 8

    def jam(self, net: Piconet) -> RadioFrame:
        frame = RadioFrame(
            sender=self.address,
            claimed_sender=self.address,
            slot=net.slot,
            channel=hop_channel(self.seq, net.slot),
            payload=self.noise(),
            is_noise=True,
        )
        net.transmit(frame)
        return frame


def jamming_trial(victim_seq: HopSequence, jammer_seq: HopSequence, slots: int, *, start_slot: int = 0) -> int:
    """Count victim frames delivered while a jammer hops along ``jammer_seq``.

    One victim transmits in every slot and the other listens; with the right
    sequence nothing gets through, with a wrong one only slots where the two
    sequences happen to share a channel are lost.
    """
    net = Piconet(name="jam-trial", slot=start_slot)
    tx, rx = 0xA, 0xB
    net.attach(tx, victim_seq)
    net.attach(rx, victim_seq)
    jammer = Jammer(0xE, jammer_seq)
    delivered = 0
    for _ in range(slots):
        slot = net.slot
        net.transmit(RadioFrame(tx, tx, slot, hop_channel(victim_seq, slot), b"data"))
        jammer.jam(net)
        for event in net.resolve_slot():
            if event.outcome is DeliveryOutcome.DELIVERED and rx in event.receivers:
                delivered += 1
    return delivered
