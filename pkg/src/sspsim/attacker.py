"""Man-in-the-middle adversary.

The attack runs in four steps: jam the victims' piconet by hopping along with
it, impersonate each victim towards the other, intercept what they send and
relay it.  The attacker is an ordinary protocol participant with its own key
pairs; it only wins where the pairing protocol lets it.  Claiming
NoInputNoOutput during the IO-capability exchange (``spoofed_io``) downgrades
two capable victims to Just Works.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Optional

from . import crypto
from .oob import OobChannelConfig, OobExchange, OobPayload, make_oob_payload
from .protocol import (
    Confirm,
    DeviceConfig,
    IoCapability,
    IoCapabilityExchange,
    PairingMessage,
    PairingSession,
    PasskeyInput,
    PromptKind,
    PublicKeyX,
    Role,
    SecurityPolicy,
    State,
    start_pairing,
)
from .radio import DeliveryEvent, HopSequence, Jammer
from .sim import AppData, Endpoint, Link, SessionOwner, World

ATTACKER_ADDRESS = 0xE0E0E0E0E0E0


class CapabilityMissing(Exception):
    pass


@dataclass(frozen=True)
class AttackerConfig:
    can_jam: bool = True
    can_impersonate: bool = True
    can_relay: bool = True
    knows_hop_seed: bool = True
    spoofed_io: Optional[IoCapability] = None
    # IO capability claimed when not spoofing; None copies the impersonated victim.
    io: Optional[IoCapability] = None
    oob_access: Optional[OobChannelConfig] = None
    modify_relay: Optional[bytes] = None
    address: int = ATTACKER_ADDRESS

    @property
    def full_attack(self) -> bool:
        return self.can_jam and self.can_impersonate and self.can_relay

    @classmethod
    def preset(cls, name: str) -> Optional["AttackerConfig"]:
        if name == "none":
            return None
        if name == "full":
            return cls()
        if name == "downgrade":
            return cls(spoofed_io=IoCapability.NO_INPUT_NO_OUTPUT)
        if name == "jam-only":
            return cls(can_impersonate=False, can_relay=False)
        raise ValueError(f"unknown attacker preset {name!r}")


ATTACKER_PRESETS = ("full", "downgrade", "jam-only", "none")


@dataclass(frozen=True)
class InterceptRecord:
    slot: int
    direction: str
    plaintext: bytes
    modified: bool

    def to_line(self) -> str:
        return f"{self.slot},{self.direction},{self.plaintext.hex()},{int(self.modified)}"


INTERCEPT_LOG_HEADER = "slot,direction,plaintext_hex,modified"


class AttackStatus(enum.Enum):
    SUCCESS = "Success"
    PARTIAL_FAILURE = "PartialFailure"
    FAILURE = "Failure"


@dataclass(frozen=True)
class AttackerOutcome:
    status: AttackStatus
    captured_keys: int


@dataclass
class AttackerState:
    session_with_a: Optional[PairingSession] = None
    session_with_b: Optional[PairingSession] = None
    captured_link_keys: dict = field(default_factory=dict)
    intercept_log: list = field(default_factory=list)
    tapped: list = field(default_factory=list)
    relay_queue: list = field(default_factory=list)


class _JamHook:
    def __init__(self, jammer: Jammer, link: Link) -> None:
        self.jammer = jammer
        self.link = link
        self.active = True

    def on_slot(self, world: World, slot: int) -> None:
        self.jammer.jam(self.link.net)


class Attacker(SessionOwner):
    name = "mitm"

    def __init__(self, config: AttackerConfig, rng: random.Random, quiet_slots: int = 8) -> None:
        self.config = config
        self.rng = rng
        self.state = AttackerState()
        self.quiet_slots = quiet_slots
        self._jam: Optional[_JamHook] = None
        self._last_heard = 0
        self._ends: dict = {}  # victim label -> Endpoint
        self._targets: dict = {}  # victim label -> DeviceConfig
        self._guessing: set = set()
        self._pending: list = []

    @property
    def busy(self) -> bool:
        return bool(self._pending)

    @property
    def jamming(self) -> bool:
        return self._jam is not None and self._jam.active

    # -- step 1: jam

    def jam_phase(self, world: World, link: Link, seq: Optional[HopSequence] = None) -> None:
        """Start jamming ``link``; stops once the victims have gone quiet."""
        if not self.config.can_jam:
            raise CapabilityMissing("attacker cannot jam")
        if seq is None:
            if not self.config.knows_hop_seed:
                raise CapabilityMissing("attacker does not know the victims' hop sequence")
            seq = link.seq
        jammer = Jammer(self.config.address, seq, noise=lambda: crypto.random_bytes(self.rng, 8))
        self._jam = _JamHook(jammer, link)
        self._last_heard = world.slot
        link.net.add_tap(self._tap)
        world.hooks.append(self._jam)
        world.record("jam_start", actor=self.name, link=link.name)

    def _tap(self, event: DeliveryEvent) -> None:
        if event.frame.is_noise:
            return
        self.state.tapped.append(event)
        self._last_heard = event.slot

    def stop_jamming(self, world: World) -> None:
        if self.jamming:
            self._jam.active = False
            world.record("jam_stop", actor=self.name)

    # -- step 2: impersonate

    def impersonate(
        self, world: World, link: Link, label: str, target: DeviceConfig, victim_to_mimic: DeviceConfig, role: Role
    ) -> PairingSession:
        """Open a session towards ``target`` posing as ``victim_to_mimic``."""
        if not self.config.can_impersonate:
            raise CapabilityMissing("attacker cannot impersonate")
        io = self.config.spoofed_io or self.config.io or victim_to_mimic.io
        posed = DeviceConfig(
            address=victim_to_mimic.address,
            io=io,
            oob_available=victim_to_mimic.oob_available,
            policy=SecurityPolicy(),
        )
        session, out = start_pairing(posed, role, self.rng, peer_address=target.address)
        end = link.connect(
            self.config.address, victim_to_mimic.address, target.address, role is Role.INITIATOR, self
        )
        self._ends[label] = end
        self._targets[label] = target
        if label == "a":
            self.state.session_with_a = session
        else:
            self.state.session_with_b = session
        world.record(
            "impersonate", actor=self.name, target=label, claimed=f"{victim_to_mimic.address:012x}",
            io=io.name, role=role.value, public_key=crypto.point_to_bytes(session.public_key),
        )
        self._emit(world, end, session, out, [])
        return session

    def session_for(self, label: str) -> Optional[PairingSession]:
        return self.state.session_with_a if label == "a" else self.state.session_with_b

    def _label_of(self, endpoint: Endpoint) -> Optional[str]:
        for label, end in self._ends.items():
            if end is endpoint:
                return label
        return None

    # -- out-of-band interference

    def forge_oob(self, target: DeviceConfig, claimed_sender: int, freq_id: int) -> OobPayload:
        label = next(lbl for lbl, cfg in self._targets.items() if cfg.address == target.address)
        session = self.session_for(label)
        return make_oob_payload(claimed_sender, session.public_key, session.oob_r_own, freq_id)

    def learn_oob(self, world: World, exchange: OobExchange) -> None:
        if exchange.attacker_view is None:
            world.record("oob_blind", actor=self.name, freq_id=exchange.freq_id)
            return
        from_a, from_b = exchange.attacker_view
        world.record("oob_intercepted", actor=self.name, freq_id=exchange.freq_id)
        for label, payload in (("a", from_a), ("b", from_b)):
            session = self.session_for(label)
            if session is not None:
                session.oob_peer = payload

    def _oob_guess(self, label: str, session: PairingSession, msg: PairingMessage) -> None:
        # Without the victim's OOB data the attacker invents some, committing
        # to whatever key arrives in-band; its r is a blind guess.
        if not session.config.oob_available:
            return
        if session.oob_peer is None:
            self._guessing.add(label)
        if label not in self._guessing:
            return
        point = msg.point if isinstance(msg, PublicKeyX) else session.public_key
        session.oob_peer = make_oob_payload(
            session.peer_address, point, crypto.random_bytes(self.rng), 0
        )

    # -- protocol traffic

    def on_payload(self, world: World, endpoint: Endpoint, payload) -> None:
        label = self._label_of(endpoint)
        if label is None:
            return
        session = self.session_for(label)
        if isinstance(payload, PairingMessage):
            if isinstance(payload, (IoCapabilityExchange, PublicKeyX)):
                self._oob_guess(label, session, payload)
            self.feed(world, endpoint, session, msg=payload)
        elif isinstance(payload, AppData):
            self._relay_from(world, label, payload)

    def on_prompt(self, world, endpoint, session, prompt) -> None:
        if prompt.kind is PromptKind.CONFIRM_VALUE:
            self._pending.append((endpoint, session, Confirm(True)))
        elif prompt.kind is PromptKind.ENTER_PASSKEY:
            self._pending.append((endpoint, session, PasskeyInput(self.rng.randrange(1_000_000))))

    def on_encrypted(self, world, endpoint, session) -> None:
        label = self._label_of(endpoint)
        self.state.captured_link_keys[label] = session.link_key
        world.record("key_captured", actor=self.name, victim_label=label, link_key=session.link_key)
        if len(self.state.captured_link_keys) == 2:
            world.record("keys_captured", actor=self.name, count=2)
            queued, self.state.relay_queue = self.state.relay_queue, []
            for src, item in queued:
                self._relay_from(world, src, item)

    # -- steps 3 and 4: intercept and relay

    def relay(self, sealed: bytes, direction: str, slot: int = 0) -> bytes:
        """Unseal with the source victim's key, log, optionally tamper, reseal."""
        src, dst = direction.split("->")
        keys = self.state.captured_link_keys
        if src not in keys or dst not in keys:
            raise crypto.UnsealFailure("link keys not captured")
        plaintext = self.session_for(src).unseal(sealed)
        modified = self.config.modify_relay is not None
        self.state.intercept_log.append(InterceptRecord(slot, direction, plaintext, modified))
        if modified:
            plaintext = self.config.modify_relay
        return self.session_for(dst).seal(plaintext)

    def _relay_from(self, world: World, src: str, payload: AppData) -> None:
        dst = "b" if src == "a" else "a"
        if not self.config.can_relay:
            world.record("relay_dropped", actor=self.name, direction=f"{src}->{dst}")
            return
        if len(self.state.captured_link_keys) < 2:
            self.state.relay_queue.append((src, payload))
            return
        try:
            blob = self.relay(payload.blob, f"{src}->{dst}", world.slot)
        except crypto.UnsealFailure as exc:
            world.record("relay_failed", actor=self.name, error=str(exc))
            return
        record = self.state.intercept_log[-1]
        self._ends[dst].send(AppData(blob))
        world.record(
            "relay", actor=self.name, direction=record.direction, plaintext=record.plaintext,
            modified=record.modified,
        )

    # -- driving

    def after_slot(self, world: World) -> None:
        pending, self._pending = self._pending, []
        for endpoint, session, decision in pending:
            if not session.terminal:
                self.feed(world, endpoint, session, decision=decision)
        for label, end in self._ends.items():
            self.supervise(world, end, self.session_for(label))
        if self.jamming and world.slot - self._last_heard > self.quiet_slots:
            self.stop_jamming(world)

    def run_inner_pairings(self, world: World) -> AttackerOutcome:
        """Drive both impersonation sessions until each finishes or aborts."""
        sessions = [self.state.session_with_a, self.state.session_with_b]

        def settled() -> bool:
            return all(s is not None and s.state in (State.ENCRYPTED, State.ABORTED) for s in sessions)

        world.run_until(settled)
        keys = sum(1 for s in sessions if s is not None and s.state is State.ENCRYPTED)
        status = {2: AttackStatus.SUCCESS, 1: AttackStatus.PARTIAL_FAILURE}.get(keys, AttackStatus.FAILURE)
        world.record("inner_pairings", actor=self.name, status=status.value, keys=keys)
        return AttackerOutcome(status, keys)

    def export_intercept_log(self) -> str:
        return "\n".join([INTERCEPT_LOG_HEADER] + [r.to_line() for r in self.state.intercept_log]) + "\n"
