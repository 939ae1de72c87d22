"""Lock-step simulation world shared by honest devices and the attacker.

A :class:`Link` is a point-to-point connection on its own :class:`Piconet`.
The master end transmits in even slots and the slave end in odd slots, one
frame per slot, and retransmits the head of its queue until it is delivered
(an idealised baseband ACK).  A session that sees no link activity for
``supervision_timeout`` slots aborts with ``LINK_LOSS``.
"""

from __future__ import annotations

import enum
import json
import random
import struct
from collections import deque
from dataclasses import dataclass
from typing import Any, ClassVar, Optional

from . import crypto
from .protocol import (
    AbortReason,
    AssociationModel,
    Confirm,
    DeviceConfig,
    PairingMessage,
    PairingSession,
    PasskeyInput,
    PromptKind,
    Role,
    State,
    UserPromptRequest,
    enable_encryption,
    start_pairing,
    step,
)
from .radio import DeliveryOutcome, HopSequence, Piconet, RadioFrame, hop_channel


@dataclass(frozen=True)
class AppData:
    """Sealed application bytes carried after encryption is on."""

    TAG: ClassVar[int] = 0x20
    NAME: ClassVar[str] = "AppData"
    blob: bytes

    def to_bytes(self) -> bytes:
        return struct.pack(">BH", self.TAG, len(self.blob)) + self.blob


# --- transcript --------------------------------------------------------------


class Transcript:
    """Ordered event log of one run; serialises to canonical JSON lines."""

    def __init__(self) -> None:
        self.events: list[dict] = []

    def add(self, slot: int, kind: str, **fields: Any) -> dict:
        event = {"slot": slot, "kind": kind}
        for key, value in fields.items():
            if isinstance(value, (bytes, bytearray)):
                value = value.hex()
            elif isinstance(value, enum.Enum):
                value = value.name
            event[key] = value
        self.events.append(event)
        return event

    def of_kind(self, *kinds: str) -> list[dict]:
        return [e for e in self.events if e["kind"] in kinds]

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def serialize(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events)


# --- links -------------------------------------------------------------------


class Endpoint:
    def __init__(self, link: "Link", address: int, claimed: int, peer_claimed: int, master: bool, actor) -> None:
        self.link = link
        self.address = address
        self.claimed = claimed
        self.peer_claimed = peer_claimed
        self.master = master
        self.actor = actor
        self.queue: deque = deque()
        self.last_activity = link.net.slot

    def send(self, payload) -> None:
        self.queue.append(payload)

    def drop_queue(self) -> None:
        self.queue.clear()


class Link:
    def __init__(self, name: str, seq: HopSequence, start_slot: int) -> None:
        self.name = name
        self.seq = seq
        self.net = Piconet(name=name, slot=start_slot)
        self.ends: list[Endpoint] = []

    def connect(self, address: int, claimed: int, peer_claimed: int, master: bool, actor) -> Endpoint:
        end = Endpoint(self, address, claimed, peer_claimed, master, actor)
        self.ends.append(end)
        self.net.attach(address, self.seq)
        return end

    @property
    def busy(self) -> bool:
        return any(end.queue for end in self.ends)

    def queue_transmissions(self, slot: int) -> None:
        even = slot % 2 == 0
        for end in self.ends:
            if end.queue and end.master == even:
                self.net.transmit(
                    RadioFrame(end.address, end.claimed, slot, hop_channel(self.seq, slot), end.queue[0])
                )

    def resolve(self, world: "World") -> None:
        events = self.net.resolve_slot()
        for ev in events:
            world.transcript.add(ev.slot, "radio", link=self.name, line=ev.to_line())
            if ev.outcome is not DeliveryOutcome.DELIVERED:
                continue
            frame = ev.frame
            for sender in self.ends:
                if sender.address == frame.sender and sender.queue and sender.queue[0] is frame.payload:
                    break
            else:
                continue
            for receiver in self.ends:
                if (
                    receiver is not sender
                    and receiver.address in ev.receivers
                    and frame.claimed_sender == receiver.peer_claimed
                ):
                    sender.queue.popleft()
                    sender.last_activity = receiver.last_activity = ev.slot
                    receiver.actor.on_payload(world, receiver, frame.payload)
                    break


class World:
    def __init__(self, *, supervision_timeout: int = 100, max_slots: int = 10_000) -> None:
        self.slot = 0
        self.links: list[Link] = []
        self.actors: list = []
        self.hooks: list = []  # called each slot before resolution; must expose .active
        self.transcript = Transcript()
        self.supervision_timeout = supervision_timeout
        self.max_slots = max_slots

    def record(self, kind: str, **fields: Any) -> dict:
        return self.transcript.add(self.slot, kind, **fields)

    def add_link(self, name: str, seq: HopSequence) -> Link:
        link = Link(name, seq, self.slot)
        self.links.append(link)
        return link

    def step_slot(self) -> None:
        for link in self.links:
            link.queue_transmissions(self.slot)
        for hook in self.hooks:
            if hook.active:
                hook.on_slot(self, self.slot)
        for link in self.links:
            link.resolve(self)
        self.slot += 1
        for actor in self.actors:
            actor.after_slot(self)

    def quiescent(self) -> bool:
        if any(link.busy for link in self.links):
            return False
        if any(hook.active for hook in self.hooks):
            return False
        return not any(actor.busy for actor in self.actors)

    def run_until(self, predicate) -> bool:
        """Advance until ``predicate()`` holds, nothing can change, or time runs out."""
        while self.slot < self.max_slots:
            if predicate() or self.quiescent():
                return predicate()
            self.step_slot()
        self.record("max_slots_reached")
        return predicate()

    @property
    def out_of_time(self) -> bool:
        return self.slot >= self.max_slots


# --- session owners ----------------------------------------------------------


class SessionOwner:
    """Shared plumbing for anything that runs pairing sessions over links."""

    name = "?"
    is_victim = False

    def _emit(self, world: World, endpoint: Endpoint, session: PairingSession, out: list, prompts: list) -> None:
        for msg in out:
            endpoint.send(msg)
            world.record("tx", actor=self.name, link=endpoint.link.name, msg=msg.NAME, hex=msg.to_bytes())
        for prompt in prompts:
            world.record("prompt", actor=self.name, prompt=prompt.kind.value, value=prompt.value)
            self.on_prompt(world, endpoint, session, prompt)
        self._check_state(world, endpoint, session)

    def on_prompt(self, world, endpoint, session, prompt: UserPromptRequest) -> None:
        pass

    def _check_state(self, world: World, endpoint: Endpoint, session: PairingSession) -> None:
        if session.state is State.LINK_KEY_READY:
            enable_encryption(session)
            world.record(
                "link_key",
                actor=self.name,
                victim=self.is_victim,
                role=session.role.value,
                model=session.model.value,
                key=session.link_key,
                events=list(session.events),
            )
            self.on_encrypted(world, endpoint, session)
        elif session.state is State.ABORTED and not getattr(session, "_abort_recorded", False):
            session._abort_recorded = True
            world.record(
                "abort",
                actor=self.name,
                victim=self.is_victim,
                reason=session.abort_reason,
                peer_reason=session.peer_abort_reason,
                model=session.model.value if session.model else None,
            )
            if session.abort_reason is AbortReason.POLICY_REJECT:
                world.record("policy_reject", actor=self.name, victim=self.is_victim)

    def on_encrypted(self, world, endpoint, session) -> None:
        pass

    def feed(self, world: World, endpoint: Endpoint, session: PairingSession, msg=None, decision=None, oob=None):
        kwargs = {"oob": oob}
        if decision is not None:
            kwargs["decision"] = decision
            world.record("decision", actor=self.name, decision=_decision_text(decision))
        _, out, prompts = step(session, msg, **kwargs)
        self._emit(world, endpoint, session, out, prompts)

    def supervise(self, world: World, endpoint: Optional[Endpoint], session: Optional[PairingSession]) -> None:
        if endpoint is None or session is None or session.terminal:
            return
        if world.slot - endpoint.last_activity > world.supervision_timeout:
            session.abort(AbortReason.LINK_LOSS, notify_peer=False)
            endpoint.drop_queue()
            self._check_state(world, endpoint, session)


def _decision_text(decision) -> str:
    if isinstance(decision, Confirm):
        return "yes" if decision.accept else "no"
    if isinstance(decision, PasskeyInput):
        return f"passkey:{decision.value:06d}"
    return "none"


class Device(SessionOwner):
    """An honest victim device: one pairing attempt at a time, then a ping."""

    is_victim = True

    def __init__(self, name: str, config: DeviceConfig, rng: random.Random, app_payload: bytes, passkey=None):
        self.name = name
        self.config = config
        self.rng = rng
        self.app_payload = app_payload
        self.passkey = passkey
        self.session: Optional[PairingSession] = None
        self.endpoint: Optional[Endpoint] = None
        self.oob_payload = None
        self.history: list[PairingSession] = []
        self.open_prompt: Optional[UserPromptRequest] = None
        self.prompt_since = 0
        self.display: Optional[tuple] = None
        self.app_received: list[bytes] = []
        self.roundtrip_ok = False

    @property
    def busy(self) -> bool:
        return self.open_prompt is not None

    def begin(self, world: World, endpoint: Endpoint, role: Role, peer_address: int) -> PairingSession:
        session, out = start_pairing(self.config, role, self.rng, peer_address=peer_address, passkey=self.passkey)
        self.session, self.endpoint = session, endpoint
        self.history.append(session)
        self.oob_payload = None
        self.open_prompt = None
        self.display = None
        world.record("session_start", actor=self.name, role=role.value, link=endpoint.link.name,
                     public_key=crypto.point_to_bytes(session.public_key))
        self._emit(world, endpoint, session, out, [])
        return session

    def on_prompt(self, world, endpoint, session, prompt):
        if prompt.kind is PromptKind.ENTER_PASSKEY:
            self.display = ("enter", None)
        elif prompt.kind is PromptKind.DISPLAY_PASSKEY:
            self.display = ("passkey", prompt.value)
        else:
            self.display = ("value", prompt.value)
        if prompt.needs_decision:
            self.open_prompt = prompt
            self.prompt_since = world.slot

    def decide(self, world: World, decision) -> None:
        self.open_prompt = None
        self.feed(world, self.endpoint, self.session, decision=decision)

    def on_payload(self, world: World, endpoint: Endpoint, payload) -> None:
        if endpoint is not self.endpoint:
            return
        if isinstance(payload, PairingMessage):
            self.feed(world, endpoint, self.session, msg=payload, oob=self.oob_payload)
            if self.session.terminal:
                self.open_prompt = None
        elif isinstance(payload, AppData):
            self._on_app(world, payload)

    def on_encrypted(self, world, endpoint, session) -> None:
        if session.is_initiator:
            self._send_app(world, self.app_payload)

    def _send_app(self, world: World, plaintext: bytes) -> None:
        blob = self.session.seal(plaintext)
        self.endpoint.send(AppData(blob))
        world.record("app_send", actor=self.name, plaintext=plaintext, sealed=blob)

    def _on_app(self, world: World, payload: AppData) -> None:
        try:
            plaintext = self.session.unseal(payload.blob)
        except crypto.UnsealFailure as exc:
            world.record("app_unseal_failure", actor=self.name, error=str(exc))
            return
        self.app_received.append(plaintext)
        world.record("app_received", actor=self.name, plaintext=plaintext)
        if self.session.is_initiator:
            if plaintext == b"ack:" + self.app_payload:
                self.roundtrip_ok = True
                world.record("app_roundtrip_verified", actor=self.name)
        else:
            self._send_app(world, b"ack:" + plaintext)

    def after_slot(self, world: World) -> None:
        self.supervise(world, self.endpoint, self.session)
        if self.session is not None and self.session.terminal:
            self.open_prompt = None

    def peer_view(self) -> Optional[tuple]:
        """What a user looking at this device sees, or None if it may still change."""
        if self.display is not None:
            return self.display
        session = self.session
        if session is None:
            return None
        if session.state >= State.STAGE1_DONE:
            return ("none", None)
        if session.model in (AssociationModel.JUST_WORKS, AssociationModel.OUT_OF_BAND):
            return ("none", None)
        return None


# --- users -------------------------------------------------------------------


class UserAgentKind(enum.Enum):
    HONEST_COMPARING = "honest-comparing"
    ALWAYS_ACCEPT = "always-accept"
    ALWAYS_REJECT = "always-reject"
    HONEST_PASSKEY_TRANSFER = "honest-passkey"
    INATTENTIVE = "inattentive"


@dataclass(frozen=True)
class UserAgentPolicy:
    kind: UserAgentKind = UserAgentKind.HONEST_COMPARING
    accept_probability: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "UserAgentPolicy":
        name, _, arg = text.strip().partition(":")
        kind = UserAgentKind(name.strip().lower())
        if kind is UserAgentKind.INATTENTIVE:
            p = float(arg) if arg else 0.5
            if not 0.0 <= p <= 1.0:
                raise ValueError("accept probability must be in [0, 1]")
            return cls(kind, p)
        return cls(kind)

    def __str__(self) -> str:
        if self.kind is UserAgentKind.INATTENTIVE:
            return f"{self.kind.value}:{self.accept_probability:g}"
        return self.kind.value


HONEST = UserAgentPolicy()


class UserDesk:
    """The people holding both victim devices.

    Decisions depend on what the *other* device shows: a comparing user
    accepts only if both screens show the same six digits, and types the
    passkey the other device displays.
    """

    name = "users"

    def __init__(self, devices: dict, policies: dict, rng: random.Random, passkey=None, patience: int = 16):
        self.devices = devices
        self.policies = policies
        self.rng = rng
        self.fixed_passkey = passkey
        self.patience = patience
        self.shared_passkey: Optional[int] = None
        self._inattentive: dict = {}

    @property
    def busy(self) -> bool:
        return any(dev.open_prompt is not None for dev in self.devices.values())

    def new_attempt(self) -> None:
        self.shared_passkey = None
        self._inattentive.clear()

    def _shared(self) -> int:
        if self.shared_passkey is None:
            self.shared_passkey = self.fixed_passkey if self.fixed_passkey is not None else self.rng.randrange(1_000_000)
        return self.shared_passkey

    def after_slot(self, world: World) -> None:
        names = sorted(self.devices)
        for name in names:
            dev = self.devices[name]
            prompt = dev.open_prompt
            if prompt is None:
                continue
            other = self.devices[names[1] if name == names[0] else names[0]]
            view = other.peer_view()
            if view is None and world.slot - dev.prompt_since > self.patience:
                view = ("none", None)
            decision = self._decide(name, self.policies[name], prompt, view)
            if decision is not None:
                dev.decide(world, decision)

    def _decide(self, name: str, policy: UserAgentPolicy, prompt: UserPromptRequest, view):
        kind = policy.kind
        if kind is UserAgentKind.ALWAYS_REJECT:
            return Confirm(False)
        if prompt.kind is PromptKind.CONFIRM_VALUE:
            if kind is UserAgentKind.ALWAYS_ACCEPT:
                return Confirm(True)
            if kind is UserAgentKind.INATTENTIVE:
                if name not in self._inattentive:
                    self._inattentive[name] = self.rng.random() < policy.accept_probability
                if self._inattentive[name]:
                    return Confirm(True)
            if view is None:
                return None
            return Confirm(view == ("value", prompt.value))
        # passkey entry
        if view is None:
            return None
        if view[0] == "passkey":
            return PasskeyInput(view[1])
        if view[0] == "enter":
            return PasskeyInput(self._shared())
        return Confirm(False)
