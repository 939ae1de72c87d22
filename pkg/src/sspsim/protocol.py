"""Per-device Secure Simple Pairing state machine.

A :class:`PairingSession` is driven by :func:`start_pairing` and :func:`step`.
Each call returns the messages to put on the air and any user prompts the
device raised.  Failures never raise out of :func:`step`; the session moves to
``ABORTED`` with a machine-readable :class:`AbortReason` and emits an
``Abort`` message where the peer can still be reached.

Message order (initiator A, responder B)::

    A -> B  IoCapabilityExchange, PublicKeyX
    B -> A  IoCapabilityExchange, PublicKeyX
    stage 1, per association model:
      NC/JW   B: Commitment(Cb)  A: Nonce(Na)  B: Nonce(Nb)
      Passkey A: Commitment(Ca)  B: Commitment(Cb)  A: Nonce(Na)  B: Nonce(Nb)
      OOB     A: Nonce(Na)  B: Nonce(Nb)   (keys checked against OOB data)
    stage 2:  A: DhKeyCheck(Ea)  B: DhKeyCheck(Eb)  A: PairComplete
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, ClassVar, Optional, Union

from . import crypto
from .crypto import InvalidPoint, KeyPair
from .p256 import Point

if TYPE_CHECKING:
    from .oob import OobPayload


class IoCapability(enum.IntEnum):
    DISPLAY_ONLY = 0
    DISPLAY_YES_NO = 1
    KEYBOARD_ONLY = 2
    NO_INPUT_NO_OUTPUT = 3
    KEYBOARD_DISPLAY = 4

    @property
    def has_display(self) -> bool:
        return self in (IoCapability.DISPLAY_ONLY, IoCapability.DISPLAY_YES_NO, IoCapability.KEYBOARD_DISPLAY)

    @property
    def has_keyboard(self) -> bool:
        return self in (IoCapability.KEYBOARD_ONLY, IoCapability.KEYBOARD_DISPLAY)

    @property
    def can_confirm(self) -> bool:
        return self in (IoCapability.DISPLAY_YES_NO, IoCapability.KEYBOARD_DISPLAY)


class AssociationModel(enum.Enum):
    NUMERIC_COMPARISON = "NumericComparison"
    JUST_WORKS = "JustWorks"
    OUT_OF_BAND = "OutOfBand"
    PASSKEY_ENTRY = "PasskeyEntry"


class Role(enum.Enum):
    INITIATOR = "initiator"
    RESPONDER = "responder"


class State(enum.IntEnum):
    IDLE = 0
    PUBLIC_KEY_SENT = 1
    STAGE1_IN_PROGRESS = 2
    STAGE1_DONE = 3
    STAGE2_IN_PROGRESS = 4
    LINK_KEY_READY = 5
    ENCRYPTED = 6
    ABORTED = 7


class AbortReason(enum.IntEnum):
    COMMITMENT_MISMATCH = 1
    CHECK_VALUE_MISMATCH = 2
    USER_REJECTED = 3
    PROTOCOL_VIOLATION = 4
    MISSING_OOB = 5
    POLICY_REJECT = 6
    INVALID_POINT = 7
    LINK_LOSS = 8
    PEER_ABORT = 9


# Reasons that point at an active attacker or an attentive user.
DETECTION_REASONS = frozenset(
    {
        AbortReason.COMMITMENT_MISMATCH,
        AbortReason.CHECK_VALUE_MISMATCH,
        AbortReason.USER_REJECTED,
        AbortReason.INVALID_POINT,
    }
)


class PairingAbort(Exception):
    reason: ClassVar[AbortReason] = AbortReason.PROTOCOL_VIOLATION


class CommitmentMismatch(PairingAbort):
    reason = AbortReason.COMMITMENT_MISMATCH


class CheckValueMismatch(PairingAbort):
    reason = AbortReason.CHECK_VALUE_MISMATCH


class UserRejected(PairingAbort):
    reason = AbortReason.USER_REJECTED


class ProtocolViolation(PairingAbort):
    reason = AbortReason.PROTOCOL_VIOLATION


class MissingOob(PairingAbort):
    reason = AbortReason.MISSING_OOB


class PolicyReject(PairingAbort):
    reason = AbortReason.POLICY_REJECT


class NotReady(Exception):
    pass


@dataclass(frozen=True)
class SecurityPolicy:
    allow_just_works: bool = True
    require_oob: bool = False
    require_mitm_protection: bool = False


@dataclass(frozen=True)
class DeviceConfig:
    address: int
    io: IoCapability
    oob_available: bool = False
    policy: SecurityPolicy = field(default_factory=SecurityPolicy)

    def __post_init__(self):
        if not 0 <= self.address < 1 << 48:
            raise ValueError(f"address {self.address:#x} is not 48-bit")


def io_caps_byte(io: IoCapability, oob: bool) -> int:
    return int(io) | (0x10 if oob else 0)


def _unchecked_model(io_a: IoCapability, io_b: IoCapability, oob_a: bool, oob_b: bool) -> AssociationModel:
    if oob_a and oob_b:
        return AssociationModel.OUT_OF_BAND
    if IoCapability.NO_INPUT_NO_OUTPUT in (io_a, io_b):
        return AssociationModel.JUST_WORKS
    if io_a.can_confirm and io_b.can_confirm:
        return AssociationModel.NUMERIC_COMPARISON
    if (io_a.has_keyboard and io_b.has_display) or (io_b.has_keyboard and io_a.has_display):
        return AssociationModel.PASSKEY_ENTRY
    if io_a.has_keyboard and io_b.has_keyboard:
        return AssociationModel.PASSKEY_ENTRY
    return AssociationModel.JUST_WORKS


def select_association_model(
    io_a: IoCapability,
    io_b: IoCapability,
    oob_a: bool,
    oob_b: bool,
    policy: SecurityPolicy = SecurityPolicy(),
) -> AssociationModel:
    """Pick the association model for a device pair.

    Raises :class:`PolicyReject` when ``policy`` forbids the outcome.
    """
    model = _unchecked_model(io_a, io_b, oob_a, oob_b)
    if policy.require_oob and model is not AssociationModel.OUT_OF_BAND:
        raise PolicyReject("policy requires out-of-band pairing")
    if model is AssociationModel.JUST_WORKS:
        if not policy.allow_just_works:
            raise PolicyReject("Just Works is disabled by policy")
        if policy.require_mitm_protection:
            raise PolicyReject("Just Works gives no MITM protection")
    return model


def passkey_displayed_by(own: IoCapability, peer: IoCapability) -> bool:
    """True when this side shows the passkey, False when the user types it."""
    return own.has_display and peer.has_keyboard


# --- wire messages -----------------------------------------------------------
# Layout: 1 tag byte, 2-byte big-endian length, payload.


class PairingMessage:
    TAG: ClassVar[int]
    NAME: ClassVar[str]

    def payload(self) -> bytes:
        return b""

    def to_bytes(self) -> bytes:
        body = self.payload()
        return struct.pack(">BH", self.TAG, len(body)) + body

    def __bytes__(self) -> bytes:
        return self.to_bytes()


@dataclass(frozen=True)
class IoCapabilityExchange(PairingMessage):
    TAG: ClassVar[int] = 0x01
    NAME: ClassVar[str] = "IoCapabilityExchange"
    io: IoCapability
    oob: bool

    def payload(self) -> bytes:
        return bytes([int(self.io), int(self.oob)])


@dataclass(frozen=True)
class PublicKeyX(PairingMessage):
    TAG: ClassVar[int] = 0x02
    NAME: ClassVar[str] = "PublicKeyX"
    point: Point

    def payload(self) -> bytes:
        return crypto.point_to_bytes(self.point)


class _ValueMessage(PairingMessage):
    value: bytes

    def payload(self) -> bytes:
        return self.value


@dataclass(frozen=True)
class CommitmentMsg(_ValueMessage):
    TAG: ClassVar[int] = 0x03
    NAME: ClassVar[str] = "Commitment"
    value: bytes


@dataclass(frozen=True)
class NonceReveal(_ValueMessage):
    TAG: ClassVar[int] = 0x04
    NAME: ClassVar[str] = "NonceReveal"
    value: bytes


@dataclass(frozen=True)
class DhKeyCheck(_ValueMessage):
    TAG: ClassVar[int] = 0x05
    NAME: ClassVar[str] = "DhKeyCheck"
    value: bytes


@dataclass(frozen=True)
class PairComplete(PairingMessage):
    TAG: ClassVar[int] = 0x06
    NAME: ClassVar[str] = "PairComplete"


@dataclass(frozen=True)
class Abort(PairingMessage):
    TAG: ClassVar[int] = 0x07
    NAME: ClassVar[str] = "Abort"
    reason: AbortReason

    def payload(self) -> bytes:
        return bytes([int(self.reason)])


MESSAGE_TYPES = {
    cls.TAG: cls
    for cls in (IoCapabilityExchange, PublicKeyX, CommitmentMsg, NonceReveal, DhKeyCheck, PairComplete, Abort)
}


def decode_message(data: bytes) -> PairingMessage:
    if len(data) < 3:
        raise ValueError("truncated message header")
    tag, length = struct.unpack(">BH", data[:3])
    body = data[3:]
    if len(body) != length:
        raise ValueError(f"length field {length} does not match payload of {len(body)} bytes")
    cls = MESSAGE_TYPES.get(tag)
    if cls is None:
        raise ValueError(f"unknown message tag {tag:#04x}")
    if cls is IoCapabilityExchange:
        return IoCapabilityExchange(IoCapability(body[0]), bool(body[1]))
    if cls is PublicKeyX:
        return PublicKeyX(crypto.point_from_bytes(body))
    if cls is PairComplete:
        return PairComplete()
    if cls is Abort:
        return Abort(AbortReason(body[0]))
    if len(body) != 16:
        raise ValueError(f"{cls.NAME} payload must be 16 bytes")
    return cls(body)


# --- user interaction --------------------------------------------------------


class PromptKind(enum.Enum):
    CONFIRM_VALUE = "ConfirmValue"
    DISPLAY_PASSKEY = "DisplayPasskey"
    ENTER_PASSKEY = "EnterPasskey"


@dataclass(frozen=True)
class UserPromptRequest:
    kind: PromptKind
    value: Optional[int] = None

    @property
    def needs_decision(self) -> bool:
        return self.kind is not PromptKind.DISPLAY_PASSKEY


@dataclass(frozen=True)
class Confirm:
    accept: bool


@dataclass(frozen=True)
class PasskeyInput:
    value: int


@dataclass(frozen=True)
class NoInteraction:
    pass


UserDecision = Union[Confirm, PasskeyInput, NoInteraction]
NO_INTERACTION = NoInteraction()


# --- the session -------------------------------------------------------------


@dataclass
class PairingSession:
    role: Role
    config: DeviceConfig
    peer_address: int
    rng: random.Random = field(repr=False)
    own_keys: KeyPair = field(repr=False)
    fixed_passkey: Optional[int] = None
    state: State = State.IDLE
    model: Optional[AssociationModel] = None
    peer_io: Optional[IoCapability] = None
    peer_oob: Optional[bool] = None
    peer_public: Optional[Point] = None
    n_own: Optional[bytes] = None
    n_peer: Optional[bytes] = None
    oob_r_own: Optional[bytes] = None
    oob_peer: Optional["OobPayload"] = None
    passkey: Optional[int] = None
    c_own: Optional[bytes] = None
    c_peer: Optional[bytes] = None
    dh: Optional[bytes] = field(default=None, repr=False)
    link_key: Optional[bytes] = field(default=None, repr=False)
    displayed_value: Optional[int] = None
    abort_reason: Optional[AbortReason] = None
    peer_abort_reason: Optional[AbortReason] = None
    transcript: list = field(default_factory=list, repr=False)
    events: list = field(default_factory=list)
    _awaiting: Optional[PromptKind] = None
    _peer_check_ok: bool = False
    _pending_check: Optional[bytes] = None
    _nonce_sent: bool = False
    _out: list = field(default_factory=list, repr=False)
    _prompts: list = field(default_factory=list, repr=False)

    # -- derived views

    @property
    def is_initiator(self) -> bool:
        return self.role is Role.INITIATOR

    @property
    def address(self) -> int:
        return self.config.address

    @property
    def initiator_address(self) -> int:
        return self.address if self.is_initiator else self.peer_address

    @property
    def responder_address(self) -> int:
        return self.peer_address if self.is_initiator else self.address

    @property
    def public_key(self) -> Point:
        return self.own_keys.public_point

    @property
    def terminal(self) -> bool:
        return self.state in (State.ABORTED, State.ENCRYPTED)

    @property
    def awaiting_user(self) -> Optional[PromptKind]:
        return self._awaiting

    def _pk_init(self) -> Point:
        return self.public_key if self.is_initiator else self.peer_public

    def _pk_resp(self) -> Point:
        return self.peer_public if self.is_initiator else self.public_key

    def _n_init(self) -> bytes:
        return self.n_own if self.is_initiator else self.n_peer

    def _n_resp(self) -> bytes:
        return self.n_peer if self.is_initiator else self.n_own

    # -- plumbing

    def _send(self, msg: PairingMessage) -> None:
        self._out.append(msg)
        self.transcript.append(("tx", msg.to_bytes()))

    def _prompt(self, kind: PromptKind, value: Optional[int] = None) -> None:
        prompt = UserPromptRequest(kind, value)
        self._prompts.append(prompt)
        if prompt.needs_decision:
            self._awaiting = kind

    def _drain(self) -> tuple[list, list]:
        out, prompts = self._out, self._prompts
        self._out, self._prompts = [], []
        return out, prompts

    def abort(self, reason: AbortReason, notify_peer: bool = True) -> None:
        if self.state is State.ABORTED:
            return
        self.state = State.ABORTED
        self.abort_reason = reason
        self.link_key = None
        self._awaiting = None
        self.events.append(f"Abort:{reason.name}")
        if notify_peer:
            self._send(Abort(reason))

    def _run(self, fn, *args) -> None:
        try:
            fn(*args)
        except PairingAbort as exc:
            self.abort(exc.reason)
        except InvalidPoint:
            self.abort(AbortReason.INVALID_POINT)

    # -- entry

    def _start(self) -> None:
        if self.is_initiator:
            self._send(IoCapabilityExchange(self.config.io, self.config.oob_available))
            self._send(PublicKeyX(self.public_key))
            self.state = State.PUBLIC_KEY_SENT

    # -- inbound dispatch

    def _handle(self, msg: PairingMessage) -> None:
        if self.state is State.ABORTED:
            return
        if isinstance(msg, Abort):
            self.peer_abort_reason = msg.reason
            self.abort(AbortReason.PEER_ABORT, notify_peer=False)
            return
        handler = {
            IoCapabilityExchange: self._on_io_capability,
            PublicKeyX: self._on_public_key,
            CommitmentMsg: self._on_commitment,
            NonceReveal: self._on_nonce,
            DhKeyCheck: self._on_check,
            PairComplete: self._on_pair_complete,
        }.get(type(msg))
        if handler is None:
            raise ProtocolViolation(f"unexpected {type(msg).__name__}")
        handler(msg)

    def _on_io_capability(self, msg: IoCapabilityExchange) -> None:
        if self.peer_io is not None or self.state not in (State.IDLE, State.PUBLIC_KEY_SENT):
            raise ProtocolViolation("duplicate IO capability exchange")
        self.peer_io, self.peer_oob = msg.io, msg.oob
        if self.is_initiator:
            io_a, io_b, oob_a, oob_b = self.config.io, msg.io, self.config.oob_available, msg.oob
        else:
            io_a, io_b, oob_a, oob_b = msg.io, self.config.io, msg.oob, self.config.oob_available
        self.model = select_association_model(io_a, io_b, oob_a, oob_b, self.config.policy)
        self.events.append(f"AssociationModel:{self.model.value}")
        if self.model is AssociationModel.OUT_OF_BAND and self.oob_peer is None:
            raise MissingOob("out-of-band model selected without peer OOB data")
        if not self.is_initiator:
            self._send(IoCapabilityExchange(self.config.io, self.config.oob_available))

    def _on_public_key(self, msg: PublicKeyX) -> None:
        if self.peer_io is None or self.peer_public is not None:
            raise ProtocolViolation("public key out of order")
        self.peer_public = msg.point
        if not self.is_initiator:
            self._send(PublicKeyX(self.public_key))
            self.state = State.PUBLIC_KEY_SENT
        self._enter_stage1()

    def _enter_stage1(self) -> None:
        self.state = State.STAGE1_IN_PROGRESS
        self.n_own = crypto.random_bytes(self.rng)
        model = self.model
        if model is AssociationModel.OUT_OF_BAND:
            expected = crypto.f1_commit(self.peer_public, self.peer_public, crypto.ZERO_16, self.oob_peer.r)
            if expected != self.oob_peer.c:
                raise CommitmentMismatch("in-band public key does not match OOB commitment")
            if self.is_initiator:
                self._send_nonce()
        elif model is AssociationModel.PASSKEY_ENTRY:
            if passkey_displayed_by(self.config.io, self.peer_io):
                self.passkey = self.fixed_passkey if self.fixed_passkey is not None else self.rng.randrange(1_000_000)
                self._prompt(PromptKind.DISPLAY_PASSKEY, self.passkey)
                self._passkey_commit_if_ready()
            else:
                self._prompt(PromptKind.ENTER_PASSKEY)
        elif not self.is_initiator:
            self.c_own = crypto.f1_commit(self.public_key, self.peer_public, self.n_own, crypto.ZERO_16)
            self._send(CommitmentMsg(self.c_own))

    def _send_nonce(self) -> None:
        self._nonce_sent = True
        self._send(NonceReveal(self.n_own))

    def _passkey_r(self) -> bytes:
        return crypto.passkey_to_r(self.passkey)

    def _passkey_commit_if_ready(self) -> None:
        if self.passkey is None or self.c_own is not None:
            return
        if self.is_initiator or self.c_peer is not None:
            self.c_own = crypto.f1_commit(self.public_key, self.peer_public, self.n_own, self._passkey_r())
            self._send(CommitmentMsg(self.c_own))

    def _on_commitment(self, msg: CommitmentMsg) -> None:
        if self.state is not State.STAGE1_IN_PROGRESS or self.c_peer is not None:
            raise ProtocolViolation("commitment out of order")
        if self.model in (AssociationModel.NUMERIC_COMPARISON, AssociationModel.JUST_WORKS):
            if not self.is_initiator:
                raise ProtocolViolation("responder does not expect a commitment")
            self.c_peer = msg.value
            self._send_nonce()
        elif self.model is AssociationModel.PASSKEY_ENTRY:
            if self.is_initiator and self.c_own is None:
                raise ProtocolViolation("responder committed first")
            self.c_peer = msg.value
            if self.is_initiator:
                self._send_nonce()
            else:
                self._passkey_commit_if_ready()
        else:
            raise ProtocolViolation("no commitment in out-of-band stage 1")

    def _on_nonce(self, msg: NonceReveal) -> None:
        if self.state is not State.STAGE1_IN_PROGRESS or self.n_peer is not None:
            raise ProtocolViolation("nonce out of order")
        if self.is_initiator and not self._nonce_sent:
            raise ProtocolViolation("responder revealed its nonce first")
        model = self.model
        if not self.is_initiator and model is not AssociationModel.OUT_OF_BAND and self.c_own is None:
            raise ProtocolViolation("nonce before commitment")
        self.n_peer = msg.value
        if model is AssociationModel.PASSKEY_ENTRY:
            expected = crypto.f1_commit(self.peer_public, self.public_key, self.n_peer, self._passkey_r())
            if expected != self.c_peer:
                raise CommitmentMismatch("passkey commitment does not open")
        elif model is not AssociationModel.OUT_OF_BAND and self.is_initiator:
            expected = crypto.f1_commit(self.peer_public, self.public_key, self.n_peer, crypto.ZERO_16)
            if expected != self.c_peer:
                raise CommitmentMismatch("responder commitment does not open")
        if not self.is_initiator:
            self._send_nonce()
        if model is AssociationModel.NUMERIC_COMPARISON:
            self.displayed_value = crypto.g_verify_value(self._pk_init(), self._pk_resp(), self._n_init(), self._n_resp())
            self._prompt(PromptKind.CONFIRM_VALUE, self.displayed_value)
        else:
            self._stage1_done()

    def _apply_decision(self, decision: UserDecision) -> None:
        if self._awaiting is None or isinstance(decision, NoInteraction):
            return
        if isinstance(decision, Confirm):
            if not decision.accept:
                raise UserRejected("user declined")
            if self._awaiting is PromptKind.CONFIRM_VALUE:
                self._awaiting = None
                self._stage1_done()
        elif isinstance(decision, PasskeyInput) and self._awaiting is PromptKind.ENTER_PASSKEY:
            if not 0 <= decision.value < 1_000_000:
                raise UserRejected("passkey out of range")
            self._awaiting = None
            self.passkey = decision.value
            self._passkey_commit_if_ready()

    def _stage1_done(self) -> None:
        self.dh = crypto.derive_dh_key(self.own_keys.private_scalar, self.peer_public)
        self.state = State.STAGE1_DONE
        if self.is_initiator:
            self._send(DhKeyCheck(self._check_value(own=True)))
            self.state = State.STAGE2_IN_PROGRESS
        elif self._pending_check is not None:
            pending, self._pending_check = self._pending_check, None
            self._verify_initiator_check(pending)

    def _f3_r(self, own: bool) -> bytes:
        """r input of the check value sent by this side (``own``) or by the peer."""
        if self.model is AssociationModel.PASSKEY_ENTRY:
            return self._passkey_r()
        if self.model is AssociationModel.OUT_OF_BAND:
            # Each side's check covers the r it received out of band.
            return self.oob_peer.r if own else self.oob_r_own
        return crypto.ZERO_16

    def _check_value(self, own: bool) -> bytes:
        if own:
            n1, n2, io = self.n_own, self.n_peer, io_caps_byte(self.config.io, self.config.oob_available)
            a1, a2 = self.address, self.peer_address
        else:
            n1, n2, io = self.n_peer, self.n_own, io_caps_byte(self.peer_io, self.peer_oob)
            a1, a2 = self.peer_address, self.address
        return crypto.f3_check_value(self.dh, n1, n2, self._f3_r(own), io, a1, a2)

    def _verify_initiator_check(self, value: bytes) -> None:
        if value != self._check_value(own=False):
            raise CheckValueMismatch("initiator check value mismatch")
        self._peer_check_ok = True
        self._send(DhKeyCheck(self._check_value(own=True)))
        self.state = State.STAGE2_IN_PROGRESS

    def _on_check(self, msg: DhKeyCheck) -> None:
        if self.is_initiator:
            if self.state is not State.STAGE2_IN_PROGRESS or self._peer_check_ok:
                raise ProtocolViolation("check value out of order")
            if msg.value != self._check_value(own=False):
                raise CheckValueMismatch("responder check value mismatch")
            self._peer_check_ok = True
            self.events.append("SimplePairingComplete")
            finalize_stage2(self)
            self._send(PairComplete())
        elif self.state is State.STAGE1_IN_PROGRESS and self._pending_check is None and self.n_peer is not None:
            self._pending_check = msg.value
        elif self.state is State.STAGE1_DONE:
            self._verify_initiator_check(msg.value)
        else:
            raise ProtocolViolation("check value out of order")

    def _on_pair_complete(self, msg: PairComplete) -> None:
        if self.is_initiator or self.state is not State.STAGE2_IN_PROGRESS:
            raise ProtocolViolation("pair complete out of order")
        self.events.append("SimplePairingComplete")
        finalize_stage2(self)

    # -- encrypted traffic

    def seal(self, plaintext: bytes) -> bytes:
        if self.state is not State.ENCRYPTED:
            raise NotReady("link is not encrypted")
        return crypto.seal(self.link_key, plaintext, crypto.random_bytes(self.rng, crypto.SEAL_NONCE_SIZE))

    def unseal(self, blob: bytes) -> bytes:
        if self.state is not State.ENCRYPTED:
            raise crypto.UnsealFailure("link is not encrypted")
        return crypto.unseal(self.link_key, blob)


def start_pairing(
    config: DeviceConfig,
    role: Role,
    rng: random.Random,
    *,
    peer_address: int,
    passkey: Optional[int] = None,
) -> tuple[PairingSession, list]:
    """Create a session with a fresh key pair.

    The initiator immediately emits its IO capabilities and public key.  A
    responder stays ``IDLE`` until the initiator's key arrives.  Devices with
    OOB capability also draw the random value ``r`` they will hand over out
    of band.
    """
    keys = crypto.generate_keypair(rng)
    session = PairingSession(
        role=role,
        config=config,
        peer_address=peer_address,
        rng=rng,
        own_keys=keys,
        fixed_passkey=passkey,
    )
    if config.oob_available:
        session.oob_r_own = crypto.random_bytes(rng)
    session.events.append(f"Start:{role.value}")
    session._start()
    out, _ = session._drain()
    return session, out


def step(
    session: PairingSession,
    inbound: Optional[PairingMessage],
    decision: UserDecision = NO_INTERACTION,
    oob: Optional["OobPayload"] = None,
) -> tuple[PairingSession, list, list]:
    """Feed one inbound message and/or a user decision into ``session``.

    ``inbound`` may be ``None`` to deliver only a decision.  ``oob`` hands the
    peer's out-of-band payload to the session; it is kept for later calls.
    """
    if oob is not None and session.oob_peer is None:
        session.oob_peer = oob
    if session.state is not State.ABORTED:
        if inbound is not None:
            session.transcript.append(("rx", inbound.to_bytes()))
            session._run(session._handle, inbound)
        if session.state is not State.ABORTED:
            session._run(session._apply_decision, decision)
    out, prompts = session._drain()
    return session, out, prompts


def finalize_stage2(session: PairingSession) -> PairingSession:
    """Derive the link key once both stage-2 checks have verified."""
    if not session._peer_check_ok or session.dh is None:
        raise CheckValueMismatch("stage-2 checks not verified")
    session.link_key = crypto.f2_link_key(
        session.dh, session._n_init(), session._n_resp(), session.initiator_address, session.responder_address
    )
    session.state = State.LINK_KEY_READY
    session.events.append("LinkKeyNotification")
    if session.is_initiator:
        session.events.append("AuthenticationComplete")
    return session


def enable_encryption(session: PairingSession) -> PairingSession:
    if session.state is not State.LINK_KEY_READY:
        raise NotReady(f"cannot enable encryption in state {session.state.name}")
    session.state = State.ENCRYPTED
    session.events.append("EncryptionChange")
    return session
