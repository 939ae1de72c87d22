"""Scenario execution, outcome classification and the feasibility matrix."""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from typing import Optional, Union

from .attacker import ATTACKER_PRESETS, Attacker, AttackerConfig, CapabilityMissing
from .oob import OobChannelConfig, exchange_oob
from .protocol import DETECTION_REASONS, AbortReason, DeviceConfig, IoCapability, Role, State
from .radio import DELIVERY_LOG_HEADER, HopSequence
from .sim import HONEST, Device, Transcript, UserAgentPolicy, UserDesk, World

DEFAULT_ADDRESS_A = 0x001122334455
DEFAULT_ADDRESS_B = 0x66778899AABB


class InvalidSpec(ValueError):
    pass


class Outcome(enum.Enum):
    POLICY_BLOCKED = "PolicyBlocked"
    ATTACK_DETECTED = "AttackDetected"
    ATTACK_SUCCEEDED = "AttackSucceeded"
    SECURE_PAIRED = "SecurePaired"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ScenarioSpec:
    device_a: DeviceConfig
    device_b: DeviceConfig
    attacker: Optional[AttackerConfig] = None
    user_agent_a: UserAgentPolicy = HONEST
    user_agent_b: UserAgentPolicy = HONEST
    oob_config: OobChannelConfig = OobChannelConfig()
    seed: int = 0
    max_slots: int = 10_000
    passkey: Optional[int] = None
    supervision_timeout: int = 100
    app_payload: bytes = b"hello"
    attacker_known_freqs: Optional[frozenset] = None

    def validate(self) -> None:
        if self.device_a.address == self.device_b.address:
            raise InvalidSpec("device addresses must be distinct")
        if self.attacker is not None and self.attacker.address in (self.device_a.address, self.device_b.address):
            raise InvalidSpec("attacker radio address collides with a victim")
        if self.max_slots <= 0:
            raise InvalidSpec("max_slots must be positive")
        if self.supervision_timeout <= 0:
            raise InvalidSpec("supervision_timeout must be positive")
        if self.passkey is not None and not 0 <= self.passkey < 1_000_000:
            raise InvalidSpec("passkey must have six digits")


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    outcome: Outcome
    abort_reason: Optional[str]
    transcript: Transcript
    link_keys: dict
    attacker_keys: dict
    models: dict
    delivery_log: list = field(default_factory=list)
    intercept_log: list = field(default_factory=list)
    slots: int = 0

    @property
    def link_keys_match(self) -> bool:
        ka, kb = self.link_keys.get("a"), self.link_keys.get("b")
        return ka is not None and ka == kb

    def summary(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "abort_reason": self.abort_reason,
            "link_keys_match": self.link_keys_match,
            "transcript_length": len(self.transcript),
        }


def _rng(seed: int, label: str) -> random.Random:
    return random.Random(f"sspsim/{seed}/{label}")


class _Run:
    def __init__(self, spec: ScenarioSpec) -> None:
        self.spec = spec
        self.world = World(supervision_timeout=spec.supervision_timeout, max_slots=spec.max_slots)
        self.radio_rng = _rng(spec.seed, "radio")
        self.a = Device("a", spec.device_a, _rng(spec.seed, "a"), spec.app_payload, spec.passkey)
        self.b = Device("b", spec.device_b, _rng(spec.seed, "b"), spec.app_payload, spec.passkey)
        self.desk = UserDesk(
            {"a": self.a, "b": self.b},
            {"a": spec.user_agent_a, "b": spec.user_agent_b},
            _rng(spec.seed, "users"),
            spec.passkey,
        )
        self.world.actors += [self.a, self.b, self.desk]
        self.attacker = None
        if spec.attacker is not None:
            self.attacker = Attacker(spec.attacker, _rng(spec.seed, "attacker"))
            self.world.actors.append(self.attacker)
        self.oob_counter = 0

    @property
    def oob_cfg(self) -> OobChannelConfig:
        if self.attacker is not None and self.spec.attacker.oob_access is not None:
            return self.spec.attacker.oob_access
        return self.spec.oob_config

    def _new_link(self, name: str):
        clock = self.radio_rng.getrandbits(32)
        return self.world.add_link(name, HopSequence.for_master(self.spec.device_a.address, clock))

    def _exchange_oob(self, forger=None) -> None:
        A, B = self.spec.device_a, self.spec.device_b
        if not (A.oob_available and B.oob_available):
            return
        sa, sb = self.a.session, self.b.session
        exchange = exchange_oob(
            A, B, self.oob_cfg, self.oob_counter,
            pk_a=sa.public_key, pk_b=sb.public_key, r_a=sa.oob_r_own, r_b=sb.oob_r_own,
            forger=forger,
            attacker_known_freqs=self.spec.attacker_known_freqs if self.attacker is not None else None,
        )
        self.oob_counter += 1
        self.a.oob_payload = exchange.payload_for_a
        self.b.oob_payload = exchange.payload_for_b
        self.world.record("oob_exchange", freq_id=exchange.freq_id, forged=exchange.forged,
                          observed=exchange.attacker_view is not None)
        if self.attacker is not None:
            self.attacker.learn_oob(self.world, exchange)

    def direct_attempt(self, name: str):
        A, B = self.spec.device_a, self.spec.device_b
        link = self._new_link(name)
        ea = link.connect(A.address, A.address, B.address, True, self.a)
        eb = link.connect(B.address, B.address, A.address, False, self.b)
        self.desk.new_attempt()
        self.a.begin(self.world, ea, Role.INITIATOR, B.address)
        self.b.begin(self.world, eb, Role.RESPONDER, A.address)
        self._exchange_oob()
        return link

    def mitm_attempt(self) -> None:
        A, B = self.spec.device_a, self.spec.device_b
        to_a = self._new_link("a~mitm")
        to_b = self._new_link("mitm~b")
        ea = to_a.connect(A.address, A.address, B.address, True, self.a)
        eb = to_b.connect(B.address, B.address, A.address, False, self.b)
        self.desk.new_attempt()
        self.a.begin(self.world, ea, Role.INITIATOR, B.address)
        self.b.begin(self.world, eb, Role.RESPONDER, A.address)
        self.attacker.impersonate(self.world, to_a, "a", A, B, Role.RESPONDER)
        self.attacker.impersonate(self.world, to_b, "b", B, A, Role.INITIATOR)
        self._exchange_oob(forger=self.attacker.forge_oob)
        self.attacker.run_inner_pairings(self.world)

    def both_lost(self) -> bool:
        return all(
            d.session is not None
            and d.session.state is State.ABORTED
            and d.session.abort_reason is AbortReason.LINK_LOSS
            for d in (self.a, self.b)
        )

    def execute(self) -> ScenarioResult:
        world, spec = self.world, self.spec
        world.record(
            "scenario",
            seed=spec.seed,
            device_a=f"{spec.device_a.address:012x}",
            device_b=f"{spec.device_b.address:012x}",
            attacker=f"{spec.attacker.address:012x}" if spec.attacker else None,
        )
        done = lambda: self.a.roundtrip_ok  # noqa: E731
        link0 = self.direct_attempt("direct")
        if self.attacker is not None and spec.attacker.can_jam:
            try:
                self.attacker.jam_phase(world, link0)
            except CapabilityMissing as exc:
                world.record("capability_missing", actor="mitm", detail=str(exc))
        world.run_until(done)
        if self.both_lost() and not world.out_of_time:
            if self.attacker is not None and spec.attacker.can_impersonate:
                self.mitm_attempt()
            else:
                self.direct_attempt("retry")
            world.run_until(done)
        return self._result()

    def _result(self) -> ScenarioResult:
        outcome, reason = classify_outcome(self.world.transcript)
        delivery = [DELIVERY_LOG_HEADER]
        for link in self.world.links:
            delivery.extend(e.to_line() for e in link.net.log)
        attacker_keys, intercept = {}, []
        if self.attacker is not None:
            attacker_keys = dict(self.attacker.state.captured_link_keys)
            intercept = list(self.attacker.state.intercept_log)
        return ScenarioResult(
            spec=self.spec,
            outcome=outcome,
            abort_reason=reason,
            transcript=self.world.transcript,
            link_keys={"a": _key(self.a), "b": _key(self.b)},
            attacker_keys=attacker_keys,
            models={
                "a": self.a.session.model.value if self.a.session and self.a.session.model else None,
                "b": self.b.session.model.value if self.b.session and self.b.session.model else None,
            },
            delivery_log=delivery,
            intercept_log=intercept,
            slots=self.world.slot,
        )


def _key(dev: Device) -> Optional[bytes]:
    s = dev.session
    return s.link_key if s is not None and s.state is State.ENCRYPTED else None


def run_scenario(spec: ScenarioSpec) -> ScenarioResult:
    spec.validate()
    return _Run(spec).execute()


_DETECTION_NAMES = {r.name for r in DETECTION_REASONS}


def classify_outcome(transcript) -> tuple:
    """Return ``(Outcome, abort_reason)`` for a finished run.

    Precedence: PolicyBlocked > AttackDetected > AttackSucceeded >
    SecurePaired > Inconclusive.
    """
    events = list(transcript)
    victim_aborts = [e for e in events if e["kind"] == "abort" and e.get("victim")]
    if any(e["kind"] == "policy_reject" and e.get("victim") for e in events):
        return Outcome.POLICY_BLOCKED, AbortReason.POLICY_REJECT.name
    for e in victim_aborts:
        if e["reason"] in _DETECTION_NAMES:
            return Outcome.ATTACK_DETECTED, e["reason"]

    kinds = {e["kind"] for e in events}
    roundtrip = "app_roundtrip_verified" in kinds
    relayed = {e["direction"] for e in events if e["kind"] == "relay"}
    if "keys_captured" in kinds and roundtrip and {"a->b", "b->a"} <= relayed:
        return Outcome.ATTACK_SUCCEEDED, None

    scenario = next((e for e in events if e["kind"] == "scenario"), {})
    attacker_addr = scenario.get("attacker")
    victim_keys = {}
    for e in events:
        if e["kind"] == "link_key" and e.get("victim"):
            victim_keys[e["actor"]] = e.get("key")
    attacker_delivered = attacker_addr is not None and any(
        e["kind"] == "radio"
        and e["line"].split(",")[2] == attacker_addr
        and e["line"].split(",")[4] == "DELIVERED"
        for e in events
    )
    if (
        roundtrip
        and "key_captured" not in kinds
        and victim_keys.get("a") is not None
        and victim_keys.get("a") == victim_keys.get("b")
        and not attacker_delivered
    ):
        return Outcome.SECURE_PAIRED, None
    if "max_slots_reached" in kinds:
        return Outcome.INCONCLUSIVE, "MAX_SLOTS"
    return Outcome.INCONCLUSIVE, victim_aborts[-1]["reason"] if victim_aborts else None


# --- feasibility matrix ------------------------------------------------------

IO_LABELS = {
    IoCapability.DISPLAY_ONLY: "DisplayOnly",
    IoCapability.DISPLAY_YES_NO: "DisplayYesNo",
    IoCapability.KEYBOARD_ONLY: "KeyboardOnly",
    IoCapability.NO_INPUT_NO_OUTPUT: "NoInputNoOutput",
    IoCapability.KEYBOARD_DISPLAY: "KeyboardDisplay",
}
IO_BY_LABEL = {v.lower(): k for k, v in IO_LABELS.items()}


def parse_io(text: str) -> IoCapability:
    key = text.strip().replace("_", "").replace("-", "").lower()
    if key in IO_BY_LABEL:
        return IO_BY_LABEL[key]
    raise ValueError(f"unknown IO capability {text!r}")


def io_pairs() -> list:
    """The 15 unordered IO-capability pairs."""
    return list(itertools.combinations_with_replacement(list(IoCapability), 2))


@dataclass
class FeasibilityMatrix:
    rows: list  # (io_a, io_b, oob)
    columns: list  # attacker variant names
    cells: dict  # (row, column) -> success rate
    n_seeds: int

    @staticmethod
    def row_label(row) -> tuple:
        io_a, io_b, oob = row
        return f"{IO_LABELS[io_a]}/{IO_LABELS[io_b]}", "yes" if oob else "no"

    def rate(self, io_a: IoCapability, io_b: IoCapability, oob: bool, column: str) -> float:
        if (io_a, io_b, oob) not in {r for r in self.rows}:
            io_a, io_b = io_b, io_a
        return self.cells[((io_a, io_b, oob), column)]

    def records(self) -> list:
        out = []
        for row in self.rows:
            pair, oob = self.row_label(row)
            for col in self.columns:
                out.append({"io_pair": pair, "oob": oob, "attacker": col, "success_rate": self.cells[(row, col)]})
        return out


AttackerVariants = Union[list, tuple, dict]


def _variants(attacker_variants: AttackerVariants) -> dict:
    if isinstance(attacker_variants, dict):
        return dict(attacker_variants)
    return {name: AttackerConfig.preset(name) for name in attacker_variants}


def matrix_scenario(
    io_a: IoCapability,
    io_b: IoCapability,
    oob: bool,
    attacker: Optional[AttackerConfig],
    seed: int,
    user_agent: UserAgentPolicy = HONEST,
    policy=None,
) -> ScenarioSpec:
    kwargs = {} if policy is None else {"policy": policy}
    return ScenarioSpec(
        device_a=DeviceConfig(DEFAULT_ADDRESS_A, io_a, oob, **kwargs),
        device_b=DeviceConfig(DEFAULT_ADDRESS_B, io_b, oob, **kwargs),
        attacker=attacker,
        user_agent_a=user_agent,
        user_agent_b=user_agent,
        seed=seed,
    )


def feasibility_matrix(
    seeds,
    attacker_variants: AttackerVariants = ATTACKER_PRESETS,
    user_agent: UserAgentPolicy = HONEST,
) -> FeasibilityMatrix:
    """Attack success rate for every IO pair, OOB setting and attacker variant.

    Cell ``i`` runs each seed ``s`` as scenario seed ``s + i``.
    """
    seeds = list(seeds)
    if len(seeds) < 10:
        raise ValueError("the feasibility matrix needs at least 10 seeds")
    variants = _variants(attacker_variants)
    rows = [(a, b, oob) for oob in (False, True) for a, b in io_pairs()]
    cells = {}
    index = 0
    for row in rows:
        for name, cfg in variants.items():
            wins = 0
            for s in seeds:
                spec = matrix_scenario(row[0], row[1], row[2], cfg, s + index, user_agent)
                if run_scenario(spec).outcome is Outcome.ATTACK_SUCCEEDED:
                    wins += 1
            cells[(row, name)] = wins / len(seeds)
            index += 1
    return FeasibilityMatrix(rows, list(variants), cells, len(seeds))
