import dataclasses
import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from helpers import ADDR_A, ADDR_B, pair_direct
from sspsim import crypto
from sspsim.oob import make_oob_payload
from sspsim.p256 import Point
from sspsim.protocol import (
    Abort,
    AbortReason,
    AssociationModel,
    CheckValueMismatch,
    CommitmentMsg,
    Confirm,
    DeviceConfig,
    DhKeyCheck,
    IoCapability,
    IoCapabilityExchange,
    NonceReveal,
    NotReady,
    PairComplete,
    PasskeyInput,
    PolicyReject,
    PublicKeyX,
    Role,
    SecurityPolicy,
    State,
    decode_message,
    enable_encryption,
    finalize_stage2,
    select_association_model,
    start_pairing,
    step,
)

IO = list(IoCapability)
DYN, DO, KO, NINO, KD = (
    IoCapability.DISPLAY_YES_NO,
    IoCapability.DISPLAY_ONLY,
    IoCapability.KEYBOARD_ONLY,
    IoCapability.NO_INPUT_NO_OUTPUT,
    IoCapability.KEYBOARD_DISPLAY,
)
DEFAULT = SecurityPolicy()


# --- association model selection


@pytest.mark.parametrize(
    "io_a,io_b,expected",
    [
        (DYN, DYN, AssociationModel.NUMERIC_COMPARISON),
        (NINO, DYN, AssociationModel.JUST_WORKS),
        (KO, DO, AssociationModel.PASSKEY_ENTRY),
        (KD, KD, AssociationModel.NUMERIC_COMPARISON),
        (KO, KO, AssociationModel.PASSKEY_ENTRY),
        (DO, DO, AssociationModel.JUST_WORKS),
        (DO, DYN, AssociationModel.JUST_WORKS),
    ],
)
def test_model_selection_examples(io_a, io_b, expected):
    assert select_association_model(io_a, io_b, False, False, DEFAULT) is expected


def test_oob_wins_when_both_sides_have_it():
    policy = SecurityPolicy(require_oob=True)
    for io_a, io_b in itertools.product(IO, IO):
        assert select_association_model(io_a, io_b, True, True, policy) is AssociationModel.OUT_OF_BAND


def test_model_selection_is_symmetric():
    for io_a, io_b, oob_a, oob_b in itertools.product(IO, IO, (False, True), (False, True)):
        assert select_association_model(io_a, io_b, oob_a, oob_b, DEFAULT) is select_association_model(
            io_b, io_a, oob_b, oob_a, DEFAULT
        )


def test_policy_rejections():
    with pytest.raises(PolicyReject):
        select_association_model(NINO, NINO, False, False, SecurityPolicy(allow_just_works=False))
    with pytest.raises(PolicyReject):
        select_association_model(DYN, DYN, True, False, SecurityPolicy(require_oob=True))
    with pytest.raises(PolicyReject):
        select_association_model(DYN, NINO, False, False, SecurityPolicy(require_mitm_protection=True))
    assert select_association_model(DYN, DYN, False, False, SecurityPolicy(allow_just_works=False)) is (
        AssociationModel.NUMERIC_COMPARISON
    )


def test_device_address_must_fit_48_bits():
    with pytest.raises(ValueError):
        DeviceConfig(1 << 48, DYN)


# --- wire format


def test_message_layout():
    msg = IoCapabilityExchange(KD, True)
    assert msg.to_bytes() == bytes([0x01, 0x00, 0x02, 0x04, 0x01])
    pk = Point(1, 2)
    raw = PublicKeyX(pk).to_bytes()
    assert raw[:3] == bytes([0x02, 0x00, 0x40]) and raw[3:] == crypto.point_to_bytes(pk)
    assert PairComplete().to_bytes() == bytes([0x06, 0x00, 0x00])
    assert Abort(AbortReason.USER_REJECTED).to_bytes() == bytes([0x07, 0x00, 0x01, 0x03])


messages = st.one_of(
    st.builds(IoCapabilityExchange, st.sampled_from(IO), st.booleans()),
    st.builds(lambda x, y: PublicKeyX(Point(x, y)), st.integers(0, 2**256 - 1), st.integers(0, 2**256 - 1)),
    st.builds(CommitmentMsg, st.binary(min_size=16, max_size=16)),
    st.builds(NonceReveal, st.binary(min_size=16, max_size=16)),
    st.builds(DhKeyCheck, st.binary(min_size=16, max_size=16)),
    st.just(PairComplete()),
    st.builds(Abort, st.sampled_from(list(AbortReason))),
)


@given(messages)
def test_messages_round_trip(msg):
    raw = msg.to_bytes()
    assert int.from_bytes(raw[1:3], "big") == len(raw) - 3
    assert decode_message(raw) == msg


def test_decode_rejects_garbage():
    with pytest.raises(ValueError):
        decode_message(b"\x99\x00\x00")
    with pytest.raises(ValueError):
        decode_message(b"\x03\x00\x10abc")


# --- session entry


def test_start_pairing_initiator_and_responder():
    cfg = DeviceConfig(ADDR_A, DYN)
    s, out = start_pairing(cfg, Role.INITIATOR, random.Random(1), peer_address=ADDR_B)
    assert s.state is State.PUBLIC_KEY_SENT
    assert [type(m) for m in out] == [IoCapabilityExchange, PublicKeyX]
    _, again = start_pairing(cfg, Role.INITIATOR, random.Random(1), peer_address=ADDR_B)
    assert [m.to_bytes() for m in out] == [m.to_bytes() for m in again]

    r, rout = start_pairing(DeviceConfig(ADDR_B, DYN), Role.RESPONDER, random.Random(2), peer_address=ADDR_A)
    assert r.state is State.IDLE and rout == []
    _, reply, _ = step(r, out[0])
    assert [type(m) for m in reply] == [IoCapabilityExchange]
    _, reply, _ = step(r, out[1])
    assert isinstance(reply[0], PublicKeyX) and r.state >= State.PUBLIC_KEY_SENT


# --- honest runs


@pytest.mark.parametrize("oob", [False, True])
@pytest.mark.parametrize("io_a,io_b", list(itertools.product(IO, IO)))
def test_honest_pairing_all_io_pairs(io_a, io_b, oob):
    sa, sb = pair_direct(io_a, io_b, oob, seed=hash((io_a, io_b, oob)) & 0xFFFF)
    assert sa.state is State.ENCRYPTED and sb.state is State.ENCRYPTED
    assert sa.link_key == sb.link_key and len(sa.link_key) == 16
    assert sa.model is sb.model
    assert sa.dh == sb.dh == oracles.ecdh(sa.own_keys.private_scalar, tuple(sb.public_key))


def test_link_key_matches_independent_derivation():
    sa, sb = pair_direct(DYN, DYN, seed=4)
    expected = oracles.f2(sa.dh, sa.n_own, sb.n_own, ADDR_A, ADDR_B)
    assert sa.link_key == expected


def test_completion_events():
    sa, sb = pair_direct(DYN, DYN, seed=2)
    for s in (sa, sb):
        assert "LinkKeyNotification" in s.events and "EncryptionChange" in s.events
    assert "AuthenticationComplete" in sa.events
    assert "AuthenticationComplete" not in sb.events


def test_numeric_comparison_prompts_show_equal_values():
    shown = []

    def user(label, prompt, _):
        shown.append(prompt.value)
        return Confirm(True)

    sa, sb = pair_direct(DYN, DYN, seed=3, user=user)
    assert len(shown) == 2 and shown[0] == shown[1] == sa.displayed_value
    assert shown[0] == oracles.g(sa.public_key.x, sb.public_key.x, sa.n_own, sb.n_own)


def test_user_rejection_aborts():
    sa, sb = pair_direct(DYN, DYN, seed=3, user=lambda label, p, s: Confirm(label != "b"))
    assert sb.abort_reason is AbortReason.USER_REJECTED
    assert sa.state is State.ABORTED and sa.peer_abort_reason is AbortReason.USER_REJECTED
    assert sa.link_key is None and sb.link_key is None


def test_wrong_passkey_is_caught():
    sa, sb = pair_direct(KO, DO, seed=5, user=lambda label, p, s: PasskeyInput((s["b"] + 1) % 10**6))
    assert AbortReason.COMMITMENT_MISMATCH in (sa.abort_reason, sb.abort_reason)
    assert sa.link_key is None and sb.link_key is None


def test_both_keyboards_share_one_passkey():
    sa, sb = pair_direct(KO, KO, seed=6, user=lambda label, p, s: PasskeyInput(424242))
    assert sa.link_key == sb.link_key and sa.passkey == sb.passkey == 424242


def test_missing_oob_data_aborts():
    cfg_a, cfg_b = DeviceConfig(ADDR_A, DYN, True), DeviceConfig(ADDR_B, DYN, True)
    sa, out = start_pairing(cfg_a, Role.INITIATOR, random.Random(1), peer_address=ADDR_B)
    sb, _ = start_pairing(cfg_b, Role.RESPONDER, random.Random(2), peer_address=ADDR_A)
    step(sb, out[0])
    assert sb.abort_reason is AbortReason.MISSING_OOB


def test_oob_payload_for_a_different_key_is_rejected():
    rogue = crypto.generate_keypair(random.Random(77)).public_point
    forged = make_oob_payload(ADDR_A, rogue, bytes(16), 0)
    sa, sb = pair_direct(DYN, DYN, True, seed=8, oob_for_b=forged)
    assert sb.abort_reason is AbortReason.COMMITMENT_MISMATCH
    assert oracles.f1(sa.public_key.x, sa.public_key.x, bytes(16), forged.r) != forged.c


def test_out_of_order_message_is_a_violation():
    s, _ = start_pairing(DeviceConfig(ADDR_B, DYN), Role.RESPONDER, random.Random(1), peer_address=ADDR_A)
    _, out, _ = step(s, NonceReveal(bytes(16)))
    assert s.abort_reason is AbortReason.PROTOCOL_VIOLATION
    assert out == [Abort(AbortReason.PROTOCOL_VIOLATION)]


def test_tampered_check_value_is_detected():
    def mutate(direction, msg):
        if isinstance(msg, DhKeyCheck) and direction == "a->b":
            return DhKeyCheck(bytes(16))
        return msg

    sa, sb = pair_direct(DYN, NINO, seed=9, mutate=mutate)
    assert sb.abort_reason is AbortReason.CHECK_VALUE_MISMATCH
    assert sa.abort_reason is AbortReason.PEER_ABORT


def test_finalize_and_encryption_preconditions():
    s, _ = start_pairing(DeviceConfig(ADDR_A, DYN), Role.INITIATOR, random.Random(1), peer_address=ADDR_B)
    with pytest.raises(CheckValueMismatch):
        finalize_stage2(s)
    with pytest.raises(NotReady):
        enable_encryption(s)
    with pytest.raises(NotReady):
        s.seal(b"x")


def test_encrypted_sessions_exchange_data():
    sa, sb = pair_direct(DYN, DYN, seed=12)
    assert sb.unseal(sa.seal(b"payload")) == b"payload"
    third, _ = pair_direct(DYN, DYN, seed=13)
    with pytest.raises(crypto.UnsealFailure):
        third.unseal(sa.seal(b"payload"))


# --- stage-1 soundness by transcript mutation


def _flip_public_key(bit, direction_wanted):
    def mutate(direction, msg):
        if direction == direction_wanted and isinstance(msg, PublicKeyX):
            raw = bytearray(crypto.point_to_bytes(msg.point))
            raw[bit // 8] ^= 0x80 >> (bit % 8)
            return PublicKeyX(crypto.point_from_bytes(bytes(raw)))
        return msg

    return mutate


@pytest.mark.parametrize("model_ios", [(DYN, DYN, True), (KO, DO, False)], ids=["oob", "passkey"])
def test_flipped_public_key_x_causes_commitment_mismatch(model_ios):
    io_a, io_b, oob = model_ios
    rng = random.Random(21)
    for seed in range(100):
        bit = rng.randrange(256)  # x-coordinate bits
        direction = rng.choice(["a->b", "b->a"])
        sa, sb = pair_direct(io_a, io_b, oob, seed=seed, mutate=_flip_public_key(bit, direction))
        # Whichever side checks a commitment first catches it; the other sees PEER_ABORT.
        assert AbortReason.COMMITMENT_MISMATCH in (sa.abort_reason, sb.abort_reason), (seed, bit, direction)
        assert sa.link_key is None and sb.link_key is None


@pytest.mark.parametrize("model_ios", [(DYN, DYN, True), (KO, DO, False)], ids=["oob", "passkey"])
def test_flipped_public_key_y_aborts(model_ios):
    # The commitments bind x only; a y flip leaves the curve and fails validation.
    io_a, io_b, oob = model_ios
    rng = random.Random(22)
    for seed in range(20):
        bit = 256 + rng.randrange(256)
        sa, sb = pair_direct(io_a, io_b, oob, seed=seed, mutate=_flip_public_key(bit, "a->b"))
        assert sb.state is State.ABORTED and sa.state is State.ABORTED
        assert sa.link_key is None and sb.link_key is None


@given(st.sampled_from(IO), st.sampled_from(IO), st.booleans(), st.integers(0, 2**16), st.integers(0, 40))
def test_aborted_sessions_never_hold_a_link_key(io_a, io_b, oob, seed, cut):
    count = {"n": 0}

    def mutate(direction, msg):
        count["n"] += 1
        if count["n"] == cut and isinstance(msg, (CommitmentMsg, NonceReveal, DhKeyCheck)):
            return dataclasses.replace(msg, value=bytes(16))
        return msg

    sa, sb = pair_direct(io_a, io_b, oob, seed=seed, mutate=mutate)
    for s in (sa, sb):
        if s.state is State.ABORTED:
            assert s.link_key is None
        else:
            assert s.state is State.ENCRYPTED and s.link_key is not None
