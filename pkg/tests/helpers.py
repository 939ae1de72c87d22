"""Shared test helpers: direct session driving and scenario construction."""

import random

from sspsim.attacker import AttackerConfig
from sspsim.harness import DEFAULT_ADDRESS_A, DEFAULT_ADDRESS_B, ScenarioSpec
from sspsim.oob import make_oob_payload
from sspsim.protocol import (
    Confirm,
    DeviceConfig,
    PasskeyInput,
    PromptKind,
    Role,
    State,
    decode_message,
    enable_encryption,
    start_pairing,
    step,
)

ADDR_A, ADDR_B = 0x0000000000A1, 0x0000000000B2


def honest_user(label, prompt, shown):
    if prompt.kind is PromptKind.CONFIRM_VALUE:
        return Confirm(True)
    other = "b" if label == "a" else "a"
    return PasskeyInput(shown.get(other, 123456))


def pair_direct(io_a, io_b, oob=False, seed=1, *, mutate=None, user=honest_user, policy_a=None, policy_b=None,
                oob_for_a=None, oob_for_b=None):
    """Run a full exchange; ``mutate(direction, msg)`` may rewrite frames in flight.

    Every frame goes through its byte encoding, so the wire layout is exercised.
    """
    kw_a = {} if policy_a is None else {"policy": policy_a}
    kw_b = {} if policy_b is None else {"policy": policy_b}
    A = DeviceConfig(ADDR_A, io_a, oob, **kw_a)
    B = DeviceConfig(ADDR_B, io_b, oob, **kw_b)
    sa, out_a = start_pairing(A, Role.INITIATOR, random.Random(f"{seed}/a"), peer_address=ADDR_B)
    sb, out_b = start_pairing(B, Role.RESPONDER, random.Random(f"{seed}/b"), peer_address=ADDR_A)
    if oob:
        sa.oob_peer = oob_for_a or make_oob_payload(ADDR_B, sb.public_key, sb.oob_r_own, 0)
        sb.oob_peer = oob_for_b or make_oob_payload(ADDR_A, sa.public_key, sa.oob_r_own, 0)
    queues = {"a->b": list(out_a), "b->a": list(out_b)}
    sessions = {"a": sa, "b": sb}
    pending = {"a": [], "b": []}
    shown = {}
    for _ in range(200):
        direction = "a->b" if queues["a->b"] else "b->a" if queues["b->a"] else None
        if direction is not None:
            msg = queues[direction].pop(0)
            if mutate is not None:
                msg = mutate(direction, msg)
            dst = direction[-1]
            _, out, prompts = step(sessions[dst], decode_message(msg.to_bytes()))
            queues[f"{dst}->{direction[0]}"] += out
            pending[dst] += prompts
            continue
        acted = False
        for label in "ab":
            for prompt in pending[label]:
                if prompt.kind is PromptKind.DISPLAY_PASSKEY:
                    shown[label] = prompt.value
        for label in "ab":
            prompts, pending[label] = pending[label], []
            for prompt in prompts:
                if not prompt.needs_decision or sessions[label].terminal:
                    continue
                _, out, more = step(sessions[label], None, user(label, prompt, shown))
                queues[f"{label}->{'b' if label == 'a' else 'a'}"] += out
                pending[label] += more
                acted = True
        if not acted:
            break
    for s in (sa, sb):
        if s.state is State.LINK_KEY_READY:
            enable_encryption(s)
    return sa, sb


def spec(io_a, io_b, *, oob=False, attacker=None, policy=None, **kw):
    """Scenario between the default addresses; ``attacker`` may be a preset name."""
    extra = {} if policy is None else {"policy": policy}
    if isinstance(attacker, str):
        attacker = AttackerConfig.preset(attacker)
    return ScenarioSpec(
        device_a=DeviceConfig(DEFAULT_ADDRESS_A, io_a, oob, **extra),
        device_b=DeviceConfig(DEFAULT_ADDRESS_B, io_b, oob, **extra),
        attacker=attacker,
        **kw,
    )
