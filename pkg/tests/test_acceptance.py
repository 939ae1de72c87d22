"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import itertools
import random
from pathlib import Path

import pytest

import oracles
from helpers import spec
from sspsim import crypto, p256
from sspsim.attacker import AttackerConfig
from sspsim.harness import Outcome, feasibility_matrix, run_scenario
from sspsim.oob import FrequencySchedule, OobChannelConfig, attacker_oob_intercept_possible
from sspsim.p256 import Point
from sspsim.protocol import AssociationModel, IoCapability, SecurityPolicy, select_association_model
from sspsim.radio import HopSequence, jamming_trial
from sspsim.report import render
from sspsim.sim import UserAgentPolicy

IO = list(IoCapability)
DYN = IoCapability.DISPLAY_YES_NO
NINO = IoCapability.NO_INPUT_NO_OUTPUT
GOLDEN = Path(__file__).parent / "golden" / "crypto_vectors.txt"


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
        assert ok, detail

    return emit


def test_criterion_01_honest_completeness(report):
    total = good = 0
    failures = []
    for cell, (io_a, io_b, oob) in enumerate(itertools.product(IO, IO, (False, True))):
        for s in range(100):
            result = run_scenario(spec(io_a, io_b, oob=oob, seed=s + 1000 * cell))
            total += 1
            keys = result.link_keys
            if result.outcome is Outcome.SECURE_PAIRED and keys["a"] is not None and keys["a"] == keys["b"]:
                good += 1
            elif len(failures) < 3:
                failures.append((io_a.name, io_b.name, oob, s, result.outcome.value))
    report(1, "honest completeness", good == total, f"{good}/{total} SecurePaired with equal keys {failures or ''}")


def test_criterion_02_just_works_attack(report):
    wins = 0
    for s in range(100):
        r = run_scenario(spec(DYN, NINO, attacker="full", seed=s))
        relayed = [rec.plaintext for rec in r.intercept_log]
        if (
            r.outcome is Outcome.ATTACK_SUCCEEDED
            and len(r.attacker_keys) == 2
            and r.attacker_keys == r.link_keys
            and relayed[:1] == [b"hello"]
        ):
            wins += 1
    report(2, "Just Works MITM", wins == 100, f"{wins}/100 AttackSucceeded with relayed payload and 2 keys")


def test_criterion_03_downgrade(report):
    accept = UserAgentPolicy.parse("always-accept")
    wins = 0
    for s in range(100):
        r = run_scenario(spec(DYN, DYN, attacker="downgrade", seed=s, user_agent_a=accept, user_agent_b=accept))
        if r.outcome is Outcome.ATTACK_SUCCEEDED and r.models == {"a": "JustWorks", "b": "JustWorks"}:
            wins += 1
    report(3, "NoInputNoOutput downgrade", wins == 100, f"{wins}/100 JustWorks + AttackSucceeded")


def test_criterion_04_numeric_comparison_detection(report):
    detected = 0
    for s in range(1000):
        r = run_scenario(spec(DYN, DYN, attacker="full", seed=s))
        detected += r.outcome is Outcome.ATTACK_DETECTED
    report(4, "Numeric Comparison detection", detected >= 999, f"{detected}/1000 AttackDetected")


def test_criterion_05_oob_countermeasure(report):
    policy = SecurityPolicy(require_oob=True)
    detected = 0
    for s in range(100):
        r = run_scenario(spec(DYN, DYN, oob=True, policy=policy, attacker="full", seed=s))
        detected += r.outcome is Outcome.ATTACK_DETECTED and r.abort_reason == "COMMITMENT_MISMATCH"
    exposed = AttackerConfig(oob_access=OobChannelConfig(attacker_can_read=True, attacker_can_modify=True))
    broken = 0
    for s in range(100):
        r = run_scenario(spec(DYN, DYN, oob=True, policy=policy, attacker=exposed, seed=s))
        broken += r.outcome is Outcome.ATTACK_SUCCEEDED
    ok = detected == 100 and broken == 100
    report(5, "OOB countermeasure", ok, f"default {detected}/100 CommitmentMismatch; read+modify {broken}/100 succeeded")


def test_criterion_06_just_works_policy(report):
    policy = SecurityPolicy(allow_just_works=False)
    checked = blocked = 0
    for io_a, io_b in itertools.product(IO, IO):
        if select_association_model(io_a, io_b, False, False, SecurityPolicy()) is AssociationModel.JUST_WORKS:
            for s in range(5):
                checked += 1
                blocked += run_scenario(spec(io_a, io_b, policy=policy, seed=s)).outcome is Outcome.POLICY_BLOCKED
        # The downgrade attacker always steers selection to Just Works.
        checked += 1
        r = run_scenario(spec(io_a, io_b, policy=policy, attacker="downgrade", seed=7))
        blocked += r.outcome is Outcome.POLICY_BLOCKED
    report(6, "Just Works disabled by policy", blocked == checked, f"{blocked}/{checked} PolicyBlocked")


def test_criterion_07_jamming(report):
    victims = HopSequence.for_master(0x001122334455, 0x1234)
    wrong = HopSequence.for_master(0x001122334455, 0x4321)
    right_delivered = jamming_trial(victims, victims, 10_000)
    rate = jamming_trial(victims, wrong, 10_000) / 10_000
    ok = right_delivered == 0 and abs(rate - 78 / 79) <= 0.02
    report(7, "hop-following jamming", ok,
           f"right seed {right_delivered}/10000 delivered; wrong seed rate {rate:.4f} vs {78 / 79:.4f}")


def test_criterion_08_crypto_known_answers(report):
    problems = []
    d = 0x7D7DC5F71EB29DDAF80D6214632EEAE03D9058AF1FB6D22ED80BADB62BC1A534
    q = Point(0x700C48F77F56584C5CC632CA65640DB91B6BACCE3A4DF6B42CE7CC838833D287,
              0xDB71E509E3FD9B060DDB20BA5C51DCC5948D46FBF640DFE0441782CAB85FA4AC)
    if tuple(p256.mult_base(d)) != (0xEAD218590119E8876B29146FF89CA61770C4EDBBF97D38CE385ED281D8A6B230,
                                    0x28AF61281FD35E2FA7002523ACC85A429CB06EE6648325389F59EDFCE1405141):
        problems.append("NIST public key")
    if crypto.derive_dh_key(d, q).hex() != "46fc62106420ff012e54a434fbdd2d25ccc5852060561e68040dd7778997bd7b":
        problems.append("NIST shared secret")
    rng = random.Random(8)
    for _ in range(20):
        a, b = rng.randrange(1, p256.N), rng.randrange(1, p256.N)
        pa = p256.mult_base(a)
        if tuple(pa) != oracles.public_point(a) or crypto.derive_dh_key(b, pa) != oracles.ecdh(b, tuple(pa)):
            problems.append(f"scalar {a:#x}")
    vectors = 0
    for line in GOLDEN.read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        name, *pairs = line.split()
        f = dict(p.split("=", 1) for p in pairs)
        h = bytes.fromhex
        pt = lambda k: crypto.point_from_bytes(h(f[k]))  # noqa: E731
        if name == "f1":
            got = crypto.f1_commit(pt("pka"), pt("pkb"), h(f["n"]), h(f["r"])).hex()
        elif name == "g":
            got = str(crypto.g_verify_value(pt("pka"), pt("pkb"), h(f["na"]), h(f["nb"])))
        elif name == "f2":
            got = crypto.f2_link_key(h(f["dh"]), h(f["na"]), h(f["nb"]), int(f["addr_a"], 16), int(f["addr_b"], 16)).hex()
        else:
            got = crypto.f3_check_value(h(f["dh"]), h(f["na"]), h(f["nb"]), h(f["r"]), int(f["io"], 16),
                                        int(f["addr_a"], 16), int(f["addr_b"], 16)).hex()
        vectors += 1
        if got != f["out"]:
            problems.append(f"{name} vector {vectors}")
    ok = not problems and vectors >= 10
    report(8, "crypto known answers", ok, f"NIST + 20 reference scalars + {vectors} golden vectors; problems={problems}")


def test_criterion_09_determinism(report):
    specs = [
        spec(DYN, NINO, attacker="full", seed=11),
        spec(DYN, DYN, attacker="downgrade", seed=12),
        spec(DYN, DYN, oob=True, attacker="full", seed=13),
        spec(IoCapability.KEYBOARD_ONLY, IoCapability.DISPLAY_ONLY, seed=14),
    ]
    same = sum(run_scenario(s).transcript.serialize() == run_scenario(s).transcript.serialize() for s in specs)
    seeds = range(500, 510)
    first = render(feasibility_matrix(seeds), "csv")
    second = render(feasibility_matrix(seeds), "csv")
    ok = same == len(specs) and first == second
    report(9, "determinism", ok, f"{same}/{len(specs)} transcripts identical; matrix identical={first == second}")


def test_criterion_10_varying_oob_frequency(report):
    cfg = OobChannelConfig(attacker_can_read=True, frequency_schedule=FrequencySchedule.varying(0xC0FFEE))
    known = {0x2A2A}
    hits = sum(attacker_oob_intercept_possible(cfg, known, c) for c in range(10_000))
    report(10, "frequency-varying OOB", hits <= 10, f"{hits}/10000 sessions interceptable")
