"""Read scenarios from INI-style files.

Example::

    [device.a]
    address = 00:11:22:33:44:55
    io = DisplayYesNo
    oob = no
    user_agent = honest-comparing

    [device.b]
    address = 66:77:88:99:aa:bb
    io = NoInputNoOutput

    [attacker]
    preset = full

    [oob]
    attacker_can_read = no
    attacker_can_modify = no
    frequency = fixed:0

    [run]
    seed = 7
    max_slots = 10000

Device keys: ``address``, ``io``, ``oob``, ``allow_just_works``,
``require_oob``, ``require_mitm_protection``, ``user_agent``.  Attacker keys:
``preset`` (full, downgrade, jam-only, none) then any of ``can_jam``,
``can_impersonate``, ``can_relay``, ``knows_hop_seed``, ``spoofed_io``, ``io``,
``modify_relay``, ``address``.  ``[oob]`` may also list
``attacker_known_freqs`` as comma-separated ids.  ``[run]`` takes ``seed``,
``max_slots``, ``passkey``, ``supervision_timeout`` and ``payload``.
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Optional

from .attacker import AttackerConfig
from .harness import InvalidSpec, ScenarioSpec, parse_io
from .oob import FrequencySchedule, OobChannelConfig
from .protocol import DeviceConfig, SecurityPolicy
from .report import IoFailure
from .sim import HONEST, UserAgentPolicy

_SECTIONS = {"device.a", "device.b", "attacker", "oob", "run"}
_DEVICE_KEYS = {"address", "io", "oob", "allow_just_works", "require_oob", "require_mitm_protection", "user_agent"}
_ATTACKER_KEYS = {
    "preset", "can_jam", "can_impersonate", "can_relay", "knows_hop_seed",
    "spoofed_io", "io", "modify_relay", "address",
}
_OOB_KEYS = {"attacker_can_read", "attacker_can_modify", "frequency", "attacker_known_freqs"}
_RUN_KEYS = {"seed", "max_slots", "passkey", "supervision_timeout", "payload"}


def parse_address(text: str) -> int:
    cleaned = text.strip().lower().replace(":", "").replace("-", "")
    if cleaned.startswith("0x"):
        cleaned = cleaned[2:]
    try:
        value = int(cleaned, 16)
    except ValueError:
        raise InvalidSpec(f"bad device address {text!r}") from None
    if len(cleaned) > 12:
        raise InvalidSpec(f"device address {text!r} is longer than 48 bits")
    return value


def parse_schedule(text: str) -> FrequencySchedule:
    mode, _, value = text.strip().partition(":")
    try:
        number = int(value, 0) if value else 0
        if mode == "fixed":
            return FrequencySchedule.fixed(number)
        if mode == "varying":
            return FrequencySchedule.varying(number)
    except ValueError as exc:
        raise InvalidSpec(f"bad frequency schedule {text!r}: {exc}") from None
    raise InvalidSpec(f"frequency schedule must be fixed:N or varying:SEED, got {text!r}")


def _check_keys(section: configparser.SectionProxy, allowed: set) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise InvalidSpec(f"[{section.name}] has unknown keys: {', '.join(sorted(unknown))}")


def _flag(section: configparser.SectionProxy, key: str, default: bool) -> bool:
    try:
        return section.getboolean(key, fallback=default)
    except ValueError:
        raise InvalidSpec(f"[{section.name}] {key} must be yes or no") from None


def _int(section: configparser.SectionProxy, key: str, default: Optional[int], base: int = 0) -> Optional[int]:
    raw = section.get(key)
    if raw is None:
        return default
    try:
        return int(raw, base)
    except ValueError:
        raise InvalidSpec(f"[{section.name}] {key} must be an integer") from None


def _io(section: configparser.SectionProxy, key: str):
    raw = section.get(key)
    if raw is None or raw.strip().lower() == "none":
        return None
    try:
        return parse_io(raw)
    except ValueError as exc:
        raise InvalidSpec(f"[{section.name}] {exc}") from None


def _device(section: configparser.SectionProxy) -> tuple:
    _check_keys(section, _DEVICE_KEYS)
    if "address" not in section or "io" not in section:
        raise InvalidSpec(f"[{section.name}] needs address and io")
    policy = SecurityPolicy(
        allow_just_works=_flag(section, "allow_just_works", True),
        require_oob=_flag(section, "require_oob", False),
        require_mitm_protection=_flag(section, "require_mitm_protection", False),
    )
    io = _io(section, "io")
    if io is None:
        raise InvalidSpec(f"[{section.name}] io cannot be none")
    try:
        config = DeviceConfig(parse_address(section["address"]), io, _flag(section, "oob", False), policy)
        agent = UserAgentPolicy.parse(section["user_agent"]) if "user_agent" in section else HONEST
    except ValueError as exc:
        raise InvalidSpec(f"[{section.name}] {exc}") from None
    return config, agent


def _attacker(section: configparser.SectionProxy) -> Optional[AttackerConfig]:
    _check_keys(section, _ATTACKER_KEYS)
    try:
        base = AttackerConfig.preset(section.get("preset", "full").strip())
    except ValueError as exc:
        raise InvalidSpec(str(exc)) from None
    if base is None:
        return None
    changes = {}
    for key in ("can_jam", "can_impersonate", "can_relay", "knows_hop_seed"):
        if key in section:
            changes[key] = _flag(section, key, getattr(base, key))
    for key in ("spoofed_io", "io"):
        if key in section:
            changes[key] = _io(section, key)
    if "modify_relay" in section:
        changes["modify_relay"] = section["modify_relay"].encode()
    if "address" in section:
        changes["address"] = parse_address(section["address"])
    return dataclasses.replace(base, **changes)


def _oob(section: Optional[configparser.SectionProxy]) -> tuple:
    if section is None:
        return OobChannelConfig(), None
    _check_keys(section, _OOB_KEYS)
    cfg = OobChannelConfig(
        attacker_can_read=_flag(section, "attacker_can_read", False),
        attacker_can_modify=_flag(section, "attacker_can_modify", False),
        frequency_schedule=parse_schedule(section.get("frequency", "fixed:0")),
    )
    known = None
    if section.get("attacker_known_freqs", "").strip():
        try:
            known = frozenset(int(v, 0) for v in section["attacker_known_freqs"].split(","))
        except ValueError:
            raise InvalidSpec("[oob] attacker_known_freqs must be comma-separated integers") from None
    return cfg, known


def parse_scenario(text: str, *, seed: Optional[int] = None) -> ScenarioSpec:
    """Build a :class:`ScenarioSpec`; ``seed`` overrides ``[run] seed``."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidSpec(f"unreadable scenario: {exc}") from None
    unknown = set(parser.sections()) - _SECTIONS
    if unknown:
        raise InvalidSpec(f"unknown sections: {', '.join(sorted(unknown))}")
    for name in ("device.a", "device.b"):
        if not parser.has_section(name):
            raise InvalidSpec(f"missing [{name}] section")
    device_a, agent_a = _device(parser["device.a"])
    device_b, agent_b = _device(parser["device.b"])
    attacker = _attacker(parser["attacker"]) if parser.has_section("attacker") else None
    oob_config, known = _oob(parser["oob"] if parser.has_section("oob") else None)
    run = parser["run"] if parser.has_section("run") else parser[parser.default_section]
    if parser.has_section("run"):
        _check_keys(run, _RUN_KEYS)
    spec = ScenarioSpec(
        device_a=device_a,
        device_b=device_b,
        attacker=attacker,
        user_agent_a=agent_a,
        user_agent_b=agent_b,
        oob_config=oob_config,
        seed=seed if seed is not None else _int(run, "seed", 0),
        max_slots=_int(run, "max_slots", 10_000),
        passkey=_int(run, "passkey", None, base=10),  # six digits, leading zeros allowed
        supervision_timeout=_int(run, "supervision_timeout", 100),
        app_payload=run.get("payload", "hello").encode(),
        attacker_known_freqs=known,
    )
    spec.validate()
    return spec


def load_scenario(path, *, seed: Optional[int] = None) -> ScenarioSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text, seed=seed)
