"""Command-line entry point: ``pair``, ``matrix`` and ``demo``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .attacker import ATTACKER_PRESETS, AttackerConfig
from .harness import (
    DEFAULT_ADDRESS_A,
    DEFAULT_ADDRESS_B,
    InvalidSpec,
    ScenarioSpec,
    feasibility_matrix,
    run_scenario,
)
from .protocol import DeviceConfig, IoCapability, SecurityPolicy
from .report import FORMATS, IoFailure, annotate_transcript, emit_report, render
from .scenario_file import load_scenario
from .sim import HONEST, UserAgentPolicy

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

# model -> (device a, device b, attacker used with --attack)
DEMOS = {
    "just-works": (
        DeviceConfig(DEFAULT_ADDRESS_A, IoCapability.DISPLAY_YES_NO),
        DeviceConfig(DEFAULT_ADDRESS_B, IoCapability.NO_INPUT_NO_OUTPUT),
        "full",
    ),
    "numeric": (
        DeviceConfig(DEFAULT_ADDRESS_A, IoCapability.DISPLAY_YES_NO),
        DeviceConfig(DEFAULT_ADDRESS_B, IoCapability.DISPLAY_YES_NO),
        "downgrade",
    ),
    "passkey": (
        DeviceConfig(DEFAULT_ADDRESS_A, IoCapability.KEYBOARD_ONLY),
        DeviceConfig(DEFAULT_ADDRESS_B, IoCapability.DISPLAY_ONLY),
        "downgrade",
    ),
    "oob": (
        DeviceConfig(DEFAULT_ADDRESS_A, IoCapability.DISPLAY_YES_NO, True, SecurityPolicy(require_oob=True)),
        DeviceConfig(DEFAULT_ADDRESS_B, IoCapability.DISPLAY_YES_NO, True, SecurityPolicy(require_oob=True)),
        "full",
    ),
}


def demo_spec(model: str, attack: bool, seed: int = 0) -> ScenarioSpec:
    device_a, device_b, preset = DEMOS[model]
    return ScenarioSpec(
        device_a=device_a,
        device_b=device_b,
        attacker=AttackerConfig.preset(preset) if attack else None,
        seed=seed,
    )


def _cmd_pair(args) -> int:
    spec = load_scenario(args.scenario, seed=args.seed)
    result = run_scenario(spec)
    emit_report(result, args.format, args.out, figures=args.out is not None)
    return EXIT_OK


def _cmd_matrix(args) -> int:
    if args.seeds < 10:
        raise InvalidSpec("--seeds must be at least 10")
    variants = args.attacker or list(ATTACKER_PRESETS)
    agent = UserAgentPolicy.parse(args.user_agent) if args.user_agent else HONEST
    seeds = range(args.base_seed, args.base_seed + args.seeds)
    matrix = feasibility_matrix(seeds, variants, agent)
    emit_report(matrix, args.format, args.out, figures=args.out is not None)
    return EXIT_OK


def _cmd_demo(args) -> int:
    result = run_scenario(demo_spec(args.model, args.attack, args.seed))
    text = annotate_transcript(result.transcript) + "\n" + render(result, "text")
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sspsim", description="Bluetooth Secure Simple Pairing MITM simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    pair = sub.add_parser("pair", help="run one scenario file")
    pair.add_argument("--scenario", required=True, help="scenario file (INI sections)")
    pair.add_argument("--seed", type=int, default=None, help="override the scenario's seed")
    pair.add_argument("--format", choices=FORMATS, default="text")
    pair.add_argument("--out", default=None, help="output file; a PNG radio timeline is written next to it")
    pair.set_defaults(func=_cmd_pair)

    matrix = sub.add_parser("matrix", help="attack success over all IO pairs")
    matrix.add_argument("--seeds", type=int, required=True, help="seeds per cell (at least 10)")
    matrix.add_argument("--base-seed", type=int, default=0)
    matrix.add_argument("--attacker", choices=ATTACKER_PRESETS, action="append",
                        help="attacker variant; repeatable, default all")
    matrix.add_argument("--user-agent", default=None, help="user policy for both devices, e.g. always-accept")
    matrix.add_argument("--format", choices=FORMATS, default="text")
    matrix.add_argument("--out", default=None, help="output file; a PNG heatmap is written next to it")
    matrix.set_defaults(func=_cmd_matrix)

    demo = sub.add_parser("demo", help="canned pairing run with an annotated transcript")
    demo.add_argument("--model", choices=sorted(DEMOS), required=True)
    demo.add_argument("--attack", action="store_true", help="add the attacker suited to the model")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--out", default=None)
    demo.set_defaults(func=_cmd_demo)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidSpec as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IoFailure as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
