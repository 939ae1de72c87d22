"""Simulation of Bluetooth Secure Simple Pairing and a man-in-the-middle attack on it."""

from .attacker import Attacker, AttackerConfig, CapabilityMissing
from .harness import (
    FeasibilityMatrix,
    InvalidSpec,
    Outcome,
    ScenarioResult,
    ScenarioSpec,
    classify_outcome,
    feasibility_matrix,
    run_scenario,
)
from .oob import FrequencySchedule, OobChannelConfig
from .protocol import AssociationModel, DeviceConfig, IoCapability, SecurityPolicy
from .report import IoFailure, emit_report
from .sim import UserAgentPolicy

__all__ = [
    "AssociationModel",
    "Attacker",
    "AttackerConfig",
    "CapabilityMissing",
    "DeviceConfig",
    "FeasibilityMatrix",
    "FrequencySchedule",
    "InvalidSpec",
    "IoCapability",
    "IoFailure",
    "OobChannelConfig",
    "Outcome",
    "ScenarioResult",
    "ScenarioSpec",
    "SecurityPolicy",
    "UserAgentPolicy",
    "classify_outcome",
    "emit_report",
    "feasibility_matrix",
    "run_scenario",
]
