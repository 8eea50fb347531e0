"""Radial distribution feeder: model, power flow, device controls, QSTS."""

from .model import (
    Bus,
    CapacitorSpec,
    FeederModel,
    Line,
    LoadSpec,
    PvPlant,
    RegulatorSpec,
    TransformerEdge,
    load_feeder,
    penetration_level,
)
from .powerflow import PowerFlowResult, solve_powerflow
from .controls import ControlAction, DeviceStates, control_step
from .qsts import QstsResult, StepRecord, audit_device_constraints, run_qsts, voltage_profile

__all__ = [
    "Bus",
    "CapacitorSpec",
    "ControlAction",
    "DeviceStates",
    "FeederModel",
    "Line",
    "LoadSpec",
    "PowerFlowResult",
    "PvPlant",
    "QstsResult",
    "RegulatorSpec",
    "StepRecord",
    "TransformerEdge",
    "audit_device_constraints",
    "control_step",
    "load_feeder",
    "penetration_level",
    "run_qsts",
    "solve_powerflow",
    "voltage_profile",
]
