"""Cycle-level interrupt latency models for virtualized RISC-V CLIC systems."""

from .alternatives import AiaModel, ClicVanillaModel, Imsic, PlicModel
from .delivery import MsiBus, WiredFabric
from .errors import AccessFault, InvalidConfig, ProtocolError, UnmappedAddress, ValidationError, VclicSimError
from .harness import LatencyStats, RunResult, compare, export, load_scenario, run_scenario, sweep
from .hart import CsrFile, Frame, Hart, HartState, TakeDecision, TakeKind, eval_take
from .regs import (
    HS_CTX,
    M_CTX,
    AccessContext,
    ClicConfig,
    InterruptCell,
    Priv,
    Selection,
    Trigger,
    VClic,
    decode_ctl,
    encode_ctl,
)
from .scenario import Scenario, parse_scenario
from .sw_stack import (
    CacheState,
    CostProfile,
    HypervisorKind,
    HypervisorModel,
    MicroArchState,
    VmEntry,
    apply_jitter,
    emulation_latency,
    get_profile,
    irq_context_cost,
    schedule,
    vm_context_switch_cost,
)
from .trace import TraceEvent

__version__ = "0.1.0"

__all__ = [
    "AccessContext",
    "AccessFault",
    "AiaModel",
    "CacheState",
    "ClicConfig",
    "ClicVanillaModel",
    "CostProfile",
    "CsrFile",
    "Frame",
    "HS_CTX",
    "Hart",
    "HartState",
    "HypervisorKind",
    "HypervisorModel",
    "Imsic",
    "InterruptCell",
    "InvalidConfig",
    "LatencyStats",
    "M_CTX",
    "MicroArchState",
    "MsiBus",
    "PlicModel",
    "Priv",
    "ProtocolError",
    "RunResult",
    "Scenario",
    "Selection",
    "TakeDecision",
    "TakeKind",
    "TraceEvent",
    "Trigger",
    "UnmappedAddress",
    "VClic",
    "ValidationError",
    "VclicSimError",
    "VmEntry",
    "WiredFabric",
    "apply_jitter",
    "compare",
    "decode_ctl",
    "emulation_latency",
    "encode_ctl",
    "eval_take",
    "export",
    "get_profile",
    "irq_context_cost",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "schedule",
    "sweep",
    "vm_context_switch_cost",
]
