"""Software-side cost models: ISR entry/exit, trap-and-emulate, VM switching, jitter.

All costs are in IC clock cycles.  The built-in ``cheshire-50mhz`` profile
is calibrated so that a single-line experiment reproduces the reference
ratios (see ``docs/calibration.md``); its absolute values are fitted
knobs, not measurements.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .errors import InvalidConfig, ValidationError

PROFILE_DIR_ENV = "VCLICSIM_PROFILE_DIR"

# emulated MMIO accesses on the virtual interrupt path: claim + complete + decode for
# the PLIC, pending/enable bookkeeping for the CLIC
EMULATED_ACCESSES = {"plic": 3, "clic": 2}
HW_VIRTUALIZED = ("vclic", "aia")


@dataclass(frozen=True)
class CostProfile:
    hw_take_cost: int = 3
    context_save_cost: int = 80
    context_restore_cost: int = 80
    sw_decode_cost: int = 20
    vector_fetch_cost: int = 6
    tail_chain_cost: int = 12
    mmio_cost: int = 12
    hv_trap_entry_cost: int = 1376
    hv_emulation_cost_per_access: int = 300
    vm_switch_base_cost: int = 35_000
    irq_ctx_fixed_cost: float = 1250.0
    irq_ctx_per_line_cost: float = 8750.0 / 63.0
    cold_cache_sw_multiplier: float = 8.0
    cold_tlb_total_multiplier: float = 1.05
    isr_body_cycles: int = 200

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name.endswith("multiplier"):
                if value < 1:
                    raise ValidationError(f"costs.{f.name}", f"multiplier must be >= 1, got {value}")
            elif value < 0:
                raise ValidationError(f"costs.{f.name}", f"cost must be >= 0, got {value}")
        # a tail chain has to beat the restore/save pair it replaces, even with cold caches
        if self.tail_chain_cost >= self.context_restore_cost + self.context_save_cost:
            raise ValidationError(
                "costs.tail_chain_cost",
                "must be smaller than context_restore_cost + context_save_cost",
            )

    def with_overrides(self, overrides: dict) -> "CostProfile":
        known = {f.name for f in fields(self)}
        for key in overrides:
            if key not in known:
                raise ValidationError(f"costs.{key}", "unknown cost parameter")
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PROFILES = {"cheshire-50mhz": CostProfile()}


def get_profile(name: str) -> CostProfile:
    """Look a profile up in the built-in registry, then in ``$VCLICSIM_PROFILE_DIR``."""
    if name in PROFILES:
        return PROFILES[name]
    directory = os.environ.get(PROFILE_DIR_ENV)
    if directory:
        path = Path(directory) / f"{name}.toml"
        if path.is_file():
            from ._toml import load_toml

            data = load_toml(path)
            base = get_profile(data.pop("base", "cheshire-50mhz"))
            return base.with_overrides(data)
    raise ValidationError("profile", f"unknown cost profile {name!r}")


class CacheState(enum.Enum):
    WARM = "warm"
    COLD = "cold"


@dataclass(frozen=True)
class MicroArchState:
    icache: CacheState = CacheState.WARM
    dcache: CacheState = CacheState.WARM
    tlb: CacheState = CacheState.WARM

    @property
    def caches_cold(self) -> bool:
        return CacheState.COLD in (self.icache, self.dcache)


WARM = MicroArchState()


def apply_jitter(sw_cycles, total_cycles, uarch: MicroArchState, costs: CostProfile):
    """Scale a latency for the micro-architectural state.

    Cold caches stretch only the software share; a cold TLB then stretches
    the whole figure.
    """
    hw = total_cycles - sw_cycles
    sw = sw_cycles
    if uarch.caches_cold:
        sw = sw * costs.cold_cache_sw_multiplier
    total = hw + sw
    if uarch.tlb == CacheState.COLD:
        total = total * costs.cold_tlb_total_multiplier
    return sw, total


def cycles(x: float) -> int:
    """Round a fractional cost to whole cycles (half up)."""
    return int(math.floor(x + 0.5))


def emulation_latency(ic_kind: str, costs: CostProfile) -> int:
    """Extra cycles the hypervisor spends emulating the IC for one virtual interrupt."""
    if ic_kind in HW_VIRTUALIZED:
        return 0
    try:
        k = EMULATED_ACCESSES[ic_kind]
    except KeyError:
        raise InvalidConfig(f"no emulation model for IC kind {ic_kind!r}") from None
    return costs.hv_trap_entry_cost + k * costs.hv_emulation_cost_per_access


class HypervisorKind(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class VmEntry:
    vsid: int
    vm_prio: int = 0
    delegated_irq_count: int = 0
    isr_body_cycles: Optional[int] = None


@dataclass
class HypervisorModel:
    kind: HypervisorKind
    vsprio_enabled: bool = True
    vm_table: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == HypervisorKind.STATIC and len(self.vm_table) != 1:
            raise InvalidConfig("a static hypervisor hosts exactly one VM per hart")

    def order(self) -> list:
        return sorted(self.vm_table)


def irq_context_cost(n_lines: float, costs: CostProfile) -> float:
    """Cycles to save and restore the IC state of ``n_lines`` delegated lines."""
    if n_lines <= 0:
        return 0.0
    return costs.irq_ctx_fixed_cost + costs.irq_ctx_per_line_cost * (n_lines - 1)


def vm_context_switch_cost(from_vsid: int, to_vsid: int, hv: HypervisorModel, costs: CostProfile) -> int:
    if hv.kind != HypervisorKind.DYNAMIC:
        raise InvalidConfig("VM context switches only exist under a dynamic hypervisor")
    total = float(costs.vm_switch_base_cost)
    if not hv.vsprio_enabled:
        n = (hv.vm_table[from_vsid].delegated_irq_count + hv.vm_table[to_vsid].delegated_irq_count) / 2
        total += irq_context_cost(n, costs)
    return cycles(total)


class SchedKind(enum.Enum):
    STAY = "stay"
    PREEMPT = "preempt"
    ROUND_ROBIN = "round_robin"


@dataclass(frozen=True)
class SchedAction:
    kind: SchedKind
    target_vsid: Optional[int] = None
    cost: int = 0


def schedule(
    hv: HypervisorModel,
    now: int,
    running_vsid: int,
    pending_foreign: Optional[int] = None,
    at_timeslice: bool = False,
    costs: CostProfile = PROFILES["cheshire-50mhz"],
) -> SchedAction:
    """Decide what the hypervisor does at a scheduling point.

    ``pending_foreign`` is the VSID targeted by an interrupt that brought
    the hart into HS mode while another VM was running.  It preempts the
    running VM only if its VM priority is strictly higher.
    """
    if hv.kind == HypervisorKind.STATIC:
        if pending_foreign is not None and pending_foreign != running_vsid:
            raise InvalidConfig("a static hypervisor never migrates VMs")
        return SchedAction(SchedKind.STAY, running_vsid)
    if pending_foreign is not None and pending_foreign != running_vsid:
        if hv.vm_table[pending_foreign].vm_prio > hv.vm_table[running_vsid].vm_prio:
            return SchedAction(
                SchedKind.PREEMPT,
                pending_foreign,
                vm_context_switch_cost(running_vsid, pending_foreign, hv, costs),
            )
    if at_timeslice and len(hv.vm_table) > 1:
        order = hv.order()
        nxt = order[(order.index(running_vsid) + 1) % len(order)]
        return SchedAction(SchedKind.ROUND_ROBIN, nxt, vm_context_switch_cost(running_vsid, nxt, hv, costs))
    return SchedAction(SchedKind.STAY, running_vsid)
