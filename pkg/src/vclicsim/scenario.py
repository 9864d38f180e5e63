"""Scenario description: parsing, defaults and validation.

A scenario is a TOML document (or the equivalent ``dict``)::

    name = "vclic-virt"
    ic = "vclic"                  # plic | clic | aia | vclic
    mode = "static_hv"            # bare_metal | static_hv | dynamic_hv
    iterations = 100
    seed = 1
    profile = "cheshire-50mhz"

    [costs]                       # overrides on top of the profile
    context_save_cost = 80

    [uarch]
    icache = "warm"

    [bus]
    traffic_rate = 0.0

    [[vms]]
    vsid = 1
    prio = 1
    lines = [3]

    [[stimulus]]
    line = 3
    period = 5000

Unknown keys are rejected so a mistyped cost knob fails loudly.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidConfig, ValidationError
from .regs import N_VSIDS, ClicConfig, Priv, Trigger
from .sw_stack import CacheState, CostProfile, MicroArchState, get_profile

IC_KINDS = ("plic", "clic", "aia", "vclic")
MODES = ("bare_metal", "static_hv", "dynamic_hv")

_TOP_KEYS = {
    "name", "ic", "mode", "iterations", "seed", "clock_mhz", "profile", "costs", "uarch",
    "bus", "clic", "hypervisor", "vms", "stimulus", "mmio", "step", "horizon", "hart_priv",
}
_CLIC_KEYS = {"n_irqs", "ctl_bits", "nlbits", "vsprio_bits", "region_stride_bytes"}
_BUS_KEYS = {"traffic_rate", "burstiness", "base_write_cycles", "seed", "capacity", "propagation_cycles"}
_HV_KEYS = {"vsprio", "timeslice_cycles", "initial_vm"}
_VM_KEYS = {"vsid", "prio", "lines", "delegated_irq_count", "isr_body_cycles"}
_STIM_KEYS = {
    "line", "ctl", "shv", "trigger", "mode", "start", "period", "count", "cycles",
    "isr_body_cycles", "plic_priority",
}
_MMIO_KEYS = {"cycle", "priv", "vsid", "addr", "width", "value"}
_UARCH_KEYS = {"icache", "dcache", "tlb"}


@dataclass(frozen=True)
class BusSpec:
    traffic_rate: float = 0.0
    burstiness: int = 1
    base_write_cycles: int = 18
    seed: Optional[int] = None
    capacity: int = 1024
    propagation_cycles: int = 1


@dataclass(frozen=True)
class HypervisorSpec:
    vsprio: bool = True
    timeslice_cycles: int = 0
    initial_vm: Optional[int] = None


@dataclass(frozen=True)
class VmSpec:
    vsid: int
    prio: int = 0
    lines: tuple = ()
    delegated_irq_count: int = 0
    isr_body_cycles: Optional[int] = None


@dataclass(frozen=True)
class StimulusSpec:
    line: int
    ctl: int = 0xFF
    shv: bool = False
    trigger: Trigger = Trigger.EDGE
    mode: Optional[Priv] = None
    cycles: tuple = ()
    isr_body_cycles: Optional[int] = None
    plic_priority: int = 1


@dataclass(frozen=True)
class MmioOp:
    cycle: int
    priv: Priv
    vsid: int
    addr: int
    width: int = 1
    value: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    ic: str
    mode: str
    clic: ClicConfig
    costs: CostProfile
    profile: str
    uarch: MicroArchState
    bus: BusSpec
    hypervisor: HypervisorSpec
    vms: tuple
    stimulus: tuple
    mmio: tuple
    iterations: int
    seed: int
    clock_mhz: float
    step: str
    horizon: Optional[int]
    hart_priv: Priv
    raw: dict = field(compare=False, repr=False, hash=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return parse_scenario(data)

    def vm(self, vsid: int) -> VmSpec:
        for v in self.vms:
            if v.vsid == vsid:
                return v
        raise KeyError(vsid)

    def line_owner(self, line: int) -> Optional[int]:
        for v in self.vms:
            if line in v.lines:
                return v.vsid
        return None

    @property
    def virtualized(self) -> bool:
        return self.mode != "bare_metal"


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ValidationError(path, "expected a table")
    for key in d:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}" if path else key, "unknown key")


def _get(d, key, typ, default, path):
    if key not in d:
        return default
    value = d[key]
    ok = isinstance(value, typ) and not (typ in (int, (int, float)) and isinstance(value, bool))
    if not ok:
        raise ValidationError(f"{path}.{key}" if path else key, f"expected {getattr(typ, '__name__', typ)}, got {value!r}")
    return value


def _priv(value, path) -> Priv:
    try:
        return {"M": Priv.M, "S": Priv.HS, "HS": Priv.HS, "VS": Priv.VS}[value]
    except (KeyError, TypeError):
        raise ValidationError(path, f"expected one of M, S, HS, VS; got {value!r}") from None


def _cache(value, path) -> CacheState:
    try:
        return CacheState(value)
    except ValueError:
        raise ValidationError(path, f"expected 'warm' or 'cold', got {value!r}") from None


def _range(value, lo, hi, path):
    if not lo <= value <= hi:
        raise ValidationError(path, f"must be in {lo}..{hi}, got {value}")
    return value


def parse_scenario(data: dict) -> Scenario:
    """Build and validate a :class:`Scenario` from its dict form."""
    raw = copy.deepcopy(data)
    _check_keys(data, _TOP_KEYS, "")
    name = _get(data, "name", str, "scenario", "")
    ic = _get(data, "ic", str, "vclic", "")
    if ic not in IC_KINDS:
        raise ValidationError("ic", f"expected one of {', '.join(IC_KINDS)}; got {ic!r}")
    mode = _get(data, "mode", str, "bare_metal", "")
    if mode not in MODES:
        raise ValidationError("mode", f"expected one of {', '.join(MODES)}; got {mode!r}")
    iterations = _range(_get(data, "iterations", int, 100, ""), 1, 10**7, "iterations")
    seed = _get(data, "seed", int, 0, "")
    clock_mhz = float(_get(data, "clock_mhz", (int, float), 50, ""))
    if clock_mhz <= 0:
        raise ValidationError("clock_mhz", "must be positive")
    step = _get(data, "step", str, "auto", "")
    if step not in ("auto", "event", "cycle"):
        raise ValidationError("step", "expected 'auto', 'event' or 'cycle'")
    horizon = _get(data, "horizon", int, None, "")
    hart_priv = _priv(_get(data, "hart_priv", str, "M", ""), "hart_priv")
    if hart_priv == Priv.VS:
        raise ValidationError("hart_priv", "bare-metal code runs in M or S mode")

    clic_d = data.get("clic", {})
    _check_keys(clic_d, _CLIC_KEYS, "clic")
    try:
        clic = ClicConfig(**{k: _get(clic_d, k, int, None, "clic") for k in clic_d})
    except InvalidConfig as exc:
        raise ValidationError("clic", str(exc)) from None

    profile = _get(data, "profile", str, "cheshire-50mhz", "")
    costs_d = data.get("costs", {})
    if not isinstance(costs_d, dict):
        raise ValidationError("costs", "expected a table")
    for k, v in costs_d.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ValidationError(f"costs.{k}", f"expected a number, got {v!r}")
    costs = get_profile(profile).with_overrides(costs_d)

    uarch_d = data.get("uarch", {})
    _check_keys(uarch_d, _UARCH_KEYS, "uarch")
    uarch = MicroArchState(**{k: _cache(v, f"uarch.{k}") for k, v in uarch_d.items()})

    bus_d = data.get("bus", {})
    _check_keys(bus_d, _BUS_KEYS, "bus")
    bus = BusSpec(
        traffic_rate=float(_range(_get(bus_d, "traffic_rate", (int, float), 0.0, "bus"), 0.0, 1.0, "bus.traffic_rate")),
        burstiness=_range(_get(bus_d, "burstiness", int, 1, "bus"), 1, 10**6, "bus.burstiness"),
        base_write_cycles=_range(_get(bus_d, "base_write_cycles", int, 18, "bus"), 0, 10**9, "bus.base_write_cycles"),
        seed=_get(bus_d, "seed", int, None, "bus"),
        capacity=_range(_get(bus_d, "capacity", int, 1024, "bus"), 1, 10**9, "bus.capacity"),
        propagation_cycles=_range(_get(bus_d, "propagation_cycles", int, 1, "bus"), 0, 10**9, "bus.propagation_cycles"),
    )

    hv_d = data.get("hypervisor", {})
    _check_keys(hv_d, _HV_KEYS, "hypervisor")
    hv = HypervisorSpec(
        vsprio=_get(hv_d, "vsprio", bool, True, "hypervisor"),
        timeslice_cycles=_range(_get(hv_d, "timeslice_cycles", int, 0, "hypervisor"), 0, 10**12, "hypervisor.timeslice_cycles"),
        initial_vm=_get(hv_d, "initial_vm", int, None, "hypervisor"),
    )

    vms = []
    vm_list = data.get("vms", [])
    if not isinstance(vm_list, list):
        raise ValidationError("vms", "expected an array of tables")
    prio_max = (1 << clic.vsprio_bits) - 1
    for i, vd in enumerate(vm_list):
        p = f"vms[{i}]"
        _check_keys(vd, _VM_KEYS, p)
        if "vsid" not in vd:
            raise ValidationError(f"{p}.vsid", "required")
        vsid = _range(_get(vd, "vsid", int, 0, p), 0, N_VSIDS - 1, f"{p}.vsid")
        lines = _get(vd, "lines", list, [], p)
        for j, ln in enumerate(lines):
            if not isinstance(ln, int) or isinstance(ln, bool):
                raise ValidationError(f"{p}.lines[{j}]", "expected an integer")
            _range(ln, 0, clic.n_irqs - 1, f"{p}.lines[{j}]")
        count = _get(vd, "delegated_irq_count", int, len(lines), p)
        if count < len(lines):
            raise ValidationError(f"{p}.delegated_irq_count", "smaller than the number of listed lines")
        vms.append(VmSpec(
            vsid=vsid,
            prio=_range(_get(vd, "prio", int, 0, p), 0, max(prio_max, 0), f"{p}.prio"),
            lines=tuple(lines),
            delegated_irq_count=count,
            isr_body_cycles=_get(vd, "isr_body_cycles", int, None, p),
        ))
    vsids = [v.vsid for v in vms]
    if len(set(vsids)) != len(vsids):
        raise ValidationError("vms", "duplicate vsid")
    owned = [ln for v in vms for ln in v.lines]
    if len(set(owned)) != len(owned):
        raise ValidationError("vms", "a line is delegated to more than one VM")

    stim_list = data.get("stimulus", [])
    if not isinstance(stim_list, list) or not stim_list:
        raise ValidationError("stimulus", "at least one stimulus entry is required")
    stimulus = []
    for i, sd in enumerate(stim_list):
        p = f"stimulus[{i}]"
        _check_keys(sd, _STIM_KEYS, p)
        if "line" not in sd:
            raise ValidationError(f"{p}.line", "required")
        line = _range(_get(sd, "line", int, 0, p), 0, clic.n_irqs - 1, f"{p}.line")
        if ic in ("plic", "aia") and line == 0:
            raise ValidationError(f"{p}.line", "source 0 does not exist on a PLIC/A-PLIC")
        if "cycles" in sd:
            if any(k in sd for k in ("start", "period", "count")):
                raise ValidationError(p, "give either cycles or start/period/count")
            cyc = _get(sd, "cycles", list, [], p)
            if not cyc or any(not isinstance(c, int) or c < 0 for c in cyc):
                raise ValidationError(f"{p}.cycles", "expected a non-empty list of cycle numbers")
            if sorted(cyc) != cyc:
                raise ValidationError(f"{p}.cycles", "must be sorted")
        else:
            start = _range(_get(sd, "start", int, 1000, p), 0, 10**15, f"{p}.start")
            count = _range(_get(sd, "count", int, iterations, p), 1, 10**7, f"{p}.count")
            period = _get(sd, "period", int, None, p)
            if period is None:
                if count > 1:
                    raise ValidationError(f"{p}.period", "required when count > 1")
                period = 1
            _range(period, 1, 10**15, f"{p}.period")
            cyc = [start + k * period for k in range(count)]
        trig = _get(sd, "trigger", str, "edge", p)
        try:
            trigger = Trigger(trig)
        except ValueError:
            raise ValidationError(f"{p}.trigger", f"expected 'edge' or 'level', got {trig!r}") from None
        smode = sd.get("mode")
        smode = None if smode is None else _priv(smode, f"{p}.mode")
        if smode == Priv.VS:
            raise ValidationError(f"{p}.mode", "VS delegation is expressed through vms[].lines")
        stimulus.append(StimulusSpec(
            line=line,
            ctl=_range(_get(sd, "ctl", int, 0xFF, p), 0, 255, f"{p}.ctl"),
            shv=_get(sd, "shv", bool, False, p),
            trigger=trigger,
            mode=smode,
            cycles=tuple(cyc),
            isr_body_cycles=_get(sd, "isr_body_cycles", int, None, p),
            plic_priority=_range(_get(sd, "plic_priority", int, 1, p), 1, 2**31 - 1, f"{p}.plic_priority"),
        ))
    lines = [s.line for s in stimulus]
    if len(set(lines)) != len(lines):
        raise ValidationError("stimulus", "each line may appear in only one stimulus entry")

    mmio = []
    for i, md in enumerate(data.get("mmio", [])):
        p = f"mmio[{i}]"
        _check_keys(md, _MMIO_KEYS, p)
        for req in ("cycle", "priv", "addr"):
            if req not in md:
                raise ValidationError(f"{p}.{req}", "required")
        width = _get(md, "width", int, 1, p)
        if width not in (1, 4):
            raise ValidationError(f"{p}.width", "must be 1 or 4")
        mmio.append(MmioOp(
            cycle=_get(md, "cycle", int, 0, p),
            priv=_priv(md["priv"], f"{p}.priv"),
            vsid=_range(_get(md, "vsid", int, 0, p), 0, N_VSIDS - 1, f"{p}.vsid"),
            addr=_get(md, "addr", int, 0, p),
            width=width,
            value=_get(md, "value", int, None, p),
        ))
    if mmio and ic not in ("clic", "vclic"):
        raise ValidationError("mmio", "register accesses are modelled for clic and vclic only")

    s = Scenario(
        name=name, ic=ic, mode=mode, clic=clic, costs=costs, profile=profile, uarch=uarch,
        bus=bus, hypervisor=hv, vms=tuple(vms), stimulus=tuple(stimulus), mmio=tuple(mmio),
        iterations=iterations, seed=seed, clock_mhz=clock_mhz, step=step, horizon=horizon,
        hart_priv=hart_priv, raw=raw,
    )
    _validate_topology(s)
    return s


def _validate_topology(s: Scenario) -> None:
    if s.mode == "bare_metal":
        if s.vms:
            raise ValidationError("vms", "bare_metal scenarios have no VMs")
        for i, st in enumerate(s.stimulus):
            if st.mode is not None and st.mode > s.hart_priv and s.ic in ("plic", "aia"):
                raise ValidationError(f"stimulus[{i}].mode", "PLIC/AIA deliver to the hart's own mode")
        return
    if s.mode == "static_hv" and len(s.vms) != 1:
        raise ValidationError("vms", "static_hv pins exactly one VM to the hart")
    if s.mode == "dynamic_hv":
        if s.ic != "vclic":
            raise ValidationError("ic", "dynamic_hv is modelled for the vclic only")
        if not s.vms:
            raise ValidationError("vms", "dynamic_hv needs at least one VM")
    if s.hypervisor.initial_vm is not None and s.hypervisor.initial_vm not in [v.vsid for v in s.vms]:
        raise ValidationError("hypervisor.initial_vm", "not present in vms")
    for i, st in enumerate(s.stimulus):
        owner = s.line_owner(st.line)
        if owner is None and s.ic != "vclic":
            raise ValidationError(f"stimulus[{i}].line", f"line {st.line} is not assigned to the VM")
        if owner is not None and st.mode == Priv.M:
            raise ValidationError(f"stimulus[{i}].mode", "M-mode lines cannot be delegated to a VM")


def resolve_path(data: dict, path: str, value) -> dict:
    """Copy of ``data`` with the dotted ``path`` set to ``value``.

    Integer components index arrays; ``*`` applies to every element.
    """
    if not path:
        raise ValidationError("param", "empty parameter path")
    out = copy.deepcopy(data)
    parts = path.split(".")

    def walk(node, i, where):
        part = parts[i]
        last = i == len(parts) - 1
        if isinstance(node, list):
            if part == "*":
                if not node:
                    raise ValidationError(path, f"{where} is empty")
                for j in range(len(node)):
                    _step(node, j, i, last, f"{where}[{j}]")
                return
            if not part.isdigit() or int(part) >= len(node):
                raise ValidationError(path, f"bad index {part!r} at {where}")
            _step(node, int(part), i, last, f"{where}[{part}]")
        elif isinstance(node, dict):
            if not last and part not in node:
                node[part] = {}
            _step(node, part, i, last, f"{where}.{part}" if where else part)
        else:
            raise ValidationError(path, f"{where} is not a table or array")

    def _step(container, key, i, last, where):
        if last:
            container[key] = value
        else:
            walk(container[key], i + 1, where)

    walk(out, 0, "")
    return out
