"""Deterministic event loop wiring controller, transport, hart and hypervisor together.

``run_scenario`` replays the stimulus of a :class:`~vclicsim.scenario.Scenario`
and measures, for every delivered interrupt, the cycles from the source
asserting its line to the first instruction of the handler.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .alternatives import AiaModel, ClicVanillaModel, PlicModel
from .delivery import MsiBus, WiredFabric
from .errors import AccessFault, ProtocolError, UnmappedAddress, ValidationError
from .hart import NO_TAKE, CsrFile, Hart, HartState, TakeKind
from .regs import HS_CTX, INTCTL_BASE, INTV_BASE, INTV_V, AccessContext, Priv, Region, Trigger, VClic
from .scenario import Scenario, parse_scenario, resolve_path
from .sw_stack import (
    EMULATED_ACCESSES,
    HypervisorKind,
    HypervisorModel,
    SchedKind,
    VmEntry,
    apply_jitter,
    cycles,
    emulation_latency,
    schedule,
)
from .trace import TraceEvent, stack_str

# same-cycle processing order
_MMIO, _SRC_LOW, _ASSERT, _ARRIVE, _PHASE, _TICK = range(6)


@dataclass(frozen=True)
class LatencyStats:
    line: int
    count: int
    min: float
    max: float
    mean: float
    stddev: float
    jitter: float
    coalesced: int = 0

    @classmethod
    def from_samples(cls, line: int, samples: Sequence[int], coalesced: int = 0) -> "LatencyStats":
        if not samples:
            nan = math.nan
            return cls(line, 0, nan, nan, nan, nan, nan, coalesced)
        n = len(samples)
        mean = sum(samples) / n
        var = sum((x - mean) ** 2 for x in samples) / n
        lo, hi = min(samples), max(samples)
        return cls(line, n, lo, hi, mean, math.sqrt(var), hi - lo, coalesced)


@dataclass
class RunResult:
    scenario: Scenario
    stats: list
    trace: list
    latencies: dict
    counters: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``stats, trace = run_scenario(s)``
        return iter((self.stats, self.trace))

    def stats_for(self, line: int) -> LatencyStats:
        for st in self.stats:
            if st.line == line:
                return st
        raise KeyError(line)

    @property
    def mean(self) -> float:
        """Mean over all delivered interrupts of all lines."""
        samples = [x for v in self.latencies.values() for x in v]
        return sum(samples) / len(samples) if samples else math.nan


class _Sim:
    def __init__(self, s: Scenario):
        self.s = s
        self.costs = s.costs
        self.uarch = s.uarch
        self.trace: list = []
        self.heap: list = []
        self._seq = 0
        self._work = 0
        self.fabric = WiredFabric(s.bus.propagation_cycles)
        self.bus = MsiBus(
            s.bus.base_write_cycles, s.bus.traffic_rate, s.bus.burstiness,
            s.seed if s.bus.seed is None else s.bus.seed, s.bus.capacity,
        )
        self.stim = {st.line: st for st in s.stimulus}
        self.owner = {ln: v.vsid for v in s.vms for ln in v.lines}
        self.dynamic = s.mode == "dynamic_hv"
        self.emulated = s.virtualized and s.ic in EMULATED_ACCESSES
        self.tail_chain = s.ic in ("clic", "vclic") and not self.emulated

        if s.virtualized:
            running = s.hypervisor.initial_vm if s.hypervisor.initial_vm is not None else s.vms[0].vsid
            base = Priv.VS
            self.hv = HypervisorModel(
                HypervisorKind.DYNAMIC if self.dynamic else HypervisorKind.STATIC,
                vsprio_enabled=s.hypervisor.vsprio,
                vm_table={v.vsid: VmEntry(v.vsid, v.prio, v.delegated_irq_count, v.isr_body_cycles) for v in s.vms},
            )
        else:
            running, base, self.hv = None, s.hart_priv, None
        self.hw_vsprio = not self.dynamic or s.hypervisor.vsprio
        self.ic = self._build_ic(running)
        csr = CsrFile()
        csr.write_csr("hstatus_vgein", running or 0)
        self.hart = Hart(self.ic, csr, HartState(base, running))

        self.remaining: list = []  # body cycles left, one per handler frame
        self.saved: dict = {}      # vsid -> (frames, remaining) of descheduled VMs
        self.deferred: set = set()
        self.phase = "run"
        self.phase_end = 0
        self._tok = 0
        self.tick_pending = False
        self.source_high = {ln: False for ln in self.stim}
        self.in_flight = {ln: deque() for ln in self.stim}
        self.awaiting = {ln: deque() for ln in self.stim}
        self.latencies = {ln: [] for ln in self.stim}
        self.counters = {"asserts": 0, "delivered": 0, "coalesced": 0, "vm_switches": 0, "access_faults": 0}
        self.coalesced = {ln: 0 for ln in self.stim}
        self._last_sel = None
        self.now = 0

    # -- setup -----------------------------------------------------------

    def _line_mode(self, st) -> Priv:
        if st.mode is not None:
            return st.mode
        return self.s.hart_priv if not self.s.virtualized else Priv.HS

    def _build_ic(self, running):
        s = self.s
        if s.ic in ("vclic", "clic"):
            ic = VClic(s.clic, vsprio_enabled=self.hw_vsprio) if s.ic == "vclic" else ClicVanillaModel(s.clic)
            if s.ic == "vclic" and s.clic.vsprio_bits:
                for v in s.vms:
                    ic.set_vsprio(v.vsid, v.prio)
            for st in s.stimulus:
                owner = self.owner.get(st.line)
                delegate = s.ic == "vclic" and owner is not None and (self.hw_vsprio or owner == running)
                ic.program_line(
                    st.line, ctl=st.ctl, shv=st.shv, trigger=st.trigger, mode=self._line_mode(st),
                    vsid=owner if delegate else None,
                )
            return ic
        target = s.hart_priv if not s.virtualized else Priv.HS
        if s.ic == "plic":
            ic = PlicModel(s.clic.n_irqs, target)
            for st in s.stimulus:
                ic.configure(st.line, st.plic_priority, True, st.trigger)
            return ic
        if s.virtualized:
            ic = AiaModel(s.clic.n_irqs, Priv.VS, running, s.bus.propagation_cycles)
        else:
            ic = AiaModel(s.clic.n_irqs, target, None, s.bus.propagation_cycles)
        for st in s.stimulus:
            ic.configure(st.line)
        return ic

    # -- plumbing --------------------------------------------------------

    def push(self, cycle: int, order: int, kind: str, data=None) -> None:
        self._seq += 1
        if order != _TICK:
            self._work += 1
        heapq.heappush(self.heap, (cycle, order, self._seq, kind, data))

    def emit(self, cycle: int, kind: str, **payload) -> TraceEvent:
        ev = TraceEvent(cycle, kind, payload)
        self.trace.append(ev)
        return ev

    def set_phase(self, name: str, end: int, cont) -> None:
        self._tok += 1
        self.phase, self.phase_end = name, end
        self.hart.state.busy_until = end
        self.push(end, _PHASE, "phase", (self._tok, cont))

    def body_cycles(self, line: int) -> int:
        st = self.stim.get(line)
        if st is not None and st.isr_body_cycles is not None:
            return st.isr_body_cycles
        owner = self.owner.get(line)
        if owner is not None:
            vm = self.s.vm(owner)
            if vm.isr_body_cycles is not None:
                return vm.isr_body_cycles
        return self.costs.isr_body_cycles

    def running(self) -> Optional[int]:
        return self.hart.state.running_vsid

    # -- stimulus and transport ------------------------------------------

    def on_assert(self, t: int, line: int) -> None:
        st = self.stim[line]
        self.counters["asserts"] += 1
        self.emit(t, "line_assert", line=line)
        if self.source_high[line]:
            self._coalesce(t, line)
            return
        self.source_high[line] = True
        if st.trigger == Trigger.EDGE:
            self.push(t + 1, _SRC_LOW, "src_low", line)
        self.in_flight[line].append(t)
        if self.s.ic == "aia":
            arrival = self.ic.set_line(line, True, t, self.bus)
            self.emit(t, "msi_enqueue", line=line, queue=self.bus.queue, arrival=arrival)
            self.push(arrival, _ARRIVE, "msi_arrive", line)
        else:
            self.push(self.fabric.deliver_wired(line, t), _ARRIVE, "wire", (line, True))

    def on_src_low(self, t: int, line: int) -> None:
        self.source_high[line] = False
        if self.s.ic == "aia":
            self.ic.set_line(line, False, t, self.bus)
        else:
            self.push(self.fabric.deliver_wired(line, t), _ARRIVE, "wire", (line, False))

    def _coalesce(self, t: int, line: int) -> None:
        self.coalesced[line] += 1
        self.counters["coalesced"] += 1

    def _already_pending(self, line: int) -> bool:
        ic = self.ic
        if self.s.ic == "plic":
            return bool(ic.pending[line])
        if self.s.ic == "aia":
            return bool(ic.imsic.pending[int(ic.identity[line])])
        return bool(ic.ip[line]) and ic.is_edge(line)

    def on_wire(self, t: int, line: int, value: bool) -> None:
        if value:
            assert_cycle = self.in_flight[line].popleft()
            if self._already_pending(line):
                self._coalesce(t, line)
            else:
                self.awaiting[line].append(assert_cycle)
        self.ic.set_line(line, value, t)

    def on_msi_arrive(self, t: int, line: int) -> None:
        ident = int(self.ic.identity[line])
        self.emit(t, "msi_arrive", line=line, identity=ident)
        self.push(t + self.ic.imsic.propagation_cycles, _ARRIVE, "imsic", line)

    def on_imsic(self, t: int, line: int) -> None:
        ident = int(self.ic.identity[line])
        assert_cycle = self.in_flight[line].popleft()
        if self._already_pending(line):
            self._coalesce(t, line)
        else:
            self.awaiting[line].append(assert_cycle)
        self.ic.imsic_deliver(t - self.ic.imsic.propagation_cycles, ident)

    def on_mmio(self, t: int, op) -> None:
        ctx = AccessContext(op.priv, op.vsid)
        try:
            if op.value is None:
                self.ic.mmio_read(op.addr, op.width, ctx)
            else:
                self.ic.mmio_write(op.addr, op.width, op.value, ctx)
        except (AccessFault, UnmappedAddress) as exc:
            self.counters["access_faults"] += 1
            self.emit(t, "access_fault", addr=hex(op.addr), priv=op.priv.name, vsid=op.vsid,
                      error=type(exc).__name__)

    # -- hart side ---------------------------------------------------------

    def evaluate(self, t: int) -> None:
        if self.phase not in ("run", "body"):
            return
        st = self.hart.state
        if self.tick_pending and st.priv == Priv.VS:
            self.tick_pending = False
            self._preempt_body(t)
            self._hv_entry(t, "timeslice", None, lambda tt: self._hv_decide(tt, None, True))
            return
        sel = self.ic.arbitrate()
        dec = self.hart.eval_take(sel)
        if dec.kind != TakeKind.NONE and self.emulated and st.isr_stack:
            dec = NO_TAKE
        if sel is None:
            self._last_sel = None
            return
        # report a selection once per distinct (selection, hart state) pair
        note = (sel.key, int(st.priv), st.running_vsid, len(st.isr_stack), dec.kind)
        if note != self._last_sel:
            self._last_sel = note
            self.emit(t, "selection", line=sel.id, cls=sel.priv_class.name, vsid=sel.vsid, level=sel.level,
                      hart=st.priv.name, running=st.running_vsid, take=dec.kind.value)
        if dec.kind == TakeKind.NONE:
            return
        self._last_sel = None
        self._preempt_body(t)
        owner = self.owner.get(sel.id)
        if dec.kind == TakeKind.TRAP_HS_FOR_VM_SWITCH:
            ready, evs = self.hart.enter_trap(dec, t, self.costs, self.uarch)
            self.trace.extend(evs)
            self.set_phase("hv", ready, lambda tt: self._hv_decide(tt, sel.vsid, False))
        elif self.dynamic and sel.priv_class == Priv.HS and owner is not None and owner != st.running_vsid:
            self._hv_entry(t, "foreign_irq", sel, lambda tt: self._hv_decide(tt, owner, False, sel.id))
        else:
            self._take_isr(t, dec, owner)

    def _preempt_body(self, t: int) -> None:
        if self.phase == "body":
            self.remaining[-1] = self.phase_end - t
            self.phase = "run"

    def _take_isr(self, t: int, dec, owner) -> None:
        sel = dec.selection
        extra_hw = self.costs.mmio_cost if self.s.ic == "plic" else 0
        extra_sw, cls = 0, None
        if self.emulated and owner is not None:
            extra_sw, cls = emulation_latency(self.s.ic, self.costs), Priv.VS
        first, evs = self.hart.enter_trap(dec, t, self.costs, self.uarch, extra_hw=extra_hw,
                                          extra_sw=extra_sw, frame_class=cls)
        if cls is not None:
            evs[0].payload["via"] = "hs_emulation"
        self.trace.extend(evs)
        self.remaining.append(self.body_cycles(sel.id))
        self.set_phase("entry", first, lambda tt: self._first_insn(tt, sel.id))

    def _first_insn(self, t: int, line: int) -> None:
        if not self.awaiting[line]:
            raise ProtocolError(f"handler for line {line} started without a pending assertion")
        lat = t - self.awaiting[line].popleft()
        self.latencies[line].append(lat)
        self.counters["delivered"] += 1
        top = self.hart.state.isr_stack[-1]
        self.emit(t, "isr_first_insn", line=line, cls=top.priv_class.name, latency=lat,
                  stack=stack_str(self.hart.state.isr_stack))
        self.set_phase("body", t + self.remaining[-1], self._body_end)

    def _body_end(self, t: int) -> None:
        top = self.hart.state.isr_stack[-1]
        line = top.line
        if self.stim[line].trigger == Trigger.LEVEL:
            # the handler acknowledged the device, which drops its request
            self.source_high[line] = False
            if self.s.ic == "aia":
                self.ic.set_line(line, False, t, self.bus)
            else:
                self.ic.set_line(line, False, t)
        if self.s.ic == "plic":
            self.ic.complete(line, t)
        cyc, evs, chained = self.hart.exit_trap(t, self.costs, self.uarch, tail_chain=self.tail_chain)
        self.trace.extend(evs)
        if chained is not None:
            self.remaining[-1] = self.body_cycles(chained.id)
            self.set_phase("entry", cyc, lambda tt: self._first_insn(tt, chained.id))
        else:
            self.remaining.pop()
            self.set_phase("exit", cyc, self._resume)

    def _resume(self, t: int) -> None:
        if self.hart.state.isr_stack:
            self.set_phase("body", t + self.remaining[-1], self._body_end)
        else:
            self.phase = "run"
            self.hart.state.busy_until = t

    # -- hypervisor ---------------------------------------------------------

    def _hv_entry(self, t: int, reason: str, sel, then) -> None:
        c = self.costs
        _, total = apply_jitter(c.hv_trap_entry_cost, c.hw_take_cost + c.hv_trap_entry_cost, self.uarch, c)
        payload = {"to": "HS", "reason": reason, "running": self.running()}
        if sel is not None:
            payload.update(line=sel.id, cls=sel.priv_class.name)
        self.emit(t, "trap_enter", **payload)
        self.set_phase("hv", t + cycles(total), then)

    def _hv_decide(self, t: int, foreign, at_timeslice: bool, line: Optional[int] = None) -> None:
        act = schedule(self.hv, t, self.running(), pending_foreign=foreign, at_timeslice=at_timeslice,
                       costs=self.costs)
        if act.kind == SchedKind.STAY:
            if line is not None:
                # not worth a switch: park the line until its VM runs again
                self.ic.mmio_write(self._hs(INTCTL_BASE + 4 * line + 1), 1, 0, HS_CTX)
                self.deferred.add(line)
            self.emit(t, "hv_return", running=self.running(), action="stay")
            self._resume(t)
            return
        self.counters["vm_switches"] += 1
        self.emit(t, "vm_switch_begin", frm=self.running(), to=act.target_vsid, why=act.kind.value, cost=act.cost)
        self.set_phase("switch", t + act.cost, lambda tt: self._switch_end(tt, act.target_vsid))

    def _hs(self, offset: int) -> int:
        return self.ic.region_base(Region(Priv.HS)) + offset

    def _switch_end(self, t: int, target: int) -> None:
        st = self.hart.state
        old = st.running_vsid
        self.saved[old] = (st.isr_stack, self.remaining)
        st.isr_stack, self.remaining = self.saved.pop(target, ([], []))
        st.running_vsid = target
        self.hart.csr.write_csr("hstatus_vgein", target)
        if not self.hw_vsprio:
            # without VSPRIO only the running VM's lines are delegated
            for ln in self.s.vm(old).lines:
                self.ic.mmio_write(self._hs(INTV_BASE + ln), 1, 0, HS_CTX)
            for ln in self.s.vm(target).lines:
                self.ic.mmio_write(self._hs(INTV_BASE + ln), 1, INTV_V | target, HS_CTX)
                if ln in self.deferred:
                    self.deferred.discard(ln)
                    self.ic.mmio_write(self._hs(INTCTL_BASE + 4 * ln + 1), 1, 1, HS_CTX)
        self.emit(t, "vm_switch_end", frm=old, to=target, stack=stack_str(st.isr_stack))
        self._resume(t)

    # -- main loop ---------------------------------------------------------

    def _outstanding(self) -> bool:
        return (
            self._work > 0
            or self.phase != "run"
            or bool(self.hart.state.isr_stack)
            or any(self.awaiting[ln] or self.in_flight[ln] for ln in self.stim)
        )

    def _dispatch(self, t: int, kind: str, data) -> None:
        if kind == "phase":
            tok, cont = data
            if tok == self._tok:
                cont(t)
        elif kind == "assert":
            self.on_assert(t, data)
        elif kind == "src_low":
            self.on_src_low(t, data)
        elif kind == "wire":
            self.on_wire(t, *data)
        elif kind == "msi_arrive":
            self.on_msi_arrive(t, data)
        elif kind == "imsic":
            self.on_imsic(t, data)
        elif kind == "mmio":
            self.on_mmio(t, data)
        elif kind == "tick":
            if self.dynamic:
                self.tick_pending = True
            if self._outstanding() and t + self.s.hypervisor.timeslice_cycles <= self.horizon:
                self.push(t + self.s.hypervisor.timeslice_cycles, _TICK, "tick")

    def run(self) -> RunResult:
        s = self.s
        last = 0
        for st in s.stimulus:
            for c in st.cycles:
                self.push(c, _ASSERT, "assert", st.line)
            last = max(last, st.cycles[-1])
        for op in s.mmio:
            self.push(op.cycle, _MMIO, "mmio", op)
            last = max(last, op.cycle)
        ts = s.hypervisor.timeslice_cycles
        self.horizon = s.horizon if s.horizon is not None else last + max(10_000_000, 100 * ts)
        if self.dynamic and ts:
            self.push(ts, _TICK, "tick")

        # the bus always advances one cycle at a time; "cycle" additionally
        # re-evaluates the hart on every idle cycle, which cannot change anything
        per_cycle = s.step == "cycle"
        bus = self.bus
        try:
            while self.heap:
                t = self.heap[0][0]
                if t > self.horizon:
                    break
                if per_cycle:
                    # step the bus and re-evaluate the hart on every idle cycle in between
                    while bus.cycle < t:
                        c = bus.cycle
                        bus.bus_step(c)
                        if c > self.now:
                            self.now = c
                            self.evaluate(c)
                    if bus.cycle == t:
                        bus.bus_step(t)
                self.now = t
                while self.heap and self.heap[0][0] == t:
                    _, order, _, kind, data = heapq.heappop(self.heap)
                    if order != _TICK:
                        self._work -= 1
                    self._dispatch(t, kind, data)
                self.evaluate(t)
        except ProtocolError as exc:
            tail = "\n".join(f"  {e.cycle} {e.kind} {e.payload_str()}" for e in self.trace[-8:])
            raise ProtocolError(f"{exc}\nlast trace events:\n{tail}") from exc

        pending = sum(len(self.awaiting[ln]) + len(self.in_flight[ln]) for ln in self.stim)
        self.counters["pending_at_end"] = pending
        self.counters["end_cycle"] = self.now
        stats = [LatencyStats.from_samples(ln, self.latencies[ln], self.coalesced[ln]) for ln in sorted(self.stim)]
        return RunResult(s, stats, self.trace, self.latencies, self.counters)


def run_scenario(s) -> RunResult:
    """Simulate ``s`` (a :class:`Scenario`, dict or TOML path)."""
    return _Sim(as_scenario(s)).run()


def as_scenario(s) -> Scenario:
    if isinstance(s, Scenario):
        return s
    if isinstance(s, dict):
        return parse_scenario(s)
    if isinstance(s, (str, Path)):
        return load_scenario(s)
    raise TypeError(f"cannot make a scenario out of {type(s).__name__}")


def load_scenario(path) -> Scenario:
    from ._toml import load_toml

    path = Path(path)
    try:
        data = load_toml(path)
    except OSError as exc:
        raise ValidationError(str(path), f"cannot read scenario: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ValidationError(str(path), f"not valid TOML: {exc}") from None
    data.setdefault("name", path.stem)
    return parse_scenario(data)


def _run_many(scenarios: list, workers: Optional[int]) -> list:
    if workers and workers > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_scenario, scenarios))
    return [run_scenario(s) for s in scenarios]


# -- compare / sweep -------------------------------------------------------

COMPARE_FIELDS = ("name", "ic", "mode", "count", "min", "max", "mean", "stddev", "jitter", "mean_ns", "ratio")


def compare(scenarios: Sequence, baseline: Optional[str] = None, workers: Optional[int] = None) -> list:
    """Run each scenario and tabulate its pooled latency against ``baseline``.

    Rows keep the input order; ``ratio`` is mean / baseline mean.
    """
    scs = [as_scenario(s) for s in scenarios]
    if len(scs) < 2:
        raise ValidationError("scenarios", "compare needs at least two scenarios")
    names = [s.name for s in scs]
    if len(set(names)) != len(names):
        raise ValidationError("scenarios", "scenario names must be unique")
    base = names[0] if baseline is None else baseline
    if base not in names:
        raise ValidationError("baseline", f"no scenario named {base!r}")
    results = _run_many(scs, workers)
    rows = []
    for s, r in zip(scs, results):
        pooled = LatencyStats.from_samples(-1, [x for v in r.latencies.values() for x in v])
        rows.append({
            "name": s.name, "ic": s.ic, "mode": s.mode, "count": pooled.count,
            "min": pooled.min, "max": pooled.max, "mean": pooled.mean, "stddev": pooled.stddev,
            "jitter": pooled.jitter, "mean_ns": to_ns(pooled.mean, s.clock_mhz),
        })
    ref = rows[names.index(base)]["mean"]
    for row in rows:
        row["ratio"] = row["mean"] / ref if ref else math.nan
    return rows


def to_ns(cyc: float, clock_mhz: float) -> float:
    return cyc * 1000.0 / clock_mhz


STAT_FIELDS = ("line", "count", "min", "max", "mean", "stddev", "jitter", "coalesced")


def sweep(base, param: str, values: Sequence, workers: Optional[int] = None) -> list:
    """One run per value of the dotted ``param`` path; one row per (value, line)."""
    base = as_scenario(base)
    values = list(values)
    if not values:
        raise ValidationError("values", "sweep needs at least one value")
    scs = []
    for v in values:
        data = resolve_path(base.raw, param, v)
        data["name"] = f"{base.name}[{param}={v}]"
        scs.append(parse_scenario(data))
    rows = []
    for v, r in zip(values, _run_many(scs, workers)):
        for st in r.stats:
            row = {param: v}
            row.update((k, getattr(st, k)) for k in STAT_FIELDS)
            rows.append(row)
    return rows


# -- export ------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return repr(round(x, 6))
    return str(x)


def rows_to_csv(rows: Sequence[dict], fields: Optional[Sequence[str]] = None) -> str:
    if fields is None:
        fields = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


def stats_rows(result: RunResult) -> list:
    s = result.scenario
    rows = []
    for st in result.stats:
        row = {"scenario": s.name, "ic": s.ic, "mode": s.mode}
        row.update((k, getattr(st, k)) for k in STAT_FIELDS)
        row["mean_ns"] = to_ns(st.mean, s.clock_mhz)
        rows.append(row)
    return rows


STATS_CSV_FIELDS = ("scenario", "ic", "mode") + STAT_FIELDS + ("mean_ns",)
TRACE_CSV_FIELDS = ("cycle", "kind", "payload")


def export(obj, fmt: str = "csv", path=None) -> str:
    """Serialise a :class:`RunResult`, its stats or a trace.

    ``fmt`` is ``csv`` or ``json`` (one structured record per row).  The
    text is returned and, when ``path`` is given, written there.
    """
    if isinstance(obj, RunResult):
        obj_rows, kind = stats_rows(obj), "stats"
    elif obj and isinstance(obj[0], LatencyStats):
        obj_rows = [{k: getattr(st, k) for k in STAT_FIELDS} for st in obj]
        kind = "bare_stats"
    elif not obj or isinstance(obj[0], TraceEvent):
        obj_rows, kind = obj, "trace"
    else:
        obj_rows, kind = list(obj), "rows"

    if fmt == "csv":
        if kind == "trace":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(TRACE_CSV_FIELDS)
            for e in obj_rows:
                w.writerow([e.cycle, e.kind, e.payload_str()])
            text = buf.getvalue()
        elif kind == "stats":
            text = rows_to_csv(obj_rows, STATS_CSV_FIELDS)
        elif kind == "bare_stats":
            text = rows_to_csv(obj_rows, STAT_FIELDS)
        else:
            text = rows_to_csv(obj_rows)
    elif fmt == "json":
        if kind == "trace":
            records = [{"cycle": e.cycle, "kind": e.kind, "payload": e.payload} for e in obj_rows]
        else:
            records = [{k: _json_num(v) for k, v in r.items()} for r in obj_rows]
        text = "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
    else:
        raise ValidationError("format", f"expected 'csv' or 'json', got {fmt!r}")

    if path is not None:
        path = Path(path)
        try:
            path.write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return text


def _json_num(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v
