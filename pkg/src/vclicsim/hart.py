"""Interrupt path of a hypervisor-capable hart attached to a CLIC-style controller.

The model works at event granularity: it decides whether a presented
:class:`~vclicsim.regs.Selection` is taken, keeps the nested handler stack
and charges cycle costs for entry, exit and tail-chaining.  Handler bodies
are opaque durations owned by the harness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .errors import ProtocolError
from .regs import Priv, Selection, VmPrioTable
from .sw_stack import WARM, CostProfile, MicroArchState, apply_jitter, cycles
from .trace import TraceEvent, stack_str

XLEN_BYTES = 8


class TakeKind(enum.Enum):
    NONE = "none"
    TRAP_HIGHER_PRIV = "trap_higher_priv"
    TAKE_SAME_PRIV = "take_same_priv"
    DELIVER_TO_RUNNING_VM = "deliver_to_running_vm"
    TRAP_HS_FOR_VM_SWITCH = "trap_hs_for_vm_switch"


@dataclass(frozen=True)
class TakeDecision:
    kind: TakeKind
    selection: Optional[Selection] = None
    target_priv: Optional[Priv] = None
    target_vsid: Optional[int] = None


NO_TAKE = TakeDecision(TakeKind.NONE)

_THRESH = {Priv.M: "mintthresh", Priv.HS: "sintthresh", Priv.VS: "vsintthresh"}
_TVT = {Priv.M: "mtvt", Priv.HS: "stvt", Priv.VS: "vstvt"}


@dataclass
class CsrFile:
    mintthresh: int = 0
    sintthresh: int = 0
    vsintthresh: int = 0
    mtvt: int = 0
    stvt: int = 0
    vstvt: int = 0
    hstatus_vgein: int = 0

    # in CLIC mode the controller owns what these used to do
    HARDWIRED_ZERO = frozenset({"vsie", "vsip", "vsideleg"})

    def read_csr(self, name: str) -> int:
        if name in self.HARDWIRED_ZERO:
            return 0
        if name.startswith("_") or not hasattr(self, name):
            raise KeyError(f"unknown CSR {name!r}")
        return getattr(self, name)

    def write_csr(self, name: str, value: int) -> None:
        if name in self.HARDWIRED_ZERO:
            return
        if name.startswith("_") or not hasattr(self, name):
            raise KeyError(f"unknown CSR {name!r}")
        if name.endswith("intthresh"):
            value &= 0xFF
        elif name == "hstatus_vgein":
            value &= 0x3F
        setattr(self, name, value)

    def threshold(self, priv: Priv) -> int:
        return getattr(self, _THRESH[priv])

    def tvt(self, priv: Priv) -> int:
        return getattr(self, _TVT[priv])


@dataclass(frozen=True)
class Frame:
    priv_class: Priv
    level: int
    line: int
    vsid: Optional[int] = None
    shv: bool = False

    @property
    def key(self) -> tuple:
        return (int(self.priv_class), self.level)


@dataclass
class HartState:
    """Privilege state of the hart plus its stack of active handlers.

    ``base_priv`` is the mode of the interrupted non-handler code (M for
    bare metal, VS while a guest runs); the current privilege is that of
    the innermost handler, if any.
    """

    base_priv: Priv = Priv.M
    running_vsid: Optional[int] = None
    isr_stack: list = field(default_factory=list)
    busy_until: int = 0

    @property
    def priv(self) -> Priv:
        return self.isr_stack[-1].priv_class if self.isr_stack else self.base_priv

    def push(self, frame: Frame) -> None:
        if self.isr_stack and frame.key <= self.isr_stack[-1].key:
            raise ProtocolError(f"frame {frame} does not outrank {self.isr_stack[-1]}")
        self.isr_stack.append(frame)


def effective_threshold(cls: Priv, st: HartState, csr: CsrFile, frames=None) -> int:
    """Level a new interrupt of class ``cls`` must exceed to preempt."""
    frames = st.isr_stack if frames is None else frames
    levels = [f.level for f in frames if f.priv_class == cls]
    return max([csr.threshold(cls)] + levels)


def eval_take(
    sel: Optional[Selection], st: HartState, csr: CsrFile, vmprio: Optional[VmPrioTable] = None
) -> TakeDecision:
    """Decide whether the hart takes ``sel`` in state ``st``.

    While a guest runs, an interrupt for a more privileged class traps to
    that class; one for the running guest is taken by the guest when its
    level clears the nesting threshold; one for another guest traps to HS
    only if that guest has a strictly higher VM priority.
    """
    if sel is None:
        return NO_TAKE
    cur = st.priv
    cls = sel.priv_class
    if cls > cur:
        if sel.level > effective_threshold(cls, st, csr):
            return TakeDecision(TakeKind.TRAP_HIGHER_PRIV, sel, target_priv=cls)
        return NO_TAKE
    if cls < cur:
        return NO_TAKE
    if cur == Priv.VS:
        if sel.vsid == st.running_vsid:
            if sel.level > effective_threshold(Priv.VS, st, csr):
                return TakeDecision(TakeKind.DELIVER_TO_RUNNING_VM, sel, Priv.VS, sel.vsid)
            return NO_TAKE
        vm = vmprio or VmPrioTable(bits=0)
        if vm.effective(sel.vsid) > vm.effective(st.running_vsid):
            return TakeDecision(TakeKind.TRAP_HS_FOR_VM_SWITCH, sel, Priv.HS, sel.vsid)
        return NO_TAKE
    if sel.level > effective_threshold(cls, st, csr):
        return TakeDecision(TakeKind.TAKE_SAME_PRIV, sel, target_priv=cls)
    return NO_TAKE


class Hart:
    """Hart interrupt path bound to one interrupt controller.

    ``ic`` must provide ``arbitrate()``, ``claim(id, now)`` and a
    ``vmprio`` table.
    """

    def __init__(self, ic, csr: CsrFile | None = None, state: HartState | None = None):
        self.ic = ic
        self.csr = csr or CsrFile()
        self.state = state or HartState()

    def eval_take(self, sel: Optional[Selection] = None) -> TakeDecision:
        if sel is None:
            sel = self.ic.arbitrate()
        return eval_take(sel, self.state, self.csr, getattr(self.ic, "vmprio", None))

    def _event(self, now, kind, sel: Selection, **extra) -> TraceEvent:
        payload = {"line": sel.id, "class": sel.priv_class.name, "level": sel.level}
        if sel.vsid is not None:
            payload["vsid"] = sel.vsid
        payload.update(extra)
        return TraceEvent(now, kind, payload)

    def enter_trap(
        self,
        decision: TakeDecision,
        now: int,
        costs: CostProfile,
        uarch: MicroArchState = WARM,
        *,
        extra_hw: int = 0,
        extra_sw: int = 0,
        frame_class: Optional[Priv] = None,
    ):
        """Take ``decision`` at cycle ``now``.

        Returns ``(cycle, events)``.  For handler-taking decisions ``cycle``
        is the first handler instruction.  For a VM-switch trap no handler
        frame is pushed and no line is claimed; ``cycle`` is when the
        hypervisor is ready to switch.
        """
        sel = decision.selection
        if decision.kind == TakeKind.NONE or sel is None:
            raise ProtocolError("enter_trap without a take decision")
        st = self.state
        if decision.kind == TakeKind.TRAP_HS_FOR_VM_SWITCH:
            sw, total = apply_jitter(costs.hv_trap_entry_cost, costs.hw_take_cost + costs.hv_trap_entry_cost, uarch, costs)
            ev = self._event(now, "trap_enter", sel, to="HS", reason="vm_switch", running=st.running_vsid)
            return now + cycles(total), [ev]

        cls = frame_class or sel.priv_class
        if sel.shv:
            vector = self.csr.tvt(cls) + XLEN_BYTES * sel.id
            sw = costs.context_save_cost + costs.vector_fetch_cost
        else:
            vector = None
            sw = costs.context_save_cost + costs.sw_decode_cost
        sw += extra_sw
        _, total = apply_jitter(sw, sw + costs.hw_take_cost + extra_hw, uarch, costs)
        self.ic.claim(sel.id, now)
        st.push(Frame(cls, sel.level, sel.id, sel.vsid if cls == Priv.VS else None, sel.shv))
        extra = {"to": cls.name, "stack": stack_str(st.isr_stack)}
        if vector is not None:
            extra["vector"] = hex(vector)
        return now + cycles(total), [self._event(now, "trap_enter", sel, **extra)]

    def read_nxti(self, now: Optional[int] = None, claim: bool = True) -> Optional[Selection]:
        """Tail-chain target for the innermost handler, claimed when found."""
        st = self.state
        if not st.isr_stack:
            return None
        top = st.isr_stack[-1]
        sel = self.ic.arbitrate()
        if sel is None or sel.shv or sel.priv_class != top.priv_class:
            return None
        if top.priv_class == Priv.VS and sel.vsid != st.running_vsid:
            return None
        if sel.level <= effective_threshold(top.priv_class, st, self.csr, st.isr_stack[:-1]):
            return None
        if claim:
            self.ic.claim(sel.id, now if now is not None else 0)
        return sel

    def exit_trap(
        self, now: int, costs: CostProfile, uarch: MicroArchState = WARM, *, tail_chain: bool = True
    ):
        """Leave the innermost handler.

        Returns ``(cycle, events, chained)``.  When a tail-chain target is
        found, ``chained`` is its Selection, the stack top is replaced and
        ``cycle`` is the chained handler's first instruction.  Otherwise the
        frame is popped and ``cycle`` is when the interrupted code resumes.
        """
        st = self.state
        if not st.isr_stack:
            raise ProtocolError("exit_trap with an empty handler stack")
        top = st.isr_stack[-1]
        sel = self.read_nxti(now) if tail_chain else None
        if sel is not None:
            st.isr_stack.pop()
            st.push(Frame(top.priv_class, sel.level, sel.id, sel.vsid, sel.shv))
            _, total = apply_jitter(costs.tail_chain_cost, costs.tail_chain_cost, uarch, costs)
            ev = self._event(now, "tail_chain", sel, prev=top.line, stack=stack_str(st.isr_stack))
            return now + cycles(total), [ev], sel
        st.isr_stack.pop()
        _, total = apply_jitter(costs.context_restore_cost, costs.context_restore_cost, uarch, costs)
        ev = TraceEvent(now, "isr_exit", {"line": top.line, "class": top.priv_class.name,
                                          "stack": stack_str(st.isr_stack)})
        return now + cycles(total), [ev], None
