import pytest
from hypothesis import given
from hypothesis import strategies as st

from vclicsim.errors import ProtocolError
from vclicsim.hart import CsrFile, Frame, Hart, HartState, TakeKind, eval_take
from vclicsim.regs import ClicConfig, Priv, Selection, Trigger, VClic, VmPrioTable
from vclicsim.sw_stack import CostProfile, MicroArchState, CacheState

COSTS = CostProfile()


def vs_sel(vsid, level, line=1, shv=False, vm_prio=0):
    return Selection(line, Priv.VS, vm_prio, level, 0, shv, vsid)


def guest(vsid=2, frames=()):
    st_ = HartState(Priv.VS, vsid)
    st_.isr_stack.extend(frames)
    return st_


def prio_table(**prios):
    t = VmPrioTable(bits=8)
    for k, v in prios.items():
        t.set(int(k[1:]), v)
    return t


def test_deliver_to_running_vm():
    d = eval_take(vs_sel(2, 100), guest(2), CsrFile())
    assert d.kind == TakeKind.DELIVER_TO_RUNNING_VM and d.target_vsid == 2


def test_s_mode_interrupt_traps_up():
    sel = Selection(3, Priv.HS, 0, 10, 0, False)
    d = eval_take(sel, guest(2), CsrFile())
    assert d.kind == TakeKind.TRAP_HIGHER_PRIV and d.target_priv == Priv.HS


def test_higher_priority_vm_forces_switch():
    d = eval_take(vs_sel(7, 1), guest(2), CsrFile(), prio_table(v7=5, v2=1))
    assert d.kind == TakeKind.TRAP_HS_FOR_VM_SWITCH and d.target_vsid == 7


def test_equal_priority_vm_waits():
    assert eval_take(vs_sel(7, 255), guest(2), CsrFile(), prio_table(v7=1, v2=1)).kind == TakeKind.NONE


def test_lower_class_never_preempts():
    st_ = HartState(Priv.M)
    assert eval_take(Selection(1, Priv.HS, 0, 255, 0, False), st_, CsrFile()).kind == TakeKind.NONE


def test_nesting_threshold_enumeration():
    frame = Frame(Priv.VS, 50, 9, 2)
    for level in range(256):
        for thresh in (0, 20, 50, 80, 255):
            csr = CsrFile(vsintthresh=thresh)
            d = eval_take(vs_sel(2, level), guest(2, [frame]), csr)
            taken = d.kind == TakeKind.DELIVER_TO_RUNNING_VM
            assert taken == (level > max(thresh, 50)), (level, thresh)


def test_nesting_boundary():
    frame = Frame(Priv.VS, 50, 9, 2)
    assert eval_take(vs_sel(2, 50), guest(2, [frame]), CsrFile()).kind == TakeKind.NONE
    assert eval_take(vs_sel(2, 51), guest(2, [frame]), CsrFile()).kind == TakeKind.DELIVER_TO_RUNNING_VM


def test_same_priv_nesting_in_m():
    st_ = HartState(Priv.M)
    st_.isr_stack.append(Frame(Priv.M, 100, 1))
    sel = Selection(2, Priv.M, 0, 101, 0, False)
    assert eval_take(sel, st_, CsrFile()).kind == TakeKind.TAKE_SAME_PRIV
    assert eval_take(sel, st_, CsrFile(mintthresh=200)).kind == TakeKind.NONE


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255), st.booleans())
def test_rule_iii_predicate(p_run, p_other, level, enabled):
    t = VmPrioTable(bits=8, enabled=enabled)
    t.set(2, p_run)
    t.set(7, p_other)
    d = eval_take(vs_sel(7, level), guest(2), CsrFile(), t)
    expect = enabled and p_other > p_run
    assert (d.kind == TakeKind.TRAP_HS_FOR_VM_SWITCH) == expect
    assert d.kind in (TakeKind.TRAP_HS_FOR_VM_SWITCH, TakeKind.NONE)


def test_hardwired_csrs():
    csr = CsrFile()
    for name in ("vsie", "vsip", "vsideleg"):
        csr.write_csr(name, 0xFFFF)
        assert csr.read_csr(name) == 0
    csr.write_csr("vsintthresh", 0x1FF)
    assert csr.read_csr("vsintthresh") == 0xFF
    csr.write_csr("hstatus_vgein", 0xFF)
    assert csr.read_csr("hstatus_vgein") == 0x3F
    with pytest.raises(KeyError):
        csr.read_csr("mcause")


def test_push_rejects_non_increasing():
    st_ = HartState(Priv.M)
    st_.push(Frame(Priv.VS, 10, 0, 1))
    st_.push(Frame(Priv.HS, 5, 1))
    with pytest.raises(ProtocolError):
        st_.push(Frame(Priv.HS, 5, 2))


# -- entry, exit, tail chaining -------------------------------------------------

def vclic_hart(nlbits=8):
    ic = VClic(ClicConfig(n_irqs=16, nlbits=nlbits))
    return ic, Hart(ic, CsrFile(), HartState(Priv.M))


def fire(ic, line, ctl, shv=False, trigger=Trigger.EDGE):
    ic.program_line(line, ctl=ctl, shv=shv, trigger=trigger, mode=Priv.M)
    ic.set_line(line, True, 0)


def test_entry_cost_without_vectoring():
    ic, hart = vclic_hart()
    fire(ic, 3, 10)
    cyc, evs = hart.enter_trap(hart.eval_take(), 100, COSTS)
    assert cyc == 100 + 3 + 80 + 20
    assert evs[0].kind == "trap_enter" and "vector" not in evs[0].payload


def test_entry_cost_with_vectoring():
    ic, hart = vclic_hart()
    hart.csr.write_csr("mtvt", 0x8000)
    fire(ic, 3, 10, shv=True)
    cyc, evs = hart.enter_trap(hart.eval_take(), 100, COSTS)
    assert cyc == 100 + 3 + 80 + 6
    assert evs[0].payload["vector"] == hex(0x8000 + 8 * 3)


def test_two_nested_entries():
    ic, hart = vclic_hart()
    fire(ic, 1, 10)
    hart.enter_trap(hart.eval_take(), 0, COSTS)
    fire(ic, 2, 20)
    hart.enter_trap(hart.eval_take(), 5, COSTS)
    assert [f.level for f in hart.state.isr_stack] == [10, 20]


def test_exit_without_pending():
    ic, hart = vclic_hart()
    fire(ic, 1, 10)
    hart.enter_trap(hart.eval_take(), 0, COSTS)
    cyc, evs, chained = hart.exit_trap(500, COSTS)
    assert (cyc, chained, hart.state.isr_stack) == (580, None, [])
    assert evs[0].kind == "isr_exit"


def test_exit_returns_to_outer_frame():
    ic, hart = vclic_hart()
    fire(ic, 1, 10)
    hart.enter_trap(hart.eval_take(), 0, COSTS)
    fire(ic, 2, 50)
    hart.enter_trap(hart.eval_take(), 1, COSTS)
    hart.exit_trap(300, COSTS)
    assert [f.line for f in hart.state.isr_stack] == [1]


def test_tail_chain_beats_exit_plus_entry():
    ic, hart = vclic_hart()
    fire(ic, 1, 50)
    hart.enter_trap(hart.eval_take(), 0, COSTS)
    fire(ic, 2, 60)
    # the hart is inside an ISR that masks nothing below 50 yet: level 60 pending
    cyc, evs, chained = hart.exit_trap(1000, COSTS)
    assert chained.id == 2 and evs[0].kind == "tail_chain"
    assert cyc - 1000 == COSTS.tail_chain_cost
    full = COSTS.context_restore_cost + COSTS.hw_take_cost + COSTS.context_save_cost + COSTS.sw_decode_cost
    assert cyc - 1000 < full
    assert [f.line for f in hart.state.isr_stack] == [2]


def test_read_nxti_eligibility():
    ic = VClic(ClicConfig(n_irqs=16))
    hart = Hart(ic, CsrFile(), HartState(Priv.VS, 2))
    ic.program_line(1, ctl=50, vsid=2)
    ic.set_line(1, True, 0)
    hart.enter_trap(hart.eval_take(), 0, COSTS)
    ic.program_line(2, ctl=60, vsid=2)
    ic.set_line(2, True, 0)
    assert hart.read_nxti(claim=False).id == 2

    ic.program_line(2, ctl=60, vsid=2, shv=True)
    assert hart.read_nxti(claim=False) is None

    ic.program_line(2, ctl=60, vsid=3)
    assert hart.read_nxti(claim=False) is None


def test_read_nxti_claims():
    ic, hart = vclic_hart()
    fire(ic, 1, 50)
    hart.enter_trap(hart.eval_take(), 0, COSTS)
    fire(ic, 2, 60)
    assert hart.read_nxti(7).id == 2
    assert ic.ip[2] == 0 and ic.claim_cycle[2] == 7


def test_vm_switch_trap_pushes_nothing():
    ic = VClic(ClicConfig(n_irqs=16))
    ic.set_vsprio(7, 5)
    ic.set_vsprio(2, 1)
    hart = Hart(ic, CsrFile(), HartState(Priv.VS, 2))
    ic.program_line(4, vsid=7)
    ic.set_line(4, True, 0)
    d = hart.eval_take()
    assert d.kind == TakeKind.TRAP_HS_FOR_VM_SWITCH
    cyc, evs = hart.enter_trap(d, 10, COSTS)
    assert cyc == 10 + 3 + 1376
    assert hart.state.isr_stack == [] and ic.ip[4] == 1


def test_cold_state_stretches_entry():
    ic, hart = vclic_hart()
    fire(ic, 1, 10)
    cold = MicroArchState(icache=CacheState.COLD)
    cyc, _ = hart.enter_trap(hart.eval_take(), 0, COSTS, cold)
    assert cyc == 3 + 8 * 100


def test_enter_without_decision():
    ic, hart = vclic_hart()
    with pytest.raises(ProtocolError):
        hart.enter_trap(hart.eval_take(), 0, COSTS)
    with pytest.raises(ProtocolError):
        hart.exit_trap(0, COSTS)
