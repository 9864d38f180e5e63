from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vclicsim.errors import InvalidConfig, ValidationError
from vclicsim.sw_stack import (
    WARM,
    CacheState,
    CostProfile,
    HypervisorKind,
    HypervisorModel,
    MicroArchState,
    SchedKind,
    VmEntry,
    apply_jitter,
    cycles,
    emulation_latency,
    get_profile,
    irq_context_cost,
    schedule,
    vm_context_switch_cost,
)

from _oracles import ic_context_cycles

COSTS = get_profile("cheshire-50mhz")


def dyn(vsprio, counts=(64, 64), prios=(1, 5)):
    return HypervisorModel(
        HypervisorKind.DYNAMIC, vsprio,
        {v: VmEntry(v, p, n) for v, (p, n) in enumerate(zip(prios, counts), start=1)},
    )


def test_hw_virtualized_adds_nothing():
    assert emulation_latency("vclic", COSTS) == 0
    assert emulation_latency("aia", COSTS) == 0


def test_plic_emulation_costlier_than_clic():
    assert emulation_latency("plic", COSTS) > emulation_latency("clic", COSTS)
    assert emulation_latency("plic", COSTS) - emulation_latency("clic", COSTS) == COSTS.hv_emulation_cost_per_access


def test_unknown_ic_kind():
    with pytest.raises(InvalidConfig):
        emulation_latency("gic", COSTS)


def test_switch_with_vsprio_is_base_cost():
    for n in (0, 1, 17, 64):
        assert vm_context_switch_cost(1, 2, dyn(True, (n, n)), COSTS) == 35_000


def test_switch_without_vsprio_anchors():
    assert vm_context_switch_cost(1, 2, dyn(False, (64, 64)), COSTS) == 45_000
    assert vm_context_switch_cost(1, 2, dyn(False, (1, 1)), COSTS) == 36_250
    assert round((45_000 - 35_000) / 35_000, 3) == 0.286


@pytest.mark.parametrize("n", range(0, 65))
def test_ic_context_cost_matches_linear_oracle(n):
    got = cycles(irq_context_cost(n, COSTS))
    want = ic_context_cycles(n)
    assert got == int(want + Fraction(1, 2)) if n else got == 0


def test_ic_context_midpoint():
    # 1250 + 8750 * 31 / 63 = 5555.56 -> 5556 cycles
    assert cycles(irq_context_cost(32, COSTS)) == 5556


def test_switch_uses_mean_of_both_counts():
    assert vm_context_switch_cost(1, 2, dyn(False, (1, 63)), COSTS) == 35_000 + cycles(irq_context_cost(32, COSTS))


def test_static_hypervisor_has_no_switches():
    hv = HypervisorModel(HypervisorKind.STATIC, True, {1: VmEntry(1)})
    with pytest.raises(InvalidConfig):
        vm_context_switch_cost(1, 1, hv, COSTS)
    assert schedule(hv, 0, 1).kind == SchedKind.STAY
    with pytest.raises(InvalidConfig):
        schedule(hv, 0, 1, pending_foreign=2)
    with pytest.raises(InvalidConfig):
        HypervisorModel(HypervisorKind.STATIC, True, {1: VmEntry(1), 2: VmEntry(2)})


def test_schedule_preempts_for_higher_priority():
    act = schedule(dyn(False), 0, running_vsid=1, pending_foreign=2, costs=COSTS)
    assert act.kind == SchedKind.PREEMPT and act.target_vsid == 2 and act.cost == 45_000


def test_schedule_equal_priority_waits():
    act = schedule(dyn(True, prios=(3, 3)), 0, running_vsid=1, pending_foreign=2, costs=COSTS)
    assert act.kind == SchedKind.STAY


def test_schedule_round_robin():
    act = schedule(dyn(True), 0, running_vsid=2, at_timeslice=True, costs=COSTS)
    assert act.kind == SchedKind.ROUND_ROBIN and act.target_vsid == 1 and act.cost == 35_000


def test_jitter_identity_when_warm():
    assert apply_jitter(100, 104, WARM, COSTS) == (100, 104)


def test_cold_caches_scale_software_only():
    cold = MicroArchState(icache=CacheState.COLD, dcache=CacheState.COLD)
    assert apply_jitter(100, 104, cold, COSTS) == (800, 804)


def test_cold_tlb_scales_total():
    sw, total = apply_jitter(100, 104, MicroArchState(tlb=CacheState.COLD), COSTS)
    assert sw == 100 and total == pytest.approx(104 * 1.05)


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.floats(1, 20), st.floats(1, 2))
def test_jitter_never_speeds_up(sw, hw, cache_mult, tlb_mult):
    costs = COSTS.with_overrides({"cold_cache_sw_multiplier": cache_mult, "cold_tlb_total_multiplier": tlb_mult})
    for state in (WARM, MicroArchState(dcache=CacheState.COLD), MicroArchState(tlb=CacheState.COLD),
                  MicroArchState(CacheState.COLD, CacheState.COLD, CacheState.COLD)):
        _, total = apply_jitter(sw, sw + hw, state, costs)
        assert total >= sw + hw - 1e-9


def test_profile_validation():
    with pytest.raises(ValidationError) as e:
        CostProfile(hw_take_cost=-1)
    assert e.value.path == "costs.hw_take_cost"
    with pytest.raises(ValidationError):
        CostProfile(cold_tlb_total_multiplier=0.5)
    with pytest.raises(ValidationError) as e:
        CostProfile(tail_chain_cost=160)
    assert e.value.path == "costs.tail_chain_cost"
    with pytest.raises(ValidationError) as e:
        COSTS.with_overrides({"hw_take": 3})
    assert e.value.path == "costs.hw_take"


def test_profile_from_directory(tmp_path, monkeypatch):
    (tmp_path / "slowbus.toml").write_text('base = "cheshire-50mhz"\nmmio_cost = 40\n')
    monkeypatch.setenv("VCLICSIM_PROFILE_DIR", str(tmp_path))
    p = get_profile("slowbus")
    assert p.mmio_cost == 40 and p.context_save_cost == COSTS.context_save_cost
    with pytest.raises(ValidationError):
        get_profile("missing")


def test_rounding_half_up():
    assert [cycles(x) for x in (0.5, 1.49, 1.5, 108.15)] == [1, 1, 2, 108]
