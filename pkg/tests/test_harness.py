import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from vclicsim import compare, export, load_scenario, run_scenario, sweep
from vclicsim.errors import ValidationError
from vclicsim.sw_stack import get_profile

SCEN = Path(__file__).resolve().parent.parent / "scenarios"
C = get_profile("cheshire-50mhz")

WIRE = 1
ENTRY = C.hw_take_cost + C.context_save_cost + C.sw_decode_cost


def grid_cell(ic, mode, **kw):
    d = {"name": f"{ic}-{mode}", "ic": ic, "mode": mode, "iterations": 20,
         "stimulus": [{"line": 3, "period": 5000}]}
    if mode != "bare_metal":
        d["vms"] = [{"vsid": 1, "prio": 1, "lines": [3]}]
    d.update(kw)
    return d


@pytest.mark.parametrize("ic,mode,expect", [
    ("vclic", "bare_metal", WIRE + ENTRY),
    ("vclic", "static_hv", WIRE + ENTRY),
    ("clic", "bare_metal", WIRE + ENTRY),
    ("clic", "static_hv", WIRE + ENTRY + C.hv_trap_entry_cost + 2 * C.hv_emulation_cost_per_access),
    ("plic", "bare_metal", WIRE + ENTRY + C.mmio_cost),
    ("plic", "static_hv", WIRE + ENTRY + C.mmio_cost + C.hv_trap_entry_cost + 3 * C.hv_emulation_cost_per_access),
    ("aia", "bare_metal", 18 + WIRE + ENTRY),
    ("aia", "static_hv", 18 + WIRE + ENTRY),
])
def test_latency_composition(ic, mode, expect):
    st_ = run_scenario(grid_cell(ic, mode)).stats[0]
    assert (st_.min, st_.max, st_.count) == (expect, expect, 20)
    assert st_.jitter == 0 and st_.stddev == 0


def test_frozen_grid_values():
    values = {(ic, m): run_scenario(grid_cell(ic, m)).stats[0].mean
              for ic in ("plic", "clic", "aia", "vclic") for m in ("bare_metal", "static_hv")}
    assert values == {
        ("plic", "bare_metal"): 116, ("plic", "static_hv"): 2392,
        ("clic", "bare_metal"): 104, ("clic", "static_hv"): 2080,
        ("aia", "bare_metal"): 122, ("aia", "static_hv"): 122,
        ("vclic", "bare_metal"): 104, ("vclic", "static_hv"): 104,
    }


def test_shv_skips_decode():
    d = grid_cell("vclic", "bare_metal", stimulus=[{"line": 3, "period": 5000, "shv": True}])
    assert run_scenario(d).stats[0].mean == WIRE + C.hw_take_cost + C.context_save_cost + C.vector_fetch_cost


def test_traffic_adds_jitter():
    d = grid_cell("aia", "bare_metal", iterations=100, bus={"traffic_rate": 0.5, "burstiness": 4})
    assert run_scenario(d).stats[0].jitter > 0


def test_bit_identical_reruns():
    d = grid_cell("aia", "static_hv", bus={"traffic_rate": 0.7, "burstiness": 3})
    a, b = run_scenario(d), run_scenario(d)
    assert export(a.trace) == export(b.trace) and export(a) == export(b)


def test_seed_changes_bus():
    a = run_scenario(grid_cell("aia", "bare_metal", seed=1, bus={"traffic_rate": 0.7, "burstiness": 3}))
    b = run_scenario(grid_cell("aia", "bare_metal", seed=2, bus={"traffic_rate": 0.7, "burstiness": 3}))
    assert a.latencies != b.latencies


def test_preemption_latency_breakdown():
    for vsprio, switch in ((False, 45_000), (True, 35_000)):
        r = run_scenario(SCEN / f"preempt-vsprio-{'on' if vsprio else 'off'}.toml")
        expect = WIRE + C.hw_take_cost + C.hv_trap_entry_cost + switch + ENTRY
        assert r.stats[0].mean == expect
        kinds = [e.kind for e in r.trace]
        assert kinds.index("vm_switch_begin") < kinds.index("vm_switch_end") < kinds.index("isr_first_insn")


def dyn_pair(prio_rt, vsprio=True, timeslice=0):
    return {
        "name": "pair", "ic": "vclic", "mode": "dynamic_hv", "iterations": 1,
        "hypervisor": {"vsprio": vsprio, "timeslice_cycles": timeslice},
        "vms": [{"vsid": 1, "prio": 1, "lines": [10]}, {"vsid": 2, "prio": prio_rt, "lines": [20]}],
        "stimulus": [{"line": 20, "cycles": [1000]}],
    }


def test_equal_priority_waits_for_timeslice():
    r = run_scenario(dyn_pair(1, timeslice=100_000))
    lat = r.stats[0].mean
    # delivered only after the round-robin switch at the first tick
    assert lat == 100_000 + C.hw_take_cost + C.hv_trap_entry_cost + 35_000 + ENTRY - 1000
    sels = [e for e in r.trace if e.kind == "selection" and e.payload["running"] == 1]
    assert sels and all(e.payload["take"] == "none" for e in sels)


def test_equal_priority_without_timeslice_stays_pending():
    r = run_scenario(dyn_pair(1))
    assert r.stats[0].count == 0 and r.counters["pending_at_end"] == 1


def test_vsprio_off_equal_priority_parks_line():
    r = run_scenario(dyn_pair(1, vsprio=False, timeslice=100_000))
    acts = [e.payload for e in r.trace if e.kind == "hv_return"]
    assert acts and acts[0]["action"] == "stay"
    assert r.stats[0].count == 1


def test_level_line_deasserts_at_handler_end():
    d = grid_cell("vclic", "bare_metal", stimulus=[{"line": 3, "period": 5000, "trigger": "level"}])
    r = run_scenario(d)
    assert r.stats[0].count == 20 and r.counters["coalesced"] == 0


def test_coalescing_counts():
    # edges every 50 cycles into a 200-cycle handler
    d = grid_cell("vclic", "bare_metal", stimulus=[{"line": 3, "period": 50}])
    r = run_scenario(d)
    c = r.counters
    assert c["coalesced"] > 0
    assert c["asserts"] == c["delivered"] + c["coalesced"] + c["pending_at_end"]


def test_tail_chain_in_nested_scenario():
    r = run_scenario(SCEN / "nested-tail-chain.toml")
    kinds = {e.kind for e in r.trace}
    assert "tail_chain" in kinds
    depths = [e.payload["stack"].count("/") + 1 for e in r.trace if e.kind == "isr_first_insn"]
    assert max(depths) >= 2


def test_access_faults_traced():
    r = run_scenario(SCEN / "isolation-probe.toml")
    faults = [e for e in r.trace if e.kind == "access_fault"]
    assert len(faults) == 2 and r.counters["access_faults"] == 2
    assert r.stats[0].count == 10


def test_fifo_pairing():
    r = run_scenario(grid_cell("aia", "bare_metal", iterations=200, bus={"traffic_rate": 0.6, "burstiness": 3},
                               stimulus=[{"line": 3, "period": 400}]))
    asserts = [e.cycle for e in r.trace if e.kind == "line_assert"]
    firsts = [e for e in r.trace if e.kind == "isr_first_insn"]
    assert r.counters["coalesced"] == 0
    assert [e.cycle - e.payload["latency"] for e in firsts] == asserts


def test_trace_cycles_nondecreasing():
    for f in sorted(SCEN.glob("*.toml")):
        trace = run_scenario(f).trace
        assert all(a.cycle <= b.cycle for a, b in zip(trace, trace[1:])), f.name


random_scenario = st.fixed_dictionaries({
    "ic": st.sampled_from(["vclic", "clic", "plic", "aia"]),
    "mode": st.sampled_from(["bare_metal", "static_hv"]),
    "lines": st.lists(st.tuples(st.integers(1, 12), st.integers(0, 255), st.integers(150, 4000),
                                st.sampled_from(["edge", "level"])),
                      min_size=1, max_size=4, unique_by=lambda t: t[0]),
    "rate": st.sampled_from([0.0, 0.3, 0.8]),
    "seed": st.integers(0, 1000),
})


def build(case, step):
    d = {"ic": case["ic"], "mode": case["mode"], "iterations": 8, "seed": case["seed"], "step": step,
         "bus": {"traffic_rate": case["rate"], "burstiness": 3},
         "stimulus": [{"line": ln, "ctl": ctl, "period": per, "trigger": trig}
                      for ln, ctl, per, trig in case["lines"]]}
    if case["mode"] != "bare_metal":
        d["vms"] = [{"vsid": 1, "lines": [t[0] for t in case["lines"]]}]
    return d


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(random_scenario)
def test_cycle_stepping_matches_event_stepping(case):
    a = run_scenario(build(case, "event"))
    b = run_scenario(build(case, "cycle"))
    assert export(a.trace) == export(b.trace)
    assert export(a) == export(b)


@settings(max_examples=60, deadline=None)
@given(random_scenario)
def test_conservation_and_pairing(case):
    r = run_scenario(build(case, "event"))
    c = r.counters
    assert c["asserts"] == c["delivered"] + c["coalesced"] + c["pending_at_end"]
    firsts = [e for e in r.trace if e.kind == "isr_first_insn"]
    assert len(firsts) == c["delivered"]
    for st_ in r.stats:
        if st_.count:
            assert st_.min <= st_.mean <= st_.max and st_.jitter == st_.max - st_.min


# -- compare, sweep, export -------------------------------------------------------

def test_compare_needs_two():
    with pytest.raises(ValidationError):
        compare([grid_cell("vclic", "bare_metal")])


def test_compare_ratio_and_baseline():
    rows = compare([grid_cell("clic", "bare_metal"), grid_cell("clic", "static_hv")])
    assert [r["ratio"] for r in rows] == [1.0, 20.0]
    rows = compare([grid_cell("clic", "bare_metal"), grid_cell("clic", "static_hv")], baseline="clic-static_hv")
    assert rows[0]["ratio"] == pytest.approx(0.05)
    with pytest.raises(ValidationError):
        compare([grid_cell("clic", "bare_metal"), grid_cell("clic", "static_hv")], baseline="nope")


def test_compare_parallel_matches_serial():
    cells = [grid_cell(ic, "static_hv") for ic in ("plic", "clic", "aia", "vclic")]
    assert compare(cells, workers=2) == compare(cells)


def test_sweep_delegated_lines():
    base = load_scenario(SCEN / "preempt-vsprio-off.toml")
    counts = [1, 8, 16, 32, 64]
    rows = sweep(base, "vms.*.delegated_irq_count", counts)
    lat = [r["mean"] for r in rows]
    assert lat == sorted(lat) and len(set(lat)) == len(lat)
    ref = run_scenario(SCEN / "preempt-vsprio-on.toml").stats[0].mean
    assert lat[0] - ref == 1250 and lat[-1] - ref == 10_000
    assert list(rows[0])[0] == "vms.*.delegated_irq_count"


def test_sweep_errors():
    base = load_scenario(SCEN / "aia-bare.toml")
    with pytest.raises(ValidationError):
        sweep(base, "bus.traffic_rate", [])
    with pytest.raises(ValidationError):
        sweep(base, "stimulus.7.period", [10])
    with pytest.raises(ValidationError):
        sweep(base, "bus.trafic_rate", [0.1])


def test_export_empty_trace():
    assert export([], "csv") == "cycle,kind,payload\n"
    assert export([], "json") == ""


def test_export_stats_rows(tmp_path):
    r = run_scenario(SCEN / "nested-tail-chain.toml")
    text = export(r, "csv", tmp_path / "s.csv")
    lines = text.splitlines()
    assert len(lines) == 1 + len(r.scenario.stimulus)
    assert (tmp_path / "s.csv").read_bytes() == text.encode()
    assert export(r, "csv") == text
    recs = [json.loads(x) for x in export(r, "json").splitlines()]
    assert [x["line"] for x in recs] == [4, 5, 6, 7, 9]


def test_export_trace_json_roundtrip():
    r = run_scenario(grid_cell("vclic", "static_hv"))
    recs = [json.loads(x) for x in export(r.trace, "json").splitlines()]
    assert [x["kind"] for x in recs] == [e.kind for e in r.trace]


def test_export_bad_format_and_path(tmp_path):
    r = run_scenario(grid_cell("vclic", "bare_metal"))
    with pytest.raises(ValidationError):
        export(r, "xml")
    with pytest.raises(OSError) as e:
        export(r, "csv", tmp_path / "missing" / "x.csv")
    assert "missing" in str(e.value)


def test_unpacks_as_pair():
    stats, trace = run_scenario(grid_cell("vclic", "bare_metal"))
    assert stats[0].line == 3 and trace[0].kind == "line_assert"


def test_ns_conversion():
    rows = compare([grid_cell("vclic", "bare_metal"), grid_cell("vclic", "bare_metal", name="b", clock_mhz=100)])
    assert rows[0]["mean_ns"] == 104 * 20 and rows[1]["mean_ns"] == 104 * 10
