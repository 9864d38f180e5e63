"""
Preempting one guest for another
================================

Two guests share one hart.  A line of the higher-priority guest fires
while the other one runs; the hypervisor has to switch before the
handler can start.
"""

from pathlib import Path

from vclicsim import sweep, run_scenario

SCEN = Path(__file__).resolve().parent.parent / "scenarios"

# %%
# Where the cycles go when per-VM priorities are not available: the
# hypervisor saves and restores the interrupt controller state of every
# delegated line on the way.
r = run_scenario(SCEN / "preempt-vsprio-off.toml")
for e in r.trace:
    if e.kind in ("line_assert", "trap_enter", "vm_switch_begin", "vm_switch_end", "isr_first_insn"):
        print(f"{e.cycle:>7} {e.kind:<16} {e.payload}")
print("latency:", r.stats[0].mean)

# %%
# Cost grows with the number of delegated lines; with VSPRIO the
# controller keeps that state itself and the switch stays flat.
counts = [1, 8, 16, 32, 64]
off = sweep(SCEN / "preempt-vsprio-off.toml", "vms.*.delegated_irq_count", counts)
on = sweep(SCEN / "preempt-vsprio-on.toml", "vms.*.delegated_irq_count", counts)
print(f"\n{'lines':>5} {'vsprio off':>11} {'vsprio on':>10}")
for n, a, b in zip(counts, off, on):
    print(f"{n:>5} {a['mean']:>11.0f} {b['mean']:>10.0f}")
