"""
Interrupt latency across controllers, bare metal and under a hypervisor
========================================================================

Four interrupt controllers, each measured once on bare metal and once
inside a statically partitioned guest.
"""

from pathlib import Path

from vclicsim import compare

SCEN = Path(__file__).resolve().parent.parent / "scenarios"

# %%
# Run the grid.  Every cell fires line 3 every 5000 cycles, 100 times.
cells = [SCEN / f"{ic}-{mode}.toml" for ic in ("plic", "clic", "aia", "vclic") for mode in ("bare", "virt")]
rows = {r["name"]: r for r in compare(cells)}

print(f"{'controller':<10} {'bare':>8} {'virt':>8} {'virt/bare':>10}")
for ic in ("plic", "clic", "aia", "vclic"):
    bare, virt = rows[f"{ic}-bare"]["mean"], rows[f"{ic}-virt"]["mean"]
    print(f"{ic:<10} {bare:8.0f} {virt:8.0f} {virt / bare:10.2f}")

# %%
# Without hardware support the hypervisor traps every claim and complete, so
# PLIC and CLIC pay roughly twenty times their bare-metal latency.  AIA and
# the vCLIC deliver straight into the guest; the vCLIC keeps its wired
# advantage over the MSI write.
print(f"\nvclic/aia under virtualization: {rows['vclic-virt']['mean'] / rows['aia-virt']['mean']:.3f}")

# %%
# Latencies in nanoseconds at the 50 MHz reference clock.
for name in ("vclic-virt", "aia-virt"):
    print(f"{name}: {rows[name]['mean_ns']:.0f} ns")
