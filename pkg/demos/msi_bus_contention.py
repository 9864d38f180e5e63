"""
MSI delivery on a busy bus
==========================

AIA delivers interrupts as memory writes, so they queue behind other bus
traffic.  The vCLIC is wired and does not notice.
"""

from pathlib import Path

from vclicsim import run_scenario, sweep

SCEN = Path(__file__).resolve().parent.parent / "scenarios"
rates = [0.0, 0.2, 0.4, 0.45, 0.5, 0.525, 0.6]

aia = sweep(SCEN / "aia-saturated.toml", "bus.traffic_rate", rates)
vclic = sweep(SCEN / "vclic-busy-bus.toml", "bus.traffic_rate", rates)

print(f"{'rate':>6} {'aia mean':>9} {'aia jitter':>11} {'vclic mean':>11}")
for r, a, v in zip(rates, aia, vclic):
    print(f"{r:>6} {a['mean']:>9.1f} {a['jitter']:>11.0f} {v['mean']:>11.1f}")

# %%
# Past one transaction per cycle the queue fills up.  Close to that point
# it rides near its capacity, which is where latency is both high and
# noisy.
sat = run_scenario(SCEN / "aia-saturated.toml").stats[0]
print(f"\nnear saturation: mean {sat.mean:.1f} ({sat.mean / aia[0]['mean']:.2f}x idle), jitter {sat.jitter}")

# %%
# A different seed gives a different but equally reproducible run.
for seed in (1, 2):
    st = run_scenario({**run_scenario(SCEN / "aia-saturated.toml").scenario.raw, "seed": seed}).stats[0]
    print(f"seed {seed}: mean {st.mean:.1f}, jitter {st.jitter}")
