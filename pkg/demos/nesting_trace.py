"""
Nested handlers and tail-chaining in a guest
============================================

Four guest lines at different levels plus one host line, with handler
bodies long enough to overlap.
"""

from pathlib import Path

from vclicsim import export, run_scenario

SCEN = Path(__file__).resolve().parent.parent / "scenarios"

r = run_scenario(SCEN / "nested-tail-chain.toml")

# %%
# The first period of the trace.  Note the stack column: a host handler
# nests on top of two guest handlers, and line 6 enters straight from the
# end of line 5 without restoring and saving context in between.
first = [e for e in r.trace if e.cycle < 4000]
print(export(first, "csv"))

# %%
# Per-line statistics over the whole run.
print(export(r, "csv"))
print("counters:", r.counters)
