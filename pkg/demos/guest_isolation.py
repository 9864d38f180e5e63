"""
What a guest can see of the controller
======================================

The host delegates some lines to two guests.  Each guest gets its own
register window and sees only its own lines there.
"""

from vclicsim import AccessContext, AccessFault, ClicConfig, Priv, VClic
from vclicsim.regs import Region

ic = VClic(ClicConfig(n_irqs=8))
for line, vsid in ((1, 1), (2, 1), (5, 2)):
    ic.program_line(line, ctl=0xA0 + line, vsid=vsid)
ic.program_line(7, ctl=0xF0)  # stays with the host
ic.set_vsprio(1, 3)
ic.set_vsprio(2, 7)

# %%
# Read every clicintctl byte through each guest's window.
for vsid in (1, 2):
    ctx = AccessContext(Priv.VS, vsid)
    base = ic.region_base(Region(Priv.VS, vsid))
    ctls = [ic.mmio_read(base + 0x1000 + 4 * i + 3, 1, ctx) for i in range(8)]
    print(f"VM{vsid} sees ctl: {[hex(c) for c in ctls]}")

# %%
# Another guest's window, or the host's, is off limits.
try:
    ic.mmio_read(ic.region_base(Region(Priv.VS, 2)) + 0x1000, 1, AccessContext(Priv.VS, 1))
except AccessFault as exc:
    print("fault:", exc)

# %%
# Writes to foreign lines are dropped silently; the host view is unchanged.
ic.mmio_write(ic.region_base(Region(Priv.VS, 1)) + 0x1000 + 4 * 5 + 3, 1, 0x00, AccessContext(Priv.VS, 1))
print("line 5 ctl seen by the host:", hex(ic.mmio_read(ic.region_base(Region(Priv.HS)) + 0x1000 + 4 * 5 + 3, 1, AccessContext(Priv.HS))))
