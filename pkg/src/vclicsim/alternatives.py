"""Reference models of the comparison interrupt subsystems.

* :class:`PlicModel` -- platform-level controller with MMIO claim/complete.
* :class:`ClicVanillaModel` -- the CLIC without any virtualization state.
* :class:`AiaModel` -- an A-PLIC turning wired inputs into MSIs, plus an
  IMSIC interrupt file next to the hart.

Each model exposes ``arbitrate()`` / ``claim()`` so the hart model can
drive it like the vCLIC.  PLIC and IMSIC have no interrupt levels, so
their selections are presented at the single level 255 (no nesting).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import ProtocolError, UnmappedAddress
from .regs import ClicConfig, Priv, Selection, Trigger, VClic, VmPrioTable
from .delivery import MsiBus

FLAT_LEVEL = 255


class PlicModel:
    def __init__(self, n_irqs: int = 64, target: Priv = Priv.M, vsid: Optional[int] = None):
        # source 0 does not exist on a PLIC; arrays are indexed by source id
        n = n_irqs + 1
        self.n_irqs = n_irqs
        self.priorities = np.zeros(n, dtype=np.int64)
        self.pending = np.zeros(n, dtype=bool)
        self.enabled = np.zeros(n, dtype=bool)
        self.edge = np.zeros(n, dtype=bool)
        self.line_in = np.zeros(n, dtype=bool)
        self.threshold = 0
        self.claimed: set = set()
        self.target = target
        self.vsid = vsid
        self.vmprio = VmPrioTable(bits=0)

    def configure(self, id: int, priority: int, enabled: bool = True, trigger: Trigger = Trigger.EDGE):
        if not 1 <= id <= self.n_irqs:
            raise ValueError(f"PLIC source ids are 1..{self.n_irqs}, got {id}")
        self.priorities[id] = priority
        self.enabled[id] = enabled
        self.edge[id] = trigger == Trigger.EDGE

    def set_line(self, id: int, asserted: bool, now: int = 0) -> None:
        prev = bool(self.line_in[id])
        self.line_in[id] = asserted
        # the gateway keeps latching while the source is claimed; _best skips claimed ids
        if self.edge[id]:
            if asserted and not prev:
                self.pending[id] = True
        else:
            self.pending[id] = asserted

    def _best(self) -> int:
        best, best_prio = 0, self.threshold
        for i in np.flatnonzero(self.pending & self.enabled):
            i = int(i)
            if i in self.claimed:
                continue
            if self.priorities[i] > best_prio:
                best, best_prio = i, int(self.priorities[i])
        return best

    def plic_claim(self, ctx: int = 0) -> int:
        """Claim the highest-priority pending source above threshold; 0 if none."""
        self._check_ctx(ctx)
        i = self._best()
        if i:
            self.pending[i] = False
            self.claimed.add(i)
        return i

    def plic_complete(self, ctx: int, id: int) -> None:
        self._check_ctx(ctx)
        if id not in self.claimed:
            raise ProtocolError(f"complete of source {id} which is not claimed")
        self.claimed.discard(id)
        if not self.edge[id] and self.line_in[id]:
            self.pending[id] = True

    @staticmethod
    def _check_ctx(ctx: int) -> None:
        if ctx != 0:
            raise ValueError("only a single PLIC context is modelled")

    # hart-facing adapter
    def arbitrate(self) -> Optional[Selection]:
        i = self._best()
        if not i:
            return None
        return Selection(i, self.target, 0, FLAT_LEVEL, int(self.priorities[i]), False, self.vsid)

    def claim(self, id: int, now: int = 0) -> None:
        got = self.plic_claim()
        if got != id:
            raise ProtocolError(f"hart took source {id} but the PLIC claim returned {got}")

    def complete(self, id: int, now: int = 0) -> None:
        self.plic_complete(0, id)


class ClicVanillaModel(VClic):
    """CLIC without virtualization: no ``clicintv``, no VSPRIO, no guest regions."""

    HAS_VIRT = False

    def __init__(self, cfg: ClicConfig | None = None):
        cfg = cfg or ClicConfig()
        super().__init__(ClicConfig(
            n_irqs=cfg.n_irqs, ctl_bits=cfg.ctl_bits, nlbits=cfg.nlbits,
            vsprio_bits=0, region_stride_bytes=cfg.region_stride_bytes,
        ), vsprio_enabled=False)

    def decode_address(self, addr: int):
        d = super().decode_address(addr)
        if d.region.priv == Priv.VS or d.register in ("clicintv", "vsprio"):
            raise UnmappedAddress(f"offset {addr:#x} does not exist on a vanilla CLIC")
        return d

    def _set_intv(self, i: int, value: int) -> None:
        pass

    def program_line(self, i, *, vsid=None, **kw):
        if vsid is not None:
            raise ValueError("a vanilla CLIC cannot delegate lines to guests")
        super().program_line(i, **kw)


class Imsic:
    """One interrupt file: pending/enable bits per identity, lowest identity first."""

    def __init__(self, n_ids: int = 64, target: Priv = Priv.M, vsid: Optional[int] = None,
                 propagation_cycles: int = 1):
        self.n_ids = n_ids
        self.pending = np.zeros(n_ids + 1, dtype=bool)
        self.enabled = np.zeros(n_ids + 1, dtype=bool)
        self.target = target
        self.vsid = vsid
        self.propagation_cycles = propagation_cycles

    def imsic_deliver(self, msi_arrival_cycle: int, identity: int) -> Optional[int]:
        """Latch an MSI; returns the cycle the hart is notified, or None if masked."""
        if not 1 <= identity <= self.n_ids:
            return None
        self.pending[identity] = True
        if not self.enabled[identity]:
            return None
        return msi_arrival_cycle + self.propagation_cycles

    def topei(self) -> int:
        hits = np.flatnonzero(self.pending & self.enabled)
        return int(hits[0]) if len(hits) else 0

    def claim_top(self) -> int:
        i = self.topei()
        if i:
            self.pending[i] = False
        return i


class AiaModel:
    """A-PLIC in MSI mode plus one IMSIC interrupt file."""

    def __init__(self, n_irqs: int = 64, target: Priv = Priv.M, vsid: Optional[int] = None,
                 propagation_cycles: int = 1):
        self.n_irqs = n_irqs
        self.source_enabled = np.zeros(n_irqs + 1, dtype=bool)
        self.identity = np.arange(n_irqs + 1)
        self.line_in = np.zeros(n_irqs + 1, dtype=bool)
        self.imsic = Imsic(n_irqs, target, vsid, propagation_cycles)
        self.msis: list = []  # (identity, issue_cycle, arrival_cycle)
        self.vmprio = VmPrioTable(bits=0)

    def configure(self, id: int, enabled: bool = True, identity: Optional[int] = None):
        if not 1 <= id <= self.n_irqs:
            raise ValueError(f"A-PLIC source ids are 1..{self.n_irqs}, got {id}")
        self.source_enabled[id] = enabled
        ident = id if identity is None else identity
        self.identity[id] = ident
        self.imsic.enabled[ident] = enabled

    def aplic_route(self, id: int, assert_cycle: int, bus: MsiBus) -> Optional[int]:
        """Issue the MSI for one activation of source ``id``; returns its bus arrival cycle."""
        if not self.source_enabled[id]:
            return None
        ident = int(self.identity[id])
        arrival = bus.deliver_msi(ident, assert_cycle)
        self.msis.append((ident, assert_cycle, arrival))
        return arrival

    def set_line(self, id: int, asserted: bool, now: int, bus: MsiBus) -> Optional[int]:
        """Wired input edge into the A-PLIC; rising edges become MSIs."""
        prev = bool(self.line_in[id])
        self.line_in[id] = asserted
        if asserted and not prev:
            return self.aplic_route(id, now, bus)
        return None

    def imsic_deliver(self, msi_arrival_cycle: int, identity: int) -> Optional[int]:
        return self.imsic.imsic_deliver(msi_arrival_cycle, identity)

    # hart-facing adapter
    def arbitrate(self) -> Optional[Selection]:
        i = self.imsic.topei()
        if not i:
            return None
        return Selection(i, self.imsic.target, 0, FLAT_LEVEL, 0, False, self.imsic.vsid)

    def claim(self, id: int, now: int = 0) -> None:
        got = self.imsic.claim_top()
        if got != id:
            raise ProtocolError(f"hart took identity {id} but the IMSIC top is {got}")
