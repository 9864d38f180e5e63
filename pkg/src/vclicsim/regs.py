"""Golden model of the vCLIC register file.

The register file holds one set of physical per-line registers
(``clicintip``, ``clicintie``, ``clicintattr``, ``clicintctl``) plus the
virtualization registers ``clicintv`` and the per-VM priority table
(VSPRIO).  The same physical registers are exposed through several MMIO
regions: one for M mode, one for HS mode and one per VSID.  Which lines a
region shows depends on the region, so a guest mapped to its own region
can only see the lines delegated to it.

Memory map inside each region::

    0x1000 + 4*i + 0   clicintip[i]
    0x1000 + 4*i + 1   clicintie[i]
    0x1000 + 4*i + 2   clicintattr[i]   bit0 shv, bit1 trig, bits7:6 mode
    0x1000 + 4*i + 3   clicintctl[i]
    0x2000 + i         clicintv[i]      bit7 v, bits5:0 vsid (M/HS only)
    0x3000 + v         vsprio[v]        (M/HS only)

Region ``r`` starts at ``r * region_stride_bytes``: M is region 0, HS is
region 1 and the guest with VSID ``v`` is region ``2 + v``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import AccessFault, InvalidConfig, ProtocolError, UnmappedAddress

N_VSIDS = 64

INTCTL_BASE = 0x1000
INTV_BASE = 0x2000
VSPRIO_BASE = 0x3000

ATTR_SHV = 0x01
ATTR_TRIG = 0x02
ATTR_MODE_SHIFT = 6
MODE_S = 0b01
MODE_M = 0b11
INTV_V = 0x80
INTV_VSID = 0x3F

# packed arbitration key layout, LSB first: id(12) prio(8) level(8) vmprio(8) rank(2)
_ID_BITS = 12
_PRIO_SHIFT = 12
_LEVEL_SHIFT = 20
_VMPRIO_SHIFT = 28
_RANK_SHIFT = 36


class Priv(enum.IntEnum):
    """Privilege classes, valued by their arbitration rank."""

    VS = 0
    HS = 1
    M = 2

    # plain S is the same class as HS from the controller's point of view
    S = 1


class Trigger(enum.Enum):
    LEVEL = "level"
    EDGE = "edge"


@dataclass(frozen=True)
class ClicConfig:
    n_irqs: int = 64
    ctl_bits: int = 8
    nlbits: int = 8
    vsid_bits: int = 6
    vsprio_bits: int = 8
    region_stride_bytes: int = 0x10000

    def __post_init__(self):
        # the fixed map puts clicintv at 0x2000, so at most 1024 lines fit below it
        if not 1 <= self.n_irqs <= 1024:
            raise InvalidConfig(f"n_irqs must be in 1..1024, got {self.n_irqs}")
        if not 2 <= self.ctl_bits <= 8:
            raise InvalidConfig(f"ctl_bits must be in 2..8, got {self.ctl_bits}")
        if not 0 <= self.nlbits <= self.ctl_bits:
            raise InvalidConfig(f"nlbits must be in 0..ctl_bits, got {self.nlbits}")
        if self.vsid_bits != 6:
            raise InvalidConfig("vsid_bits is fixed at 6")
        if not 0 <= self.vsprio_bits <= 8:
            raise InvalidConfig(f"vsprio_bits must be in 0..8, got {self.vsprio_bits}")
        if self.region_stride_bytes < VSPRIO_BASE + N_VSIDS:
            raise InvalidConfig("region_stride_bytes too small for the register map")

    @property
    def impl_mask(self) -> int:
        return (0xFF << (8 - self.ctl_bits)) & 0xFF

    @property
    def aperture_bytes(self) -> int:
        return self.region_stride_bytes * (2 + N_VSIDS)


@dataclass(frozen=True)
class InterruptCell:
    """Snapshot of one line's architectural state."""

    ip: bool
    ie: bool
    attr_shv: bool
    attr_trig: Trigger
    attr_mode: Priv
    ctl: int
    virt_v: bool
    virt_vsid: int


@dataclass(frozen=True)
class AccessContext:
    priv: Priv
    vsid: int = 0


M_CTX = AccessContext(Priv.M)
HS_CTX = AccessContext(Priv.HS)


@dataclass(frozen=True)
class Region:
    priv: Priv
    vsid: Optional[int] = None

    def __str__(self):
        return self.priv.name if self.vsid is None else f"VM({self.vsid})"


class Decoded(NamedTuple):
    region: Region
    register: str
    index: int


@dataclass(frozen=True)
class Selection:
    id: int
    priv_class: Priv
    vm_prio: int
    level: int
    priority: int
    shv: bool
    vsid: Optional[int] = None

    @property
    def key(self) -> tuple:
        return (int(self.priv_class), self.vm_prio, self.level, self.priority, self.id)


@dataclass
class VmPrioTable:
    bits: int = 8
    enabled: bool = True

    def __post_init__(self):
        self.prio = np.zeros(N_VSIDS, dtype=np.int64)
        if self.bits == 0:
            self.enabled = False

    def set(self, vsid: int, value: int) -> None:
        self.prio[vsid] = value & ((1 << self.bits) - 1)

    def effective(self, vsid: int) -> int:
        return int(self.prio[vsid]) if self.enabled else 0


def decode_ctl(ctl: int, ctl_bits: int, nlbits: int) -> tuple[int, int]:
    """Split a control byte into its raw (level, priority) fields.

    The level is the top ``nlbits`` implemented bits, the priority the
    remaining ``ctl_bits - nlbits`` implemented bits.  With ``nlbits == 0``
    the level field is empty and decodes to 0; see :func:`padded_level`.
    """
    ctl &= 0xFF
    level = (ctl >> (8 - nlbits)) & ((1 << nlbits) - 1) if nlbits else 0
    pbits = ctl_bits - nlbits
    priority = (ctl >> (8 - ctl_bits)) & ((1 << pbits) - 1)
    return level, priority


def encode_ctl(level: int, priority: int, ctl_bits: int, nlbits: int) -> int:
    """Inverse of :func:`decode_ctl`; unimplemented low bits are set to 1."""
    pbits = ctl_bits - nlbits
    implemented = ((level << pbits) | priority) << (8 - ctl_bits)
    return (implemented | ((1 << (8 - ctl_bits)) - 1)) & 0xFF


def padded_level(level: int, nlbits: int) -> int:
    """Map a raw level field onto the 8-bit scale thresholds use.

    Missing low bits are filled with ones, so with ``nlbits == 0`` every
    line sits at the single implicit level 255.
    """
    fill = 8 - nlbits
    return ((level << fill) | ((1 << fill) - 1)) & 0xFF


def arbitration_keys(ip, ie, attr, ctl, intv, vmprio, vsprio_on, cfg: ClicConfig):
    """Packed arbitration key per line, -1 for lines that are not eligible.

    Works on arrays with any leading batch shape; the last axis indexes
    lines.  ``vmprio`` has shape ``(..., 64)`` and ``vsprio_on`` broadcasts
    against the batch shape.
    """
    ip = np.asarray(ip)
    n = ip.shape[-1]
    ctl = np.asarray(ctl, dtype=np.int64)
    attr = np.asarray(attr, dtype=np.int64)
    intv = np.asarray(intv, dtype=np.int64)

    is_m = (attr >> ATTR_MODE_SHIFT) == MODE_M
    virt = ((intv & INTV_V) != 0) & ~is_m
    rank = np.where(is_m, 2, np.where(virt, 0, 1))

    vsid = intv & INTV_VSID
    vmprio = np.asarray(vmprio, dtype=np.int64)
    if vmprio.ndim == 1:
        vm = vmprio[vsid]
    else:
        vm = np.take_along_axis(np.broadcast_to(vmprio, vsid.shape[:-1] + (N_VSIDS,)), vsid, axis=-1)
    vm = np.where(virt & np.asarray(vsprio_on)[..., None], vm, 0)

    eff = (ctl & cfg.impl_mask) | (~cfg.impl_mask & 0xFF)
    fill = 8 - cfg.nlbits
    level = ((eff >> fill) << fill) | ((1 << fill) - 1)
    pbits = cfg.ctl_bits - cfg.nlbits
    prio = (eff >> (8 - cfg.ctl_bits)) & ((1 << pbits) - 1)

    ids = np.arange(n, dtype=np.int64)
    key = (
        (rank << _RANK_SHIFT)
        | (vm << _VMPRIO_SHIFT)
        | ((level & 0xFF) << _LEVEL_SHIFT)
        | (prio << _PRIO_SHIFT)
        | ids
    )
    active = (ip != 0) & (np.asarray(ie) != 0)
    return np.where(active, key, -1)


def arbitrate_arrays(ip, ie, attr, ctl, intv, vmprio, vsprio_on, cfg: ClicConfig):
    """Winning line index per batch element (-1 when nothing is pending)."""
    key = arbitration_keys(ip, ie, attr, ctl, intv, vmprio, vsprio_on, cfg)
    best = key.max(axis=-1)
    return np.where(best < 0, -1, best & ((1 << _ID_BITS) - 1))


class VClic:
    """Register file, line inputs and arbitration of one vCLIC instance."""

    HAS_VIRT = True

    def __init__(self, cfg: ClicConfig | None = None, vsprio_enabled: bool = True):
        self.cfg = cfg or ClicConfig()
        n = self.cfg.n_irqs
        self.ip = np.zeros(n, dtype=np.uint8)
        self.ie = np.zeros(n, dtype=np.uint8)
        # lines reset to S mode, level triggered, all implemented ctl bits clear
        self.attr = np.full(n, MODE_S << ATTR_MODE_SHIFT, dtype=np.uint8)
        self.ctl = np.full(n, ~self.cfg.impl_mask & 0xFF, dtype=np.uint8)
        self.intv = np.zeros(n, dtype=np.uint8)
        self.line_in = np.zeros(n, dtype=bool)
        self.vmprio = VmPrioTable(self.cfg.vsprio_bits, vsprio_enabled)
        self.assert_cycle = np.full(n, -1, dtype=np.int64)
        self.claim_cycle = np.full(n, -1, dtype=np.int64)
        self._cached: Optional[Selection] = None
        self._dirty = True

    # -- views -----------------------------------------------------------

    def cell(self, i: int) -> InterruptCell:
        attr = int(self.attr[i])
        return InterruptCell(
            ip=bool(self.ip[i]),
            ie=bool(self.ie[i]),
            attr_shv=bool(attr & ATTR_SHV),
            attr_trig=Trigger.EDGE if attr & ATTR_TRIG else Trigger.LEVEL,
            attr_mode=Priv.M if attr >> ATTR_MODE_SHIFT == MODE_M else Priv.HS,
            ctl=int(self.ctl[i]),
            virt_v=bool(self.intv[i] & INTV_V),
            virt_vsid=int(self.intv[i] & INTV_VSID),
        )

    def is_edge(self, i: int) -> bool:
        return bool(self.attr[i] & ATTR_TRIG)

    def decode_ctl(self, ctl: int) -> tuple[int, int]:
        return decode_ctl(ctl, self.cfg.ctl_bits, self.cfg.nlbits)

    def _touch(self):
        self._dirty = True

    # -- address decode and MMIO -----------------------------------------

    def decode_address(self, addr: int) -> Decoded:
        cfg = self.cfg
        if not 0 <= addr < cfg.aperture_bytes:
            raise UnmappedAddress(f"offset {addr:#x} outside the aperture")
        ridx, off = divmod(addr, cfg.region_stride_bytes)
        if ridx == 0:
            region = Region(Priv.M)
        elif ridx == 1:
            region = Region(Priv.HS)
        else:
            region = Region(Priv.VS, ridx - 2)

        if INTCTL_BASE <= off < INTCTL_BASE + 4 * cfg.n_irqs:
            idx, sub = divmod(off - INTCTL_BASE, 4)
            return Decoded(region, ("clicintip", "clicintie", "clicintattr", "clicintctl")[sub], idx)
        if INTV_BASE <= off < INTV_BASE + cfg.n_irqs:
            return Decoded(region, "clicintv", off - INTV_BASE)
        if VSPRIO_BASE <= off < VSPRIO_BASE + N_VSIDS:
            return Decoded(region, "vsprio", off - VSPRIO_BASE)
        raise UnmappedAddress(f"offset {addr:#x} ({region} +{off:#x}) is not mapped")

    @staticmethod
    def _check_region(region: Region, ctx: AccessContext) -> None:
        if ctx.priv == Priv.M:
            return
        if region.priv == Priv.M:
            raise AccessFault(f"{ctx.priv.name} access to M region")
        if region.priv == Priv.HS and ctx.priv != Priv.HS:
            raise AccessFault(f"{ctx.priv.name} access to HS region")
        if region.priv == Priv.VS and ctx.priv == Priv.VS and ctx.vsid != region.vsid:
            raise AccessFault(f"VS({ctx.vsid}) access to {region}")

    def _line_visible(self, region: Region, i: int) -> bool:
        if region.priv == Priv.M:
            return True
        if region.priv == Priv.HS:
            return (self.attr[i] >> ATTR_MODE_SHIFT) != MODE_M
        return bool(self.intv[i] & INTV_V) and (self.intv[i] & INTV_VSID) == region.vsid

    def _byte_addrs(self, addr: int, width: int) -> range:
        if width == 1:
            return range(addr, addr + 1)
        if width == 4:
            if addr % 4:
                raise ValueError(f"misaligned 4-byte access at {addr:#x}")
            return range(addr, addr + 4)
        raise ValueError(f"unsupported access width {width}")

    def mmio_read(self, addr: int, width: int, ctx: AccessContext) -> int:
        decoded = [self.decode_address(a) for a in self._byte_addrs(addr, width)]
        self._check_region(decoded[0].region, ctx)
        value = 0
        for k, d in enumerate(decoded):
            value |= self._read_byte(d) << (8 * k)
        return value

    def mmio_write(self, addr: int, width: int, value: int, ctx: AccessContext) -> None:
        decoded = [self.decode_address(a) for a in self._byte_addrs(addr, width)]
        self._check_region(decoded[0].region, ctx)
        for k, d in enumerate(decoded):
            self._write_byte(d, (value >> (8 * k)) & 0xFF)

    def _read_byte(self, d: Decoded) -> int:
        region, reg, i = d
        if reg in ("clicintv", "vsprio"):
            if region.priv == Priv.VS:
                return 0
            if reg == "vsprio":
                return int(self.vmprio.prio[i]) if self.cfg.vsprio_bits else 0
            return int(self.intv[i]) if self._line_visible(region, i) else 0
        if not self._line_visible(region, i):
            return 0
        if reg == "clicintip":
            return int(self.ip[i])
        if reg == "clicintie":
            return int(self.ie[i])
        if reg == "clicintattr":
            return int(self.attr[i])
        return int(self.ctl[i])

    def _write_byte(self, d: Decoded, value: int) -> None:
        region, reg, i = d
        privileged = region.priv != Priv.VS
        if reg == "vsprio":
            if privileged and self.cfg.vsprio_bits:
                self.vmprio.set(i, value)
                self._touch()
            return
        if not self._line_visible(region, i):
            return
        if reg == "clicintv":
            if privileged:
                self._set_intv(i, value)
        elif reg == "clicintip":
            # level lines follow the pin; edge latches are a privileged test hook
            if privileged and self.is_edge(i):
                self.ip[i] = value & 1
        elif reg == "clicintie":
            self.ie[i] = value & 1
        elif reg == "clicintattr":
            self._set_attr(i, value, region)
        else:
            self.ctl[i] = (value | ~self.cfg.impl_mask) & 0xFF
        self._touch()

    def _set_intv(self, i: int, value: int) -> None:
        if (self.attr[i] >> ATTR_MODE_SHIFT) == MODE_M:
            value &= ~INTV_V
        self.intv[i] = value & (INTV_V | INTV_VSID)

    def _set_attr(self, i: int, value: int, region: Region) -> None:
        old_mode = int(self.attr[i]) >> ATTR_MODE_SHIFT
        if region.priv == Priv.M:
            mode = MODE_M if (value >> ATTR_MODE_SHIFT) == MODE_M else MODE_S
        else:
            mode = old_mode
        self.attr[i] = (mode << ATTR_MODE_SHIFT) | (value & (ATTR_SHV | ATTR_TRIG))
        if mode == MODE_M:
            self.intv[i] &= ~INTV_V & 0xFF
        if not self.is_edge(i):
            self.ip[i] = int(self.line_in[i])

    # -- pins, arbitration, handshake --------------------------------------

    def set_line(self, i: int, asserted: bool, now: int) -> None:
        prev = bool(self.line_in[i])
        self.line_in[i] = asserted
        if asserted and not prev:
            self.assert_cycle[i] = now
        if self.is_edge(i):
            if asserted and not prev:
                self.ip[i] = 1
        else:
            self.ip[i] = int(asserted)
        self._touch()

    def arbitrate(self) -> Optional[Selection]:
        if not self._dirty:
            return self._cached
        winner = int(arbitrate_arrays(
            self.ip, self.ie, self.attr, self.ctl, self.intv,
            self.vmprio.prio, self.vmprio.enabled, self.cfg,
        ))
        self._cached = None if winner < 0 else self.selection_for(winner)
        self._dirty = False
        return self._cached

    def selection_for(self, i: int) -> Selection:
        c = self.cell(i)
        level, prio = self.decode_ctl(c.ctl)
        if c.attr_mode == Priv.M:
            cls = Priv.M
        elif c.virt_v:
            cls = Priv.VS
        else:
            cls = Priv.HS
        vs = cls == Priv.VS
        return Selection(
            id=i,
            priv_class=cls,
            vm_prio=self.vmprio.effective(c.virt_vsid) if vs else 0,
            level=padded_level(level, self.cfg.nlbits),
            priority=prio,
            shv=c.attr_shv,
            vsid=c.virt_vsid if vs else None,
        )

    def claim(self, i: int, now: int) -> None:
        current = self.arbitrate()
        if current is None or current.id != i:
            raise ProtocolError(f"claim of line {i} but current selection is {current}")
        if self.is_edge(i):
            self.ip[i] = 0
        self.claim_cycle[i] = now
        self._touch()

    # -- convenience -------------------------------------------------------

    def program_line(
        self,
        i: int,
        *,
        ctx: AccessContext = M_CTX,
        ie: bool = True,
        ctl: int = 0xFF,
        shv: bool = False,
        trigger: Trigger = Trigger.EDGE,
        mode: Priv = Priv.HS,
        vsid: Optional[int] = None,
    ) -> None:
        """Configure a line through MMIO writes issued from ``ctx``'s region."""
        if ctx.priv == Priv.VS:
            raise InvalidConfig("lines are configured from the M or HS region")
        base = self.region_base(Region(ctx.priv))
        mode_bits = MODE_M if mode == Priv.M else MODE_S
        attr = (mode_bits << ATTR_MODE_SHIFT) | (ATTR_SHV if shv else 0)
        attr |= ATTR_TRIG if trigger == Trigger.EDGE else 0
        self.mmio_write(base + INTCTL_BASE + 4 * i + 2, 1, attr, ctx)
        self.mmio_write(base + INTCTL_BASE + 4 * i + 3, 1, ctl, ctx)
        if self.HAS_VIRT:
            intv = 0 if vsid is None else INTV_V | vsid
            self.mmio_write(base + INTV_BASE + i, 1, intv, ctx)
        self.mmio_write(base + INTCTL_BASE + 4 * i + 1, 1, int(ie), ctx)

    def set_vsprio(self, vsid: int, value: int, ctx: AccessContext = M_CTX) -> None:
        self.mmio_write(self.region_base(Region(ctx.priv)) + VSPRIO_BASE + vsid, 1, value, ctx)

    def region_base(self, region: Region) -> int:
        if region.priv == Priv.M:
            return 0
        if region.priv == Priv.HS:
            return self.cfg.region_stride_bytes
        return self.cfg.region_stride_bytes * (2 + region.vsid)
