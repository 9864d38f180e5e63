"""Timestamped simulation events."""

from __future__ import annotations

from dataclasses import dataclass, field

KINDS = (
    "line_assert",
    "msi_enqueue",
    "msi_arrive",
    "selection",
    "trap_enter",
    "isr_first_insn",
    "tail_chain",
    "isr_exit",
    "vm_switch_begin",
    "vm_switch_end",
    "hv_return",
    "access_fault",
)


@dataclass(frozen=True)
class TraceEvent:
    cycle: int
    kind: str
    payload: dict = field(default_factory=dict, compare=True, hash=False)

    def payload_str(self) -> str:
        return ";".join(f"{k}={self.payload[k]}" for k in sorted(self.payload))


def stack_str(frames) -> str:
    """Compact rendering of an ISR stack, bottom first: ``VS:100/HS:50``."""
    return "/".join(f"{f.priv_class.name}:{f.level}" for f in frames)
