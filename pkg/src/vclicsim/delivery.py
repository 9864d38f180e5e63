"""Interrupt transport: core-local wires and a contended MSI bus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CHUNK = 4096


@dataclass
class WiredFabric:
    """Dedicated wire from source to controller: constant delay, nothing shared."""

    propagation_cycles: int = 1

    def deliver_wired(self, id: int, assert_cycle: int) -> int:
        return assert_cycle + self.propagation_cycles


class MsiBus:
    """Shared interconnect carrying MSI writes behind background traffic.

    Each cycle the bus retires one queued background transaction, then a
    burst of 1..``burstiness`` new transactions arrives with probability
    ``traffic_rate``.  The queue holds at most ``capacity`` transactions;
    bursts that do not fit are back-pressured away.  An MSI issued at cycle
    ``t`` waits for every transaction queued ahead of it, one slot each,
    then takes ``base_write_cycles`` to land.

    Random draws are made for every cycle regardless of the rate, so two
    buses with the same seed and different rates see coupled arrivals:
    the higher-rate bus's queue is never shorter.
    """

    def __init__(
        self,
        base_write_cycles: int = 18,
        traffic_rate: float = 0.0,
        burstiness: int = 1,
        seed: int = 0,
        capacity: int = 1024,
    ):
        if not 0.0 <= traffic_rate <= 1.0:
            raise ValueError(f"traffic_rate must be in [0, 1], got {traffic_rate}")
        if burstiness < 1 or capacity < 1 or base_write_cycles < 0:
            raise ValueError("burstiness and capacity must be >= 1, base_write_cycles >= 0")
        self.base_write_cycles = base_write_cycles
        self.traffic_rate = traffic_rate
        self.burstiness = burstiness
        self.capacity = capacity
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._u: list = []
        self._k: list = []
        self._pos = 0
        self.queue = 0
        self.cycle = 0  # next cycle to be stepped

    def _refill(self):
        self._u = self._rng.random(_CHUNK).tolist()
        self._k = self._rng.integers(1, self.burstiness + 1, _CHUNK).tolist()
        self._pos = 0

    def bus_step(self, now: int) -> None:
        """Advance the bus through cycle ``now``, which must be the next cycle."""
        if now != self.cycle:
            raise ValueError(f"bus_step({now}) out of order; next cycle is {self.cycle}")
        if self._pos >= len(self._u):
            self._refill()
        q = self.queue - 1 if self.queue else 0
        if self._u[self._pos] < self.traffic_rate:
            q += self._k[self._pos]
            if q > self.capacity:
                q = self.capacity
        self._pos += 1
        self.queue = q
        self.cycle += 1

    def advance_to(self, now: int) -> None:
        """Step every cycle up to and including ``now``."""
        rate, cap = self.traffic_rate, self.capacity
        q = self.queue
        while self.cycle <= now:
            if self._pos >= len(self._u):
                self.queue = q
                self._refill()
            # inlined bus_step
            span = min(len(self._u) - self._pos, now - self.cycle + 1)
            u, k = self._u, self._k
            for j in range(self._pos, self._pos + span):
                if q:
                    q -= 1
                if u[j] < rate:
                    q += k[j]
                    if q > cap:
                        q = cap
            self._pos += span
            self.cycle += span
        self.queue = q

    def deliver_msi(self, id: int, assert_cycle: int) -> int:
        """Arrival cycle at the IMSIC of an MSI issued at ``assert_cycle``."""
        if assert_cycle < self.cycle - 1:
            raise ValueError(f"MSI at {assert_cycle} issued after the bus reached {self.cycle - 1}")
        self.advance_to(assert_cycle)
        return assert_cycle + self.base_write_cycles + self.queue
