"""Simulated lossy broadcast channel with MANSD-capped drops and bounded delays.

Per receiver, each broadcast is dropped with probability `drop_prob`, except
that a link which has already dropped rho - 1 packets in a row delivers the
next one (forced delivery).  Delivered packets pick up a uniform delay in
[delay_min, delay_max], clamped so arrivals on every link stay in FIFO order.
In consistent mode a single (drop, delay) draw is shared by all receivers of
a broadcast.  ACKs bypass the channel entirely: same-instant, never dropped.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import ClockViolation, ProtocolViolation
from .protocol import Ack, Packet


@dataclass(frozen=True)
class ChannelConfig:
    delay_min: float
    delay_max: float
    drop_prob: float
    rho: int
    seed: int
    mode: str = "non-consistent"  # or "consistent"

    def __post_init__(self):
        if not 0.0 <= self.delay_min <= self.delay_max:
            raise ValueError("need 0 <= delay_min <= delay_max")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must be in [0, 1]")
        if self.rho < 2:
            raise ValueError("rho must be >= 2")
        if self.mode not in ("non-consistent", "consistent"):
            raise ValueError(f"unknown channel mode {self.mode!r}")


@dataclass
class LinkState:
    sender: int
    receiver: int
    consecutive_drops: int = 0
    last_arrival: float = 0.0
    max_drop_run: int = 0
    sent: int = 0
    dropped: int = 0
    delivered: int = 0


@dataclass(frozen=True)
class InTransit:
    packet: Packet
    receiver: int
    arrival_time: float


@dataclass(frozen=True)
class DeliveryRecord:
    """One (broadcast, receiver) attempt, for the deliveries.csv export."""

    sender: int
    receiver: int
    sent_at: float
    arrived_at: float | None  # None when dropped


class LossyChannel:
    """Owns the in-flight heap, per-link drop counters, and the RNG stream."""

    def __init__(self, config: ChannelConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.links: dict[tuple[int, int], LinkState] = {}
        self._heap: list[tuple[float, int, int, int, InTransit]] = []
        self._counter = 0
        self._last_poll = -np.inf
        self.log: list[DeliveryRecord] = []
        self.ack_count = 0

    def _link(self, sender: int, receiver: int) -> LinkState:
        key = (sender, receiver)
        link = self.links.get(key)
        if link is None:
            link = self.links[key] = LinkState(sender, receiver)
        return link

    def _draw(self) -> tuple[bool, float]:
        cfg = self.config
        drop = bool(self.rng.random() < cfg.drop_prob)
        delay = float(self.rng.uniform(cfg.delay_min, cfg.delay_max))
        return drop, delay

    def submit(self, p: Packet, receivers: list[int], t: float) -> list[InTransit]:
        """Run the drop/delay process for one broadcast; schedule deliveries."""
        cfg = self.config
        if cfg.mode == "consistent":
            shared = self._draw()
        scheduled = []
        for r in receivers:
            link = self._link(p.sender, r)
            link.sent += 1
            want_drop, delay = shared if cfg.mode == "consistent" else self._draw()
            forced = link.consecutive_drops >= cfg.rho - 1
            if want_drop and not forced:
                link.consecutive_drops += 1
                link.max_drop_run = max(link.max_drop_run, link.consecutive_drops)
                link.dropped += 1
                self.log.append(DeliveryRecord(p.sender, r, t, None))
                continue
            link.consecutive_drops = 0
            link.delivered += 1
            arrival = max(t + delay, link.last_arrival)  # FIFO clamp
            link.last_arrival = arrival
            item = InTransit(packet=p, receiver=r, arrival_time=arrival)
            heapq.heappush(self._heap, (arrival, p.sender, r, self._counter, item))
            self._counter += 1
            scheduled.append(item)
            self.log.append(DeliveryRecord(p.sender, r, t, arrival))
        return scheduled

    def poll(self, t: float) -> list[InTransit]:
        """Pop all deliveries due by t, ordered by (arrival, sender, receiver)."""
        if t < self._last_poll:
            raise ClockViolation(f"poll time went backwards: {t} < {self._last_poll}")
        self._last_poll = t
        due = []
        while self._heap and self._heap[0][0] <= t:
            due.append(heapq.heappop(self._heap)[4])
        return due

    def ack_submit(self, ack: Ack) -> Ack:
        """ACKs are instantaneous and lossless; only legal in average mode."""
        if self.config.mode != "consistent":
            raise ProtocolViolation("ACKs require the consistent channel mode")
        self.ack_count += 1
        return ack

    def max_consecutive_drops(self) -> int:
        return max((l.max_drop_run for l in self.links.values()), default=0)
