"""Per-agent event-triggered protocol state machine.

An agent broadcasts when its local error reaches the decaying threshold
beta_i exp(-lam_i (t + offset)) or when delta_bar has elapsed since its last
broadcast.  Neighbor views are updated only by fresh (higher-seq) packets.
In average mode each successful receipt is acknowledged, and the sender's
ACK-confirmed self view feeds the control law instead of its latest sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolViolation


@dataclass(frozen=True)
class Packet:
    sender: int
    seq: int
    value: np.ndarray
    sent_at: float


@dataclass(frozen=True)
class Ack:
    sender: int      # original broadcaster being acknowledged
    receiver: int    # agent that received the packet
    seq: int
    value: np.ndarray


@dataclass
class AgentState:
    """Protocol state of one agent.

    `neighbor_views[j]` is (value, seq): the latest accepted sample of
    in-neighbor j.  `self_view` is the ACK-confirmed copy of this agent's own
    broadcast that all receivers hold (average mode only, but initialized in
    both modes).
    """

    id: int
    x: np.ndarray
    neighbors: tuple[int, ...]
    beta: float
    lam: float
    delta_bar: float
    clock_offset: float = 0.0
    mode: str = "theorem"
    last_broadcast_value: np.ndarray = None
    last_broadcast_time: float = 0.0
    seq: int = 0
    neighbor_views: dict = field(default_factory=dict)
    self_view: np.ndarray = None

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        if self.last_broadcast_value is None:
            self.last_broadcast_value = self.x.copy()
        if self.self_view is None:
            self.self_view = self.x.copy()

    def local_error(self) -> np.ndarray:
        return self.last_broadcast_value - self.x

    def threshold(self, t: float) -> float:
        return self.beta * math.exp(-self.lam * (t + self.clock_offset))


def should_trigger(a: AgentState, t: float) -> bool:
    """Threshold crossing or timeout, evaluated with a >= comparison on the grid."""
    if t - a.last_broadcast_time >= a.delta_bar:
        return True
    e = a.local_error()
    return math.sqrt(float(e @ e)) >= a.threshold(t)


def trigger_cause(a: AgentState, t: float) -> str | None:
    """'threshold' or 'timeout' if an event fires at t, else None."""
    e = a.local_error()
    if math.sqrt(float(e @ e)) >= a.threshold(t):
        return "threshold"
    if t - a.last_broadcast_time >= a.delta_bar:
        return "timeout"
    return None


def make_broadcast(a: AgentState, t: float) -> Packet:
    """Sample the current state, reset the local error, and emit a packet."""
    a.last_broadcast_value = a.x.copy()
    a.last_broadcast_time = t
    a.seq += 1
    return Packet(sender=a.id, seq=a.seq, value=a.last_broadcast_value.copy(), sent_at=t)


def on_receive(a: AgentState, p: Packet) -> Ack | None:
    """Apply a delivered packet; returns an Ack in average mode, else None.

    Stale packets (seq not above the applied one) are discarded silently.
    """
    if p.sender not in a.neighbors:
        raise ProtocolViolation(f"agent {a.id} got packet from non-neighbor {p.sender}")
    stored = a.neighbor_views.get(p.sender)
    if stored is not None and p.seq <= stored[1]:
        return None
    a.neighbor_views[p.sender] = (np.array(p.value, dtype=float), p.seq)
    if a.mode == "average":
        return Ack(sender=p.sender, receiver=a.id, seq=p.seq, value=p.value)
    return None


def on_ack(a: AgentState, ack: Ack) -> None:
    """Update the ACK-confirmed self view; idempotent for duplicate ACKs."""
    if a.mode != "average":
        raise ProtocolViolation("ACKs are only valid in average mode")
    if ack.seq > a.seq:
        raise ProtocolViolation(f"ACK for unknown seq {ack.seq} (agent {a.id} at {a.seq})")
    a.self_view = np.array(ack.value, dtype=float)


def control_input(a: AgentState) -> np.ndarray:
    """Theorem-mode law: u_i = -sum_j (x_i(t_k_i) - x_ji)."""
    u = np.zeros_like(a.x)
    for j in a.neighbors:
        u -= a.last_broadcast_value - a.neighbor_views[j][0]
    return u


def control_input_avg(a: AgentState) -> np.ndarray:
    """Average-mode law: u_i = -sum_j (x_ij - x_ji) with the ACK-confirmed self view."""
    u = np.zeros_like(a.x)
    for j in a.neighbors:
        u -= a.self_view - a.neighbor_views[j][0]
    return u
