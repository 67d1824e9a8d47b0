"""Fixed-step hybrid simulation engine and invariant verification.

Step order (one grid instant): deliver due packets (and ACKs) -> evaluate
triggers in ascending agent order and submit broadcasts -> recompute every
control input -> integrate x <- x + u * tau_s, which is exact because u is
piecewise constant over the step.  All agents broadcast synchronously at
t = 0 with instant delivery, so every neighbor view is defined from the start.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .bounds import BoundsReport, DropoutSpec, TriggerParams
from .errors import AssumptionViolated
from .graph import DirectedGraph, has_spanning_tree
from .network import ChannelConfig, DeliveryRecord, LossyChannel
from .protocol import (AgentState, control_input, control_input_avg,
                       make_broadcast, on_ack, on_receive, trigger_cause)


@dataclass(frozen=True)
class Scenario:
    """Complete experiment input; same scenario + same seed -> same trace."""

    graph: DirectedGraph
    x0: np.ndarray  # (N, n)
    trigger: TriggerParams
    dropout: DropoutSpec
    channel: ChannelConfig
    mode: str  # "theorem" | "average"
    t_final: float
    tau_s: float
    seed: int
    root: int | None = None

    def __post_init__(self):
        if self.tau_s <= 0:
            raise ValueError("tau_s must be positive")
        if self.mode not in ("theorem", "average"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "x0", np.atleast_2d(np.asarray(self.x0, dtype=float)))
        if self.x0.shape[0] != self.graph.n_agents:
            raise ValueError("x0 must have one row per agent")

    def resolve_root(self) -> int:
        ok, roots = has_spanning_tree(self.graph)
        if not ok:
            raise AssumptionViolated("graph has no directed spanning tree")
        if self.root is not None:
            if self.root not in roots:
                raise AssumptionViolated(f"agent {self.root} is not a valid root")
            return self.root
        return min(roots)


@dataclass
class TraceLog:
    """Deterministic record of one run; all per-step series share the grid."""

    times: np.ndarray            # (m+1,)
    states: np.ndarray           # (m+1, N, n)
    inputs: np.ndarray           # (m, N, n)
    err_norms: np.ndarray        # (m, N)   ||e_i|| after trigger processing
    view_err_max: np.ndarray     # (m,)     max over links of ||x_ij_view - x_i||
    events: list                 # (agent, t, cause) tuples, cause in {threshold, timeout}
    deliveries: list             # DeliveryRecord per (broadcast, receiver) attempt
    max_u: float
    max_consecutive_drops: int
    root: int

    def events_for(self, agent: int) -> list[float]:
        return [t for a, t, _ in self.events if a == agent]

    def inter_event_intervals(self, n_agents: int) -> list[np.ndarray]:
        """Per-agent gaps between consecutive broadcasts, starting from t = 0."""
        return [np.diff([0.0] + self.events_for(i)) for i in range(n_agents)]

    def disagreement_series(self) -> np.ndarray:
        eta = np.delete(self.states, self.root, axis=1) - self.states[:, self.root:self.root + 1]
        return np.linalg.norm(eta.reshape(eta.shape[0], -1), axis=1)

    def spread_series(self) -> np.ndarray:
        return self.states.max(axis=(1, 2)) - self.states.min(axis=(1, 2))


def disagreement(states: np.ndarray, root: int) -> float:
    """Euclidean norm of the stacked differences x_i - x_root, i != root."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    eta = np.delete(states, root, axis=0) - states[root]
    return float(np.linalg.norm(eta.ravel()))


def _validate(s: Scenario) -> int:
    root = s.resolve_root()
    if s.mode == "average":
        if not s.graph.is_undirected():
            raise AssumptionViolated("average mode requires an undirected graph")
        if s.channel.mode != "consistent":
            raise AssumptionViolated("average mode requires the consistent channel")
    return root


def run(s: Scenario, bounds: BoundsReport | None = None, strict: bool = False) -> TraceLog:
    """Simulate the scenario on the fixed grid and record the full trace."""
    root = _validate(s)
    if bounds is not None and s.tau_s >= bounds.tau:
        warnings.warn(f"tau_s={s.tau_s} is not below the certified tau={bounds.tau}",
                      stacklevel=2)

    g = s.graph
    n_agents, n = s.x0.shape
    receivers_of = [list(np.flatnonzero(g.adjacency[:, i])) for i in range(n_agents)]
    agents = []
    for i in range(n_agents):
        beta_i, lam_i, off_i = s.trigger.agent_params(i)
        a = AgentState(id=i, x=s.x0[i], neighbors=g.neighbors(i), beta=beta_i,
                       lam=lam_i, delta_bar=s.trigger.delta_bar, clock_offset=off_i,
                       mode=s.mode)
        # synchronized initial broadcast, delivered with zero delay
        a.neighbor_views = {j: (s.x0[j].copy(), 0) for j in a.neighbors}
        agents.append(a)

    channel = LossyChannel(s.channel)
    m = int(round(s.t_final / s.tau_s))
    times = np.arange(m + 1) * s.tau_s
    states = np.empty((m + 1, n_agents, n))
    inputs = np.empty((m, n_agents, n))
    err_norms = np.empty((m, n_agents))
    view_err_max = np.empty(m)
    events: list[tuple[int, float, str]] = []
    edges = [(i, j) for j in range(n_agents) for i in receivers_of[j]]  # i receives j
    control = control_input_avg if s.mode == "average" else control_input
    max_u = 0.0

    for k in range(m):
        t = float(times[k])
        for item in channel.poll(t):
            ack = on_receive(agents[item.receiver], item.packet)
            if ack is not None:
                on_ack(agents[ack.sender], channel.ack_submit(ack))
        for a in agents:
            cause = trigger_cause(a, t)
            if cause is not None:
                p = make_broadcast(a, t)
                events.append((a.id, t, cause))
                channel.submit(p, receivers_of[a.id], t)
        ve = 0.0
        for i, j in edges:
            d = agents[i].neighbor_views[j][0] - agents[j].x
            ve = max(ve, float(np.sqrt(d @ d)))
        view_err_max[k] = ve
        for a in agents:
            e = a.local_error()
            err_norms[k, a.id] = float(np.sqrt(e @ e))
            states[k, a.id] = a.x
        if strict:
            thr = s.trigger.effective_beta * np.exp(-s.trigger.effective_lam * t)
            slack = 2.0 * max_u * s.tau_s + 1e-12
            bad = np.flatnonzero(err_norms[k] > thr + slack)
            if bad.size:
                raise RuntimeError(
                    f"strict mode: local error bound violated at t={t:.6f} "
                    f"by agents {bad.tolist()} ({err_norms[k, bad]} > {thr + slack})")
        for a in agents:
            u = control(a)
            inputs[k, a.id] = u
            max_u = max(max_u, float(np.sqrt(u @ u)))
            a.x += u * s.tau_s
    for a in agents:
        states[m, a.id] = a.x

    return TraceLog(times=times, states=states, inputs=inputs, err_norms=err_norms,
                    view_err_max=view_err_max, events=events, deliveries=channel.log,
                    max_u=max_u, max_consecutive_drops=channel.max_consecutive_drops(),
                    root=root)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    first_violation_time: float | None = None
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self, **kwargs) -> str:
        payload = {"passed": self.passed,
                   "checks": [asdict(c) for c in self.checks]}
        return json.dumps(payload, **kwargs)


def _series_check(name: str, margins: np.ndarray, times: np.ndarray,
                  note: str = "") -> CheckResult:
    worst = float(margins.min())
    if worst >= 0.0:
        return CheckResult(name, True, worst, None, note)
    first = float(times[int(np.argmax(margins < 0))])
    return CheckResult(name, False, worst, first, note)


def verify(trace: TraceLog, bounds: BoundsReport, s: Scenario) -> VerificationReport:
    """Check every analytic bound of the certificate against the recorded trace.

    Additive slack covers discrete trigger detection and delivery quantization:
    both overshoot the continuous-time quantity by at most one step of drift,
    so slack = 2 * (max observed ||u||) * tau_s.
    """
    t = trace.times[:-1]
    beta = s.trigger.effective_beta
    lam = s.trigger.effective_lam
    slack = 2.0 * trace.max_u * s.tau_s
    checks = []

    local_bound = beta * np.exp(-lam * t) + slack
    checks.append(_series_check(
        "local_error_bound", local_bound - trace.err_norms.max(axis=1), t))

    eta = trace.disagreement_series()
    bh, lh = bounds.beta_hat, bounds.lambda_hat
    envelope = (bh * bounds.eta0 * np.exp(-lh * trace.times)
                + (bh * bounds.big_gamma / (lh - lam))
                * (np.exp(-lam * trace.times) - np.exp(-lh * trace.times))
                + slack)
    checks.append(_series_check(
        "disagreement_envelope", envelope - eta, trace.times))

    intervals = np.concatenate(trace.inter_event_intervals(s.graph.n_agents))
    eps = 1e-9
    if intervals.size:
        lo = float(intervals.min()) - (s.tau_s - eps)
        hi = (s.trigger.delta_bar + s.tau_s + eps) - float(intervals.max())
        worst = min(lo, hi)
    else:
        worst = 0.0
    checks.append(CheckResult("inter_event_spacing", worst >= 0.0, worst))

    drop_margin = float(s.dropout.rho - 1 - trace.max_consecutive_drops)
    checks.append(CheckResult("mansd_cap", drop_margin >= 0.0, drop_margin))

    if s.channel.delay_max <= bounds.d_max:
        view_bound = bounds.gamma * np.exp(-lam * t) + slack
        checks.append(_series_check(
            "view_error_bound", view_bound - trace.view_err_max, t))
    else:
        checks.append(CheckResult(
            "view_error_bound", True, float("inf"),
            note=f"exempt: delay_max={s.channel.delay_max} exceeds certified "
                 f"d_max={bounds.d_max}"))

    if s.mode == "average":
        mean_drift = np.abs(trace.states.mean(axis=1) - s.x0.mean(axis=0)).max(axis=1)
        checks.append(_series_check(
            "mean_preservation", 1e-9 - mean_drift, trace.times))

    return VerificationReport(checks=tuple(checks))
