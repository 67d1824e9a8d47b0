"""Closed-form certificates: dropout gain, view-error gain, inter-event and delay bounds.

Dependency order inside certify: decay envelope -> gamma_l (with tau assumed 0,
the conservative substitution) -> gamma -> Gamma -> (H1, H2) -> tau, d.  The
average-consensus variants (K1, K2, tau_avg, d_avg) reuse the same log-formula.
Negative H1/K1 are clamped to zero inside the bound denominators; this keeps
the logarithm argument positive and still upper-bounds the error growth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import TYPE_CHECKING

import numpy as np

from .errors import AssumptionViolated, DegenerateBound, InvalidSpectralGap
from .graph import DirectedGraph, decay_envelope, has_spanning_tree, laplacian_set, spectral_norm

if TYPE_CHECKING:
    from .engine import Scenario


@dataclass(frozen=True)
class TriggerParams:
    """Event-threshold parameters: ||e_i(t)|| >= beta exp(-lam t) or timeout delta_bar."""

    beta: float
    lam: float
    delta_bar: float
    gamma_d: float
    per_agent: tuple[tuple[float, float], ...] | None = None  # (beta_i, lam_i)
    clock_offsets: tuple[float, ...] | None = None

    def __post_init__(self):
        if min(self.beta, self.lam, self.delta_bar, self.gamma_d) <= 0:
            raise ValueError("beta, lam, delta_bar, gamma_d must all be positive")
        if self.clock_offsets is not None and min(self.clock_offsets) < 0:
            raise ValueError("clock offsets must be nonnegative")

    @property
    def effective_beta(self) -> float:
        """Worst-case threshold scale: max over per-agent values."""
        if self.per_agent:
            return max(b for b, _ in self.per_agent)
        return self.beta

    @property
    def effective_lam(self) -> float:
        """Worst-case threshold rate: min over per-agent values."""
        if self.per_agent:
            return min(l for _, l in self.per_agent)
        return self.lam

    def agent_params(self, i: int) -> tuple[float, float, float]:
        """(beta_i, lam_i, clock_offset_i) for agent i."""
        beta, lam = (self.per_agent[i] if self.per_agent else (self.beta, self.lam))
        off = self.clock_offsets[i] if self.clock_offsets else 0.0
        return beta, lam, off


@dataclass(frozen=True)
class DropoutSpec:
    """MANSD model: at most rho - 1 consecutive drops per link."""

    rho: int
    drop_prob: float = 0.0

    def __post_init__(self):
        if self.rho < 2:
            raise ValueError("rho must be an integer >= 2")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must be in [0, 1]")


@dataclass(frozen=True)
class BoundsReport:
    """Every certified quantity, serializable as a flat JSON object."""

    beta_hat: float
    lambda_hat: float
    gamma_l: float
    gamma: float
    big_gamma: float
    h1: float
    h2: float
    tau: float
    d_max: float
    k1: float
    k2: float
    tau_avg: float
    d_avg: float
    eta0: float
    l_norm: float

    def to_json(self, **kwargs) -> str:
        return json.dumps(asdict(self), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "BoundsReport":
        return cls(**json.loads(text))


def gamma_loss(beta: float, lam: float, rho: int, delta_bar: float,
               tau_assumed: float = 0.0) -> float:
    """Dropout amplification: beta e^{rho lam delta_bar} sum_{mu=1..rho} e^{-mu lam tau}."""
    if tau_assumed < 0:
        raise ValueError("tau_assumed must be nonnegative")
    total = sum(math.exp(-mu * lam * tau_assumed) for mu in range(1, rho + 1))
    return beta * math.exp(rho * lam * delta_bar) * total


def xi_gain(g: DirectedGraph, beta: float, gamma: float) -> float:
    """Perturbation gain Gamma = Nbar sqrt(N) beta + gamma (sum_i N_i^2)^{1/2}."""
    deg = g.in_degrees.astype(float)
    return float(deg.max() * math.sqrt(g.n_agents) * beta
                 + gamma * math.sqrt(float((deg ** 2).sum())))


def h_coefficients(l_norm: float, beta_hat: float, lambda_hat: float, lam: float,
                   eta0: float, big_gamma: float, n_i: float, beta: float,
                   gamma: float) -> tuple[float, float]:
    """Error-growth coefficients H1, H2 for the directed (theorem-mode) bound."""
    if lambda_hat <= lam:
        raise InvalidSpectralGap(f"need lam < lambda_hat, got {lam} >= {lambda_hat}")
    ratio = big_gamma / (lambda_hat - lam)
    h1 = l_norm * beta_hat * (eta0 - ratio)
    h2 = n_i * (beta + gamma) + l_norm * beta_hat * ratio
    return h1, h2


def k_coefficients(l_norm: float, beta_hat: float, lambda_hat: float, lam: float,
                   eta0: float, gamma: float, n: int, n_i: float,
                   lprime_norm: float) -> tuple[float, float]:
    """Error-growth coefficients K1, K2 for the average-consensus bound."""
    if lambda_hat <= lam:
        raise InvalidSpectralGap(f"need lam < lambda_hat, got {lam} >= {lambda_hat}")
    ratio = gamma * math.sqrt(n) * lprime_norm / (lambda_hat - lam)
    k1 = l_norm * beta_hat * (eta0 - ratio)
    k2 = 2.0 * n_i * gamma + l_norm * beta_hat * ratio
    return k1, k2


def _log_bound(h1: float, h2: float, numerator: float, lam: float,
               lambda_hat: float, t_ref: float) -> float:
    """Evaluate (1/lambda_hat) ln(1 + num / (H2/lam + (H1+/lambda_hat) e^{(lam-lambda_hat) t}))."""
    h1 = max(h1, 0.0)
    den = h2 / lam + (h1 / lambda_hat) * math.exp((lam - lambda_hat) * t_ref)
    if den <= 0.0:
        raise DegenerateBound(f"nonpositive bound denominator {den}")
    return math.log1p(numerator / den) / lambda_hat


def min_inter_event_time(h1: float, h2: float, beta: float, lam: float,
                         lambda_hat: float, t_k: float = 0.0) -> float:
    """Certified lower bound on inter-event times: min of tau(t_k) and tau(inf)."""
    at_tk = _log_bound(h1, h2, beta, lam, lambda_hat, t_k)
    stationary = math.log1p(beta * lam / h2) / lambda_hat if h2 > 0 else at_tk
    return min(at_tk, stationary)


def max_admissible_delay(h1: float, h2: float, gamma_d: float, lam: float,
                         lambda_hat: float, t_ref: float = 0.0) -> float:
    """Certified upper bound on tolerable delivery delay: min of d(t_ref) and d(inf)."""
    at_ref = _log_bound(h1, h2, gamma_d, lam, lambda_hat, t_ref)
    stationary = math.log1p(gamma_d * lam / h2) / lambda_hat if h2 > 0 else at_ref
    return min(at_ref, stationary)


def event_inequality_margin(h1: float, h2: float, rhs_scale: float, lam: float,
                            lambda_hat: float, tau: float,
                            t_grid: np.ndarray) -> float:
    """Worst margin of the growth-vs-threshold inequality over a grid of event times.

    Checks (H1+/lh)(1-e^{-lh tau}) e^{(lam-lh) t_k} + (H2/lam)(1-e^{-lam tau})
    <= rhs_scale e^{-lam tau};  returns min(rhs - lhs), nonnegative iff the
    inequality holds everywhere.
    """
    h1 = max(h1, 0.0)
    lhs = (h1 / lambda_hat) * (1.0 - math.exp(-lambda_hat * tau)) \
        * np.exp((lam - lambda_hat) * t_grid) \
        + (h2 / lam) * (1.0 - math.exp(-lam * tau))
    rhs = rhs_scale * math.exp(-lam * tau)
    return float((rhs - lhs).min())


def certify(scenario: "Scenario", margin: float = 0.05,
            grid_points: int = 1000) -> BoundsReport:
    """Evaluate the full bound chain for a scenario and grid-verify tau and d.

    Theorem mode requires a spanning tree; average mode additionally requires
    an undirected connected graph.  Raises AssumptionViolated when a structural
    hypothesis fails, including lam >= lambda_hat.
    """
    g = scenario.graph
    ok, roots = has_spanning_tree(g)
    if not ok:
        raise AssumptionViolated("graph has no directed spanning tree")
    if scenario.mode == "average" and not g.is_undirected():
        raise AssumptionViolated("average mode requires an undirected graph")
    root = scenario.root if scenario.root is not None else min(roots)
    lap = laplacian_set(g, root)

    cert = decay_envelope(lap.ls, margin=margin)
    beta = scenario.trigger.effective_beta
    lam = scenario.trigger.effective_lam
    if lam >= cert.lambda_hat:
        raise AssumptionViolated(
            f"threshold rate {lam} must be below certified rate {cert.lambda_hat}")

    x0 = np.asarray(scenario.x0, dtype=float)
    eta = x0[list(lap.perm[1:])] - x0[root]
    eta0 = float(np.linalg.norm(eta.ravel()))
    l_norm = spectral_norm(lap.ls)
    nbar = float(g.max_in_degree)

    gl = gamma_loss(beta, lam, scenario.dropout.rho, scenario.trigger.delta_bar)
    gamma = gl + scenario.trigger.gamma_d
    big_gamma = xi_gain(g, beta, gamma)
    h1, h2 = h_coefficients(l_norm, cert.beta_hat, cert.lambda_hat, lam,
                            eta0, big_gamma, nbar, beta, gamma)
    tau = min_inter_event_time(h1, h2, beta, lam, cert.lambda_hat)
    d_max = max_admissible_delay(h1, h2, scenario.trigger.gamma_d, lam, cert.lambda_hat)

    lprime_norm = spectral_norm(lap.lprime)
    k1, k2 = k_coefficients(l_norm, cert.beta_hat, cert.lambda_hat, lam,
                            eta0, gamma, g.n_agents, nbar, lprime_norm)
    tau_avg = min_inter_event_time(k1, k2, beta, lam, cert.lambda_hat)
    d_avg = max_admissible_delay(k1, k2, scenario.trigger.gamma_d, lam, cert.lambda_hat)

    t_grid = np.linspace(0.0, 50.0 / lam, grid_points)
    if scenario.mode == "average":
        ch1, ch2, ctau, cd = k1, k2, tau_avg, d_avg
    else:
        ch1, ch2, ctau, cd = h1, h2, tau, d_max
    if event_inequality_margin(ch1, ch2, beta, lam, cert.lambda_hat, ctau, t_grid) < 0:
        raise DegenerateBound("certified tau violates the inter-event inequality")
    if event_inequality_margin(ch1, ch2, scenario.trigger.gamma_d, lam,
                               cert.lambda_hat, cd, t_grid) < 0:
        raise DegenerateBound("certified d violates the delay-error inequality")

    return BoundsReport(
        beta_hat=cert.beta_hat, lambda_hat=cert.lambda_hat,
        gamma_l=gl, gamma=gamma, big_gamma=big_gamma,
        h1=h1, h2=h2, tau=tau, d_max=d_max,
        k1=k1, k2=k2, tau_avg=tau_avg, d_avg=d_avg,
        eta0=eta0, l_norm=l_norm,
    )
