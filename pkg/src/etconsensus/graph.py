"""Directed communication graphs, Laplacian constructions, and decay envelopes.

Conventions: adjacency entry (i, j) true means agent i receives from agent j
(edge j -> i).  All vector norms are Euclidean, all matrix norms are the
induced 2-norm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidGraph, NotARoot, NotHurwitz

EIG_TOL = 1e-9


@dataclass(frozen=True)
class DirectedGraph:
    """Validated directed graph over N >= 2 agents."""

    n_agents: int
    adjacency: np.ndarray  # (N, N) bool, zero diagonal

    @property
    def in_degrees(self) -> np.ndarray:
        """Number of in-neighbors per agent (row sums of the adjacency)."""
        return self.adjacency.sum(axis=1)

    @property
    def max_in_degree(self) -> int:
        return int(self.in_degrees.max())

    def neighbors(self, i: int) -> tuple[int, ...]:
        """In-neighbors of agent i (the agents i listens to)."""
        return tuple(int(j) for j in np.flatnonzero(self.adjacency[i]))

    def is_undirected(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))


@dataclass(frozen=True)
class LaplacianSet:
    """Laplacian variants derived for a given spanning-tree root.

    Agents are relabeled so the root comes first; `perm` maps relabeled
    index -> original index.
    """

    laplacian: np.ndarray   # (N, N), original labeling
    degree: np.ndarray      # (N, N) diagonal, original labeling
    root: int
    perm: tuple[int, ...]
    grounded: np.ndarray    # (N-1, N-1) Laplacian with root row/col removed
    a1: np.ndarray          # (N-1,) adjacency of followers to the root
    ls: np.ndarray          # (N-1, N-1) grounded + 1 alpha^T; carries the nonzero spectrum
    lprime: np.ndarray      # (N-1, N) follower rows minus the root row


@dataclass(frozen=True)
class DecayCertificate:
    """Certified exponential envelope ||exp(-m t)|| <= beta_hat * exp(-lambda_hat t)."""

    beta_hat: float
    lambda_hat: float
    max_residual: float  # largest ||exp(-m t)|| exp(lambda_hat t) / beta_hat on the grid


def build_graph(adjacency) -> DirectedGraph:
    """Validate an adjacency matrix and wrap it as a DirectedGraph.

    Accepts any array-like of 0/1 or booleans; raises InvalidGraph on a
    non-square matrix, fewer than two agents, or a self-loop.
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidGraph(f"adjacency must be square, got shape {a.shape}")
    n = a.shape[0]
    if n < 2:
        raise InvalidGraph("need at least two agents")
    a = a.astype(bool)
    if a.diagonal().any():
        raise InvalidGraph("self-loops are not allowed")
    a.setflags(write=False)
    return DirectedGraph(n_agents=n, adjacency=a)


def has_spanning_tree(g: DirectedGraph) -> tuple[bool, list[int]]:
    """Return (found, roots): all agents with directed paths to every other agent."""
    n = g.n_agents
    # adjacency[i, j] means j -> i, so column j lists the out-neighbors of j
    out = [list(np.flatnonzero(g.adjacency[:, j])) for j in range(n)]
    roots = []
    for r in range(n):
        seen = {r}
        stack = [r]
        while stack:
            u = stack.pop()
            for v in out[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) == n:
            roots.append(r)
    return bool(roots), roots


def laplacian_set(g: DirectedGraph, root: int) -> LaplacianSet:
    """Build L, D, and the root-relabeled variants L_r, L_s, L' for `root`.

    The root must be a valid spanning-tree root.  L_s = L_r + 1 alpha^T always
    carries exactly the nonzero eigenvalues of L; it coincides with L_r when
    the root has no in-neighbors.
    """
    _, roots = has_spanning_tree(g)
    if root not in roots:
        raise NotARoot(f"agent {root} does not reach all others (valid roots: {roots})")
    n = g.n_agents
    a = g.adjacency.astype(float)
    degree = np.diag(a.sum(axis=1))
    laplacian = degree - a
    perm = [root] + [i for i in range(n) if i != root]
    lp = laplacian[np.ix_(perm, perm)]
    ap = a[np.ix_(perm, perm)]
    grounded = lp[1:, 1:]
    a1 = ap[1:, 0]
    alpha = ap[0, 1:]
    ls = grounded + np.outer(np.ones(n - 1), alpha)
    lprime = lp[1:, :] - np.outer(np.ones(n - 1), lp[0, :])
    return LaplacianSet(
        laplacian=laplacian,
        degree=degree,
        root=root,
        perm=tuple(perm),
        grounded=grounded,
        a1=a1,
        ls=ls,
        lprime=lprime,
    )


def spectral_norm(m) -> float:
    """Induced 2-norm (largest singular value)."""
    return float(np.linalg.norm(np.asarray(m, dtype=float), 2))


def _envelope_grid(lambda_hat: float, points: int) -> np.ndarray:
    return np.logspace(-4, np.log10(50.0 / lambda_hat), points)


def decay_envelope(m, margin: float = 0.05, safety_factor: float = 1.1,
                   grid_points: int = 200) -> DecayCertificate:
    """Certify ||exp(-m t)|| <= beta_hat exp(-lambda_hat t) on a log-spaced grid.

    lambda_hat = (1 - margin) * min Re(eig(m)); beta_hat is the grid supremum
    of ||exp(-m t)|| exp(lambda_hat t) scaled by `safety_factor` and floored
    at 1.  The inequality is re-checked post hoc on a refined grid and the
    worst residual recorded.
    """
    m = np.asarray(m, dtype=float)
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must be in (0, 1)")
    eig = np.linalg.eigvals(m)
    min_re = float(eig.real.min())
    if min_re <= 0.0:
        raise NotHurwitz(f"eigenvalue with nonpositive real part: min Re = {min_re}")
    lambda_hat = (1.0 - margin) * min_re
    grid = _envelope_grid(lambda_hat, grid_points)
    sup = max(float(np.linalg.norm(expm(-m * t), 2)) * np.exp(lambda_hat * t) for t in grid)
    beta_hat = max(1.0, sup) * safety_factor
    # post-hoc check on a grid refined with geometric midpoints
    fine = np.sort(np.concatenate([grid, np.sqrt(grid[:-1] * grid[1:])]))
    residual = max(
        float(np.linalg.norm(expm(-m * t), 2)) * np.exp(lambda_hat * t) / beta_hat
        for t in fine
    )
    return DecayCertificate(beta_hat=beta_hat, lambda_hat=lambda_hat,
                            max_residual=residual)
