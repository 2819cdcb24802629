"""Directed communication topology and the graph matrices derived from it.

Followers are indexed 0..N-1, leaders 0..M-1 (disjoint from followers by
construction; configs may use global ids, the loader maps them down).
Camouflage attackers live outside both index sets: they inject impostor
output signals into followers' measurements but never enter the Psi_k
matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.linalg import LinAlgError


class TopologyError(ValueError):
    """Structural problem with a topology or its derived matrices."""


@dataclass(frozen=True)
class Topology:
    """Weighted digraph of N followers, M leaders and camouflage edges.

    follower_adjacency[i, j] is the weight of the edge from follower j to
    follower i (zero diagonal).  pinning[i, k] is the weight of the edge
    from leader k to follower i.  camouflage_edges is a list of
    (follower, attacker_id, weight) triples.
    """

    n_followers: int
    m_leaders: int
    follower_adjacency: np.ndarray
    pinning: np.ndarray
    camouflage_edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        A = np.asarray(self.follower_adjacency, dtype=float)
        G = np.asarray(self.pinning, dtype=float)
        if A.shape != (self.n_followers, self.n_followers):
            raise TopologyError(
                f"adjacency shape {A.shape} != ({self.n_followers}, {self.n_followers})")
        if G.shape != (self.n_followers, self.m_leaders):
            raise TopologyError(
                f"pinning shape {G.shape} != ({self.n_followers}, {self.m_leaders})")
        if np.any(A < 0) or np.any(G < 0):
            raise TopologyError("edge weights must be nonnegative")
        if np.any(np.diag(A) != 0):
            raise TopologyError("self loops (nonzero adjacency diagonal) not allowed")
        for fol, _att, w in self.camouflage_edges:
            if not (0 <= fol < self.n_followers):
                raise TopologyError(f"camouflage target {fol} out of range")
            if w < 0:
                raise TopologyError("camouflage weight must be nonnegative")
        object.__setattr__(self, "follower_adjacency", A)
        object.__setattr__(self, "pinning", G)
        object.__setattr__(self, "camouflage_edges", tuple(self.camouflage_edges))


@dataclass(frozen=True)
class GraphMatrices:
    """Matrices derived from a topology: L_f, the per-leader Psi_k, their sum,
    the positive diagonal scaling Theta and the symmetric form Omega."""

    laplacian: np.ndarray
    psi_per_leader: tuple
    psi_bar: np.ndarray
    theta: np.ndarray
    omega: np.ndarray


def check_leader_reachability(topology: Topology) -> bool:
    """True iff every follower is reachable from some leader through the
    union of pinning and follower-to-follower edges."""
    N = topology.n_followers
    reached = topology.pinning.sum(axis=1) > 0
    frontier = list(np.flatnonzero(reached))
    A = topology.follower_adjacency
    while frontier:
        j = frontier.pop()
        for i in np.flatnonzero(A[:, j] > 0):
            if not reached[i]:
                reached[i] = True
                frontier.append(i)
    return bool(reached.all())


def build_graph_matrices(topology: Topology) -> GraphMatrices:
    """Assemble L_f, Psi_k = (1/M) L_f + diag(g_.k), their sum, Theta and Omega.

    Theta = diag(v) with Psi_bar' v = 1.  With that choice Omega is a symmetric
    Z-matrix whose row sums equal 1 + Theta Psi_bar 1 >= 1, so it is strictly
    diagonally dominant and positive definite whenever Psi_bar is a nonsingular
    M-matrix (every follower leader-reachable).

    Raises TopologyError when the sum of the Psi_k is singular (no leader can
    reach some follower) or when Theta has a nonpositive entry.
    """
    A = topology.follower_adjacency
    M = topology.m_leaders
    N = topology.n_followers
    laplacian = np.diag(A.sum(axis=1)) - A
    psis = tuple(laplacian / M + np.diag(topology.pinning[:, k]) for k in range(M))
    psi_bar = np.zeros((N, N))
    for psi in psis:
        psi_bar = psi_bar + psi
    try:
        v = np.linalg.solve(psi_bar.T, np.ones(N))
    except LinAlgError as exc:
        raise TopologyError("sum of Psi_k is singular; is every follower "
                            "reachable from a leader?") from exc
    if np.any(v <= 0):
        raise TopologyError(f"Theta has a nonpositive entry: {v}")
    theta = np.diag(v)
    omega = theta @ psi_bar + psi_bar.T @ theta
    omega = 0.5 * (omega + omega.T)  # kill rounding asymmetry
    return GraphMatrices(laplacian=laplacian, psi_per_leader=psis,
                         psi_bar=psi_bar, theta=theta, omega=omega)


def min_eig_omega_theta_inv(gm: GraphMatrices) -> float:
    """Smallest eigenvalue of Omega Theta^-1.

    The product is similar to Theta^-1/2 Omega Theta^-1/2, so the spectrum is
    real and positive whenever Omega > 0.
    """
    d = np.sqrt(np.diag(gm.theta))
    sym = gm.omega / np.outer(d, d)
    eig = np.linalg.eigvalsh(0.5 * (sym + sym.T))
    if eig[0] <= 0:
        raise TopologyError(f"Omega Theta^-1 is not positive definite (min eig {eig[0]})")
    return float(eig[0])
