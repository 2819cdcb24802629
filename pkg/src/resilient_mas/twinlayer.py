"""Twin-layer protocols: the distributed leader-dynamics observer and the
distributed resilient state estimator, written as right-hand-side evaluators
over the DoS-gated graph.

Both are vectorized over followers: the observer state is an (N, p+q, q)
array of Upsilon_hat_i = [S_hat_i; R_hat_i] blocks, the estimator state an
(N, q) array of local states z_i.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .topology import Topology, GraphMatrices


def observer_rhs(upsilon_hat: np.ndarray, upsilon_true: np.ndarray,
                 topology: Topology, dos_active_now: bool, mu1: float) -> np.ndarray:
    """d Upsilon_hat_i / dt for every follower.

    Consensus on the neighbors' estimates plus injection of the true leader
    dynamics through pinning edges; all edge weights drop to zero while DoS
    is active, freezing the observer.
    """
    if dos_active_now:
        return np.zeros_like(upsilon_hat)
    A = topology.follower_adjacency
    gsum = topology.pinning.sum(axis=1)
    indeg = A.sum(axis=1)
    neigh = np.einsum("ij,jab->iab", A, upsilon_hat)
    return mu1 * (neigh - (indeg + gsum)[:, None, None] * upsilon_hat
                  + gsum[:, None, None] * upsilon_true)


def estimator_rhs(z: np.ndarray, upsilon_hat: np.ndarray, leader_states: np.ndarray,
                  topology: Topology, dos_active_now: bool, mu2: float,
                  G: np.ndarray) -> np.ndarray:
    """d z_i / dt: open-loop drift with the observed S_hat_i plus the DoS-gated
    coupling toward neighbors and pinned leader states."""
    q = z.shape[1]
    s_hat = upsilon_hat[:, :q, :]
    drift = np.einsum("iab,ib->ia", s_hat, z)
    if dos_active_now:
        return drift
    A = topology.follower_adjacency
    gsum = topology.pinning.sum(axis=1)
    indeg = A.sum(axis=1)
    coup = ((indeg + gsum)[:, None] * z - A @ z - topology.pinning @ leader_states)
    return drift - mu2 * coup @ G.T


def containment_targets(gm: GraphMatrices, leader_states: np.ndarray) -> np.ndarray:
    """Per-follower convex-combination targets: the stacked vector
    (Psi_bar (x) I)^-1 sum_k (Psi_k (x) I) (1_N (x) x_k), reshaped to (N, q)."""
    N = gm.psi_bar.shape[0]
    q = leader_states.shape[1]
    rhs = np.zeros((N, q))
    for k, psi in enumerate(gm.psi_per_leader):
        rhs += psi @ np.tile(leader_states[k], (N, 1))
    return la.solve(gm.psi_bar, rhs)


def estimator_error(z: np.ndarray, leader_states: np.ndarray,
                    gm: GraphMatrices) -> np.ndarray:
    """Stacked estimator error z_tilde = z - (weighted combination of leader
    states), flattened follower-major."""
    return (z - containment_targets(gm, leader_states)).ravel()


def kronecker_commutation_residual(gm: GraphMatrices, S: np.ndarray) -> float:
    """Frobenius norm of the per-leader commutators
    [(Psi_bar^-1 Psi_k) (x) I, I (x) S]; zero in exact arithmetic because
    (A (x) I) and (I (x) S) always commute."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    N = gm.psi_bar.shape[0]
    q = S.shape[0]
    IS = np.kron(np.eye(N), S)
    total = 0.0
    for psi in gm.psi_per_leader:
        W = np.kron(la.solve(gm.psi_bar, psi), np.eye(q))
        total += la.norm(W @ IS - IS @ W, "fro")
    return float(total)
