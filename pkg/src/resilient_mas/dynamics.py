"""Agent models, Riccati-based gain design and the associated feasibility checks.

The continuous algebraic Riccati equation is solved through the stable
invariant subspace of the 2n x 2n Hamiltonian matrix (ordered real Schur
form).  The twin-layer coupling gain comes from a shifted Riccati equation;
see design_tl_gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .topology import GraphMatrices


class GainDesignError(ValueError):
    """Gain design failed (no stabilizing Riccati solution, singular data...)."""


@dataclass(frozen=True)
class LeaderModel:
    """Leader dynamics x' = S x, y = R x shared by all leaders."""

    S: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if S.shape[0] != S.shape[1]:
            raise ValueError("S must be square")
        if R.shape[1] != S.shape[0]:
            raise ValueError("R column count must match the state dimension of S")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "R", R)

    @property
    def q(self) -> int:
        return self.S.shape[0]

    @property
    def p(self) -> int:
        return self.R.shape[0]

    @property
    def upsilon(self) -> np.ndarray:
        """Stacked [S; R], the quantity the distributed observers reconstruct."""
        return np.vstack([self.S, self.R])

    def spectrum_nonnegative(self, tol: float = 1e-9) -> bool:
        return bool(np.min(np.linalg.eigvals(self.S).real) >= -tol)


@dataclass(frozen=True)
class FollowerModel:
    """Follower dynamics x' = A x + B u, y = C x."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise ValueError("inconsistent follower model dimensions")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class ControllerGains:
    P: np.ndarray
    K: np.ndarray
    Q_weight: np.ndarray
    R_weight: np.ndarray


@dataclass(frozen=True)
class TlGainDesign:
    """Twin-layer estimator gain G and the scalars entering the duty-cycle test."""

    P2: np.ndarray
    G: np.ndarray
    alpha1_tilde: float
    alpha2_tilde: float
    alpha1: float
    alpha2: float
    k1: float
    mu2: float
    duty_feasible: bool


def _pbh_rank_deficient(A: np.ndarray, X: np.ndarray, stacked_cols: bool) -> bool:
    """PBH test: True when some eigenvalue with Re >= 0 loses rank."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -1e-9:
            continue
        if stacked_cols:
            pencil = np.hstack([A - lam * np.eye(n), X])
        else:
            pencil = np.vstack([A - lam * np.eye(n), X])
        if np.linalg.matrix_rank(pencil, tol=1e-9 * max(1.0, la.norm(pencil, 2))) < n:
            return True
    return False


def is_stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    return not _pbh_rank_deficient(A, B, stacked_cols=True)


def is_detectable(A: np.ndarray, C: np.ndarray) -> bool:
    return not _pbh_rank_deficient(A, C, stacked_cols=False)


def care_solve(A: np.ndarray, B: np.ndarray, Q: np.ndarray, Rw: np.ndarray) -> ControllerGains:
    """Stabilizing solution of A'P + PA + Q - P B Rw^-1 B' P = 0 and K = -Rw^-1 B' P.

    Uses the ordered real Schur form of the Hamiltonian
    [[A, -B Rw^-1 B'], [-Q, -A']]; the left-half-plane invariant subspace
    [U1; U2] gives P = U2 U1^-1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    Rw = np.atleast_2d(np.asarray(Rw, dtype=float))
    n = A.shape[0]
    BRB = B @ la.solve(Rw, B.T, assume_a="pos")
    H = np.block([[A, -BRB], [-Q, -A.T]])
    eig = np.linalg.eigvals(H)
    if np.min(np.abs(eig.real)) < 1e-10 * max(1.0, np.max(np.abs(eig))):
        raise GainDesignError("Hamiltonian has eigenvalues on the imaginary axis; "
                              "no stabilizing Riccati solution")
    T, Z, nstab = la.schur(H, sort=lambda re, im: re < 0)
    if nstab != n:
        raise GainDesignError(f"stable Hamiltonian subspace has dimension {nstab} != {n}")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U1) > 1e12:
        raise GainDesignError("ill-conditioned invariant-subspace basis")
    P = la.solve(U1.T, U2.T).T
    P = 0.5 * (P + P.T)
    K = -la.solve(Rw, B.T @ P, assume_a="pos")
    return ControllerGains(P=P, K=K, Q_weight=Q, R_weight=Rw)


def check_rank_condition(fm: FollowerModel, S: np.ndarray) -> bool:
    """Regulator-equation solvability: rank [A - lam I, B; C, 0] = n + p for
    every eigenvalue lam of S (clustered to avoid re-testing repeats)."""
    eigs = np.linalg.eigvals(np.asarray(S, dtype=float))
    scale = max(1.0, np.max(np.abs(eigs)))
    tested: list[complex] = []
    for lam in eigs:
        if any(abs(lam - mu) <= 1e-8 * scale for mu in tested):
            continue
        tested.append(lam)
        pencil = np.block([
            [fm.A - lam * np.eye(fm.n), fm.B.astype(complex)],
            [fm.C.astype(complex), np.zeros((fm.p, fm.m))],
        ])
        sv = la.svdvals(pencil)
        rank = int(np.sum(sv > 1e-9 * sv[0]))
        if rank < fm.n + fm.p:
            return False
    return True


def observer_gain_bound(S: np.ndarray, gm: GraphMatrices, tau_a: float) -> float:
    """Strict lower bound on the leader-dynamics observer gain mu_1."""
    if not tau_a > 1:
        raise GainDesignError(f"tau_a must exceed 1 (got {tau_a}); the DoS duty "
                              "cycle leaves no communication time")
    from .topology import min_eig_omega_theta_inv
    sigma_max = la.svdvals(np.atleast_2d(np.asarray(S, dtype=float)))[0]
    return float(sigma_max / (min_eig_omega_theta_inv(gm) * (1.0 - 1.0 / tau_a)))


def regulator_phi(fm: FollowerModel, S: np.ndarray) -> np.ndarray:
    """Phi = I_q (x) M - S' (x) N with M = [A, B; C, 0], N = [I, 0; 0, 0]."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    q = S.shape[0]
    M = np.block([[fm.A, fm.B], [fm.C, np.zeros((fm.p, fm.m))]])
    N = np.zeros((fm.n + fm.p, fm.n + fm.m))
    N[:fm.n, :fm.n] = np.eye(fm.n)
    return np.kron(np.eye(q), M) - np.kron(S.T, N)


def regulator_gain_bound(S: np.ndarray, fm: FollowerModel) -> float:
    """Strict lower bound on the regulator flow gain mu_3."""
    phi = regulator_phi(fm, S)
    lam_min = np.linalg.eigvalsh(phi.T @ phi)[0]
    if lam_min < 1e-12 * max(1.0, la.norm(phi, 2) ** 2):
        raise GainDesignError("Phi'Phi numerically singular; regulator equations "
                              "unsolvable for this follower")
    sigma_max = la.svdvals(np.atleast_2d(np.asarray(S, dtype=float)))[0]
    return float(sigma_max / lam_min)


def design_tl_gain(S: np.ndarray, mu2: float, theta: np.ndarray, omega: np.ndarray,
                   tau_a: float, alpha1_tilde: float = 1.0, k1: float = 0.01,
                   eps: float = 1e-9) -> TlGainDesign:
    """Twin-layer estimator gain design.

    P2 solves P2 S + S'P2 - mu2^2 P2^2 + alpha1_tilde P2 = 0, obtained as the
    Riccati solution for the shifted drift S + (alpha1_tilde/2) I with input
    weight (1/mu2^2) I and a tiny eps I state weight to avoid the degenerate
    Q = 0 case.  alpha2_tilde is the smallest scalar making
    P2 S + S'P2 - alpha2_tilde P2 <= 0.  The duty-cycle inequality
    1/tau_a < alpha1/(alpha1+alpha2) is reported as a flag, not a failure.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    q = S.shape[0]
    if mu2 <= 0:
        raise GainDesignError("mu2 must be positive")
    shifted = S + 0.5 * alpha1_tilde * np.eye(q)
    gains = care_solve(shifted, mu2 * np.eye(q), eps * np.eye(q), np.eye(q))
    P2 = gains.P
    if np.linalg.eigvalsh(P2)[0] <= 0:
        raise GainDesignError("no positive-definite P2 found")
    # smallest alpha2_tilde with P2 S + S'P2 <= alpha2_tilde P2
    Phalf_inv = la.inv(la.sqrtm(P2).real)
    sym = P2 @ S + S.T @ P2
    alpha2_tilde = max(float(np.linalg.eigvalsh(Phalf_inv @ sym @ Phalf_inv).max()), 0.0)
    theta_p2_norm = la.norm(np.kron(theta, P2), 2)
    alpha1 = alpha1_tilde - k1 * theta_p2_norm
    alpha2 = alpha2_tilde + k1 * theta_p2_norm
    feasible = alpha1 > 0 and np.isfinite(tau_a) and (1.0 / tau_a) < alpha1 / (alpha1 + alpha2)
    lam_max = float(np.linalg.eigvals(la.solve(omega, theta)).real.max())
    G = mu2 * lam_max * P2
    return TlGainDesign(P2=P2, G=G, alpha1_tilde=alpha1_tilde, alpha2_tilde=alpha2_tilde,
                        alpha1=alpha1, alpha2=alpha2, k1=k1, mu2=mu2,
                        duty_feasible=bool(feasible))
