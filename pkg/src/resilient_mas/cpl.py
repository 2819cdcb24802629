"""Cyber-physical-layer algorithms: the gradient-flow solver for the output
regulator equations (with a direct dense-solve oracle) and the decentralized
adaptive attack-resilient control law.

vec layout is column-major throughout, matching the Kronecker identity
vec(A X B) = (B' (x) A) vec(X) that turns the regulator equations
A Pi + B Gamma = Pi S, C Pi = R into the linear system Phi Delta = Rvec.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .dynamics import FollowerModel, regulator_phi


class RegulatorError(ValueError):
    pass


def _mn_blocks(fm: FollowerModel):
    M = np.block([[fm.A, fm.B], [fm.C, np.zeros((fm.p, fm.m))]])
    N = np.zeros((fm.n + fm.p, fm.n + fm.m))
    N[:fm.n, :fm.n] = np.eye(fm.n)
    return M, N


def regulator_direct_solve(S: np.ndarray, R: np.ndarray, fm: FollowerModel):
    """Solve A Pi + B Gamma = Pi S, C Pi = R as one dense Kronecker system.

    Oracle for the gradient flow.  Returns (Pi, Gamma); raises RegulatorError
    when Phi is singular (the rank condition fails).
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    q = S.shape[0]
    phi = regulator_phi(fm, S)
    rvec = np.vstack([np.zeros((fm.n, q)), R]).flatten("F")
    try:
        delta = la.solve(phi, rvec)
    except la.LinAlgError as exc:
        raise RegulatorError("Phi singular: regulator equations unsolvable") from exc
    pi, gamma = unpack_delta(delta, fm, q)
    res_state = la.norm(fm.A @ pi + fm.B @ gamma - pi @ S, "fro")
    res_out = la.norm(fm.C @ pi - R, "fro")
    if max(res_state, res_out) > 1e-9 * max(1.0, la.norm(rvec)):
        raise RegulatorError(f"regulator residuals too large: {res_state:.3e}, {res_out:.3e}")
    return pi, gamma


def unpack_delta(delta_hat: np.ndarray, fm: FollowerModel, q: int):
    """Inverse of the column-major vec of the stacked [Pi; Gamma]."""
    delta_hat = np.asarray(delta_hat, dtype=float).ravel()
    if delta_hat.size != (fm.n + fm.m) * q:
        raise RegulatorError(
            f"delta length {delta_hat.size} != (n+m)*q = {(fm.n + fm.m) * q}")
    Y = delta_hat.reshape(fm.n + fm.m, q, order="F")
    return Y[:fm.n].copy(), Y[fm.n:].copy()


def pack_delta(pi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return np.vstack([pi, gamma]).flatten("F")


def regulator_flow_rhs(delta_hat: np.ndarray, s_hat: np.ndarray, r_hat: np.ndarray,
                       fm: FollowerModel, mu3: float) -> np.ndarray:
    """Gradient flow d Delta_hat/dt = -mu3 Phi_hat' (Phi_hat Delta_hat - Rvec_hat).

    Evaluated in matrix form (no Kronecker products materialized):
    Phi Delta = vec(M Y - N Y S) and Phi' w = vec(M' W - N' W S').
    """
    q = s_hat.shape[0]
    M, N = _mn_blocks(fm)
    Y = np.asarray(delta_hat, dtype=float).reshape(fm.n + fm.m, q, order="F")
    rstar = np.vstack([np.zeros((fm.n, q)), r_hat])
    W = M @ Y - N @ Y @ s_hat - rstar
    dY = -mu3 * (M.T @ W - N.T @ W @ s_hat.T)
    return dY.flatten("F")


def regulator_flow_solve(S: np.ndarray, R: np.ndarray, fm: FollowerModel, mu3: float,
                         delta0: np.ndarray | None = None):
    """Integrate the gradient flow with S_hat, R_hat frozen at (S, R) until the
    horizon 20 / (mu3 * lambda_min(Phi'Phi)); RK4 with a step set by the
    stiffest mode.  Returns the final (Pi_hat, Gamma_hat)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    q = S.shape[0]
    phi = regulator_phi(fm, S)
    lam = np.linalg.eigvalsh(phi.T @ phi)
    horizon = 20.0 / (mu3 * lam[0])
    dt = 1.0 / (mu3 * lam[-1])
    n_steps = int(np.ceil(horizon / dt))
    dt = horizon / n_steps
    delta = np.zeros((fm.n + fm.m) * q) if delta0 is None else np.asarray(delta0, float).copy()
    for _ in range(n_steps):
        k1 = regulator_flow_rhs(delta, S, R, fm, mu3)
        k2 = regulator_flow_rhs(delta + 0.5 * dt * k1, S, R, fm, mu3)
        k3 = regulator_flow_rhs(delta + 0.5 * dt * k2, S, R, fm, mu3)
        k4 = regulator_flow_rhs(delta + dt * k3, S, R, fm, mu3)
        delta = delta + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return unpack_delta(delta, fm, q)


def tracking_error(x_i: np.ndarray, pi_hat_i: np.ndarray, z_i: np.ndarray) -> np.ndarray:
    """eps_i = x_i - Pi_hat_i z_i, the deviation of the physical state from the
    twin-layer reference."""
    return x_i - pi_hat_i @ z_i


def compensation_signal(eps_i: np.ndarray, P_i: np.ndarray, B_i: np.ndarray,
                        rho_hat_i: float, omega: float) -> np.ndarray:
    """Smooth adaptive compensation chi_hat_i; saturates toward rho_hat_i times
    the unit direction of B'P eps as the projection grows, with omega keeping
    the law chattering-free."""
    w = B_i.T @ P_i @ eps_i
    return w / (np.linalg.norm(w) + omega) * rho_hat_i


def rho_rhs(eps_i: np.ndarray, P_i: np.ndarray, B_i: np.ndarray,
            dbar: float, omega: float) -> float:
    """Adaptation rate for rho_hat_i; always nonnegative and continuous at the
    branch boundary ||eps'PB|| = dbar."""
    w = float(np.linalg.norm(eps_i @ P_i @ B_i))
    if w >= dbar:
        return w + 2.0 * omega
    return w + 2.0 * omega * w / dbar


def control_input(eps_i: np.ndarray, z_i: np.ndarray, gamma_hat_i: np.ndarray,
                  K_i: np.ndarray, chi_hat_i: np.ndarray) -> np.ndarray:
    """u_i = Gamma_hat_i z_i + K_i eps_i - chi_hat_i (feedforward, feedback,
    attack compensation)."""
    return gamma_hat_i @ z_i + K_i @ eps_i - chi_hat_i
