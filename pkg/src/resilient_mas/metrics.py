"""Containment error and bound computations plus post-run reporting.

Everything here is pure post-processing over immutable data: the local and
global containment errors, the ultimate-bound constants, the convex-hull
membership test and exponential-rate fitting.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg as la

from .topology import GraphMatrices


def local_xi(topology, outputs, leader_outputs):
    """Attack-free local containment information
    xi_i = sum_j a_ij (y_j - y_i) + sum_k g_ik (y_k - y_i)."""
    N = topology.n_followers
    out = []
    for i in range(N):
        acc = np.zeros_like(np.asarray(outputs[i], dtype=float))
        for j in range(N):
            a = topology.follower_adjacency[i, j]
            if a:
                acc += a * (outputs[j] - outputs[i])
        for k in range(topology.m_leaders):
            g = topology.pinning[i, k]
            if g:
                acc += g * (leader_outputs[k] - outputs[i])
        out.append(acc)
    return out


def global_containment_error(gm: GraphMatrices, outputs, leader_outputs) -> np.ndarray:
    """Stacked error e = y - (Psi_bar (x) I)^-1 sum_k (Psi_k (x) I)(1 (x) y_k)."""
    N = gm.psi_bar.shape[0]
    y = np.asarray(outputs, dtype=float)
    p = y.shape[1]
    target = np.zeros((N, p))
    for k, psi in enumerate(gm.psi_per_leader):
        target += psi @ np.tile(np.asarray(leader_outputs[k], dtype=float), (N, 1))
    target = la.solve(gm.psi_bar, target)
    return (y - target).ravel()


def uub_bounds(models, gains, dbar: float):
    """Per-follower ultimate bounds: e_bar_i = dbar ||C_i|| / sigma_min(P_i B_i)
    and eps_bar_i = dbar / sigma_min(P_i B_i).  ||C_i|| is the spectral norm."""
    e_bars, eps_bars = [], []
    for fm, g in zip(models, gains):
        sv = la.svdvals(g.P @ fm.B)
        smin = sv[-1]
        if smin <= 0:
            raise ValueError("sigma_min(P B) = 0; ultimate bound undefined")
        eps_bars.append(dbar / smin)
        e_bars.append(dbar * la.norm(fm.C, 2) / smin)
    return np.array(e_bars), np.array(eps_bars)


def _simplex_grid(m: int, step: float):
    ticks = np.arange(0.0, 1.0 + step / 2, step)
    if m == 1:
        return np.array([[1.0]])
    combos = []
    for parts in itertools.product(ticks, repeat=m - 1):
        s = sum(parts)
        if s <= 1.0 + 1e-12:
            combos.append(list(parts) + [max(0.0, 1.0 - s)])
    return np.array(combos)


def containment_membership(outputs_at_t, leader_outputs_at_t, tol: float):
    """True per follower iff its output lies within tol of the convex hull of
    the leader outputs, by exhaustive simplex-grid search (coarse pass then a
    local refinement to an effective 1e-3 resolution; exact for <= 4 leaders)."""
    L = np.asarray(leader_outputs_at_t, dtype=float)
    m = L.shape[0]
    if m > 4:
        raise ValueError("exact hull test limited to at most 4 leaders")
    coarse = _simplex_grid(m, 0.02)
    out = []
    for y in outputs_at_t:
        y = np.asarray(y, dtype=float)
        d = np.linalg.norm(coarse @ L - y, axis=1)
        best = coarse[np.argmin(d)]
        fine = np.clip(best + _simplex_grid(m, 1e-3) * 0.04 - 0.02, 0.0, 1.0)
        fine = fine / fine.sum(axis=1, keepdims=True)
        dist = np.linalg.norm(fine @ L - y, axis=1).min()
        out.append(bool(min(dist, d.min()) <= tol))
    return out


def fit_decay_rate(times, norms, t_start: float) -> float:
    """Least-squares slope of log(norm) over [t_start, end]; returns the decay
    rate (positive when the signal shrinks)."""
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    mask = (times >= t_start) & (norms > 0)
    if mask.sum() < 10:
        raise ValueError("fewer than 10 positive samples in the fit window")
    t = times[mask]
    slope = np.polyfit(t, np.log(norms[mask]), 1)[0]
    return float(-slope)


def summarize(loop, trace) -> dict:
    """Terminal errors, fitted rates and bound checks for a finished run."""
    cfg = loop.config
    N = loop.N
    times = trace.times
    cols = trace.columns
    e_bars, eps_bars = uub_bounds(loop.models, loop.gains, cfg.dbar)
    tail = times >= 0.8 * times[-1]

    e_ok, eps_ok = [], []
    for i in range(N):
        e_ok.append(bool(np.all(cols[f"e_{i}_norm"][tail] <= e_bars[i])))
        eps_ok.append(bool(np.all(cols[f"eps_norm_{i}"][tail] <= eps_bars[i])))

    obs_final = max(float(cols[f"obs_err_{i}"][-1]) for i in range(N))
    rates = {}
    for name, series in (("obs_err", np.max([cols[f"obs_err_{i}"] for i in range(N)], axis=0)),
                         ("z_err", cols["z_err_norm"]),
                         ("reg_res", np.max([cols[f"reg_res_{i}"] for i in range(N)], axis=0))):
        try:
            rates[name] = fit_decay_rate(times, series, 0.2 * times[-1])
        except (ValueError, FloatingPointError):
            rates[name] = None

    return {
        "final_obs_err_max": obs_final,
        "final_z_err_norm": float(cols["z_err_norm"][-1]),
        "final_e_norms": [float(cols[f"e_{i}_norm"][-1]) for i in range(N)],
        "e_bars": e_bars.tolist(),
        "eps_bars": eps_bars.tolist(),
        "e_bounds_satisfied": e_ok,
        "eps_bounds_satisfied": eps_ok,
        "bounds_satisfied": bool(all(e_ok) and all(eps_ok)),
        "fitted_decay_rates": rates,
        "tau_a": loop.tau_a if np.isfinite(loop.tau_a) else None,
        "T0": loop.T0 if np.isfinite(loop.T0) else None,
        "duty_feasible": loop.tl.duty_feasible,
        "xi_bar_max": trace.xi_bar_norms.max(axis=0).tolist(),
    }
