"""Closed-loop assembly and deterministic fixed-step integration.

The full stacked state is one flat vector:
[leader states | follower states | observer blocks | estimator states |
 regulator flow states | adaptation parameters].
Integration is classical RK4 with the DoS indicator sampled once per step at
the left endpoint (held through the stages) and smooth attack signals
evaluated at the stage times.  Runs are bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from . import cpl, twinlayer
from .attacks import ActuationAttack, CamouflageSource, DosSchedule, FdiModel, corrupted_xi
from .dynamics import (ControllerGains, FollowerModel, GainDesignError, LeaderModel,
                       TlGainDesign, care_solve, check_rank_condition, design_tl_gain,
                       is_detectable, is_stabilizable, observer_gain_bound,
                       regulator_gain_bound)
from .topology import GraphMatrices, Topology, build_graph_matrices, check_leader_reachability


class AssemblyError(ValueError):
    pass


class SimDivergenceError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:.6f}")
        self.t = t


@dataclass
class FollowerSetup:
    model: FollowerModel
    x0: np.ndarray
    Q_weight: np.ndarray | None = None
    R_weight: np.ndarray | None = None
    K_override: np.ndarray | None = None
    attack: ActuationAttack = field(default_factory=ActuationAttack)


@dataclass
class ClosedLoopConfig:
    topology: Topology
    leader: LeaderModel
    leader_x0: np.ndarray  # (M, q)
    followers: list
    mu1: float
    mu2: float
    mu3: float
    dos: DosSchedule = field(default_factory=DosSchedule)
    fdi: FdiModel = field(default_factory=FdiModel)
    camouflage: tuple = ()
    alpha1_tilde: float = 1.0
    k1: float = 0.01
    adapt_omega: float = 0.01
    dbar: float = 0.0
    dt: float = 1e-3
    horizon: float = 30.0
    stride: int = 10
    preconverge_regulator: bool = False
    observer_x0: np.ndarray | None = None  # (N, p+q, q), default zeros
    z_x0: np.ndarray | None = None  # (N, q), default zeros

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise AssemblyError("dt and horizon must be positive")
        self.leader_x0 = np.atleast_2d(np.asarray(self.leader_x0, dtype=float))


@dataclass
class SimTrace:
    """Uniform-grid record of a run plus diagnostics kept out of trace.csv."""

    times: np.ndarray
    columns: dict  # name -> array, in CSV column order
    xi_bar_norms: np.ndarray  # (samples, N); diagnostic only
    chi_hat_norms: np.ndarray  # (samples, N); diagnostic only
    validation: list
    summary: dict

    def column_names(self):
        return list(self.columns.keys())


class ClosedLoop:
    """Assembled system with a single combined right-hand side."""

    def __init__(self, config: ClosedLoopConfig, strict: bool = True):
        self.config = config
        self.strict = strict
        top = config.topology
        self.N = top.n_followers
        self.M = top.m_leaders
        lead = config.leader
        self.q, self.p = lead.q, lead.p
        self.gm: GraphMatrices = build_graph_matrices(top)
        self.validation: list = []

        self._check("leader reachability",
                    check_leader_reachability(top), hard=True)
        self._check("leader spectrum in closed right half-plane",
                    lead.spectrum_nonnegative(), hard=True)

        if config.leader_x0.shape != (self.M, self.q):
            raise AssemblyError(f"leader_x0 shape {config.leader_x0.shape} != "
                                f"({self.M}, {self.q})")
        if len(config.followers) != self.N:
            raise AssemblyError("follower count does not match the topology")

        self.models: list[FollowerModel] = []
        self.gains: list[ControllerGains] = []
        self.K: list[np.ndarray] = []
        for i, fs in enumerate(config.followers):
            fm = fs.model
            if fm.p != self.p:
                raise AssemblyError(f"follower {i} output dim {fm.p} != leader {self.p}")
            self._check(f"follower {i} stabilizable",
                        is_stabilizable(fm.A, fm.B), hard=True)
            self._check(f"follower {i} detectable",
                        is_detectable(fm.A, fm.C), hard=True)
            self._check(f"follower {i} regulator rank condition",
                        check_rank_condition(fm, lead.S), hard=True)
            Q = np.eye(fm.n) if fs.Q_weight is None else np.asarray(fs.Q_weight, float)
            Rw = np.eye(fm.m) if fs.R_weight is None else np.asarray(fs.R_weight, float)
            g = care_solve(fm.A, fm.B, Q, Rw)
            K = g.K if fs.K_override is None else np.asarray(fs.K_override, float)
            self._check(f"follower {i}: A + B K Hurwitz",
                        bool(np.max(np.linalg.eigvals(fm.A + fm.B @ K).real) < 0),
                        hard=True)
            self.models.append(fm)
            self.gains.append(g)
            self.K.append(K)

        # attack suite consistency (per-attack derivative bounds are enforced at
        # construction; here we only confirm the shared bound)
        for i, fs in enumerate(config.followers):
            if fs.attack.kind != "none" and fs.attack.dbar > config.dbar + 1e-12:
                self._check(f"actuation attack {i} dbar within shared bound",
                            False, hard=True)

        # duty-cycle fit and gain bounds (soft: warnings only)
        try:
            self.tau_a, self.T0 = config.dos.duty_fit(config.horizon)
        except Exception:
            self.tau_a, self.T0 = 1.0, float("inf")
        try:
            mu1_bound = observer_gain_bound(lead.S, self.gm, self.tau_a)
            self._check(f"observer gain bound mu1 > {mu1_bound:.4f}",
                        config.mu1 > mu1_bound, hard=False)
        except GainDesignError:
            self._check("observer gain bound defined (tau_a > 1)", False, hard=False)
        for i, fm in enumerate(self.models):
            b = regulator_gain_bound(lead.S, fm)
            self._check(f"regulator gain bound mu3 > {b:.4f} (follower {i})",
                        config.mu3 > b, hard=False)

        self.tl: TlGainDesign = design_tl_gain(
            lead.S, config.mu2, self.gm.theta, self.gm.omega, self.tau_a,
            alpha1_tilde=config.alpha1_tilde, k1=config.k1)
        self._check("duty-cycle feasibility 1/tau_a < alpha1/(alpha1+alpha2)",
                    self.tl.duty_feasible, hard=False)

        # state layout
        self.ns = [fm.n for fm in self.models]
        self.ms = [fm.m for fm in self.models]
        self.off_lead = 0
        self.off_x = self.M * self.q
        self.off_obs = self.off_x + sum(self.ns)
        self.off_z = self.off_obs + self.N * (self.p + self.q) * self.q
        self.off_delta = self.off_z + self.N * self.q
        self.delta_sizes = [(n + m) * self.q for n, m in zip(self.ns, self.ms)]
        self.off_rho = self.off_delta + sum(self.delta_sizes)
        self.dim = self.off_rho + self.N
        self.upsilon = lead.upsilon

        # precomputed controller pieces
        self._PB = [g.P @ fm.B for g, fm in zip(self.gains, self.models)]
        self._MN = [cpl._mn_blocks(fm) for fm in self.models]

    def _check(self, name: str, ok: bool, hard: bool):
        level = "pass" if ok else ("fail" if hard else "warn")
        self.validation.append({"name": name, "level": level})
        if not ok and hard and self.strict:
            raise AssemblyError(f"hard check failed: {name}")

    # ---- state packing ------------------------------------------------------
    def initial_state(self) -> np.ndarray:
        cfg = self.config
        st = np.zeros(self.dim)
        st[:self.off_x] = cfg.leader_x0.ravel()
        o = self.off_x
        for fs, n in zip(cfg.followers, self.ns):
            st[o:o + n] = np.asarray(fs.x0, dtype=float)
            o += n
        if cfg.observer_x0 is not None:
            st[self.off_obs:self.off_z] = np.asarray(cfg.observer_x0, float).ravel()
        if cfg.z_x0 is not None:
            st[self.off_z:self.off_delta] = np.asarray(cfg.z_x0, float).ravel()
        if cfg.preconverge_regulator:
            o = self.off_delta
            for i, fm in enumerate(self.models):
                pi, ga = cpl.regulator_direct_solve(cfg.leader.S, cfg.leader.R, fm)
                st[o:o + self.delta_sizes[i]] = cpl.pack_delta(pi, ga)
                o += self.delta_sizes[i]
        return st

    def split(self, st: np.ndarray):
        lead = st[:self.off_x].reshape(self.M, self.q)
        xs = []
        o = self.off_x
        for n in self.ns:
            xs.append(st[o:o + n])
            o += n
        obs = st[self.off_obs:self.off_z].reshape(self.N, self.p + self.q, self.q)
        z = st[self.off_z:self.off_delta].reshape(self.N, self.q)
        deltas = []
        o = self.off_delta
        for sz in self.delta_sizes:
            deltas.append(st[o:o + sz])
            o += sz
        rho = st[self.off_rho:]
        return lead, xs, obs, z, deltas, rho

    # ---- dynamics -----------------------------------------------------------
    def rhs(self, t: float, st: np.ndarray, dos_now: bool,
            collect: dict | None = None) -> np.ndarray:
        cfg = self.config
        lead_x, xs, obs, z, deltas, rho = self.split(st)
        d = np.empty_like(st)

        d[:self.off_x] = (lead_x @ cfg.leader.S.T).ravel()
        d[self.off_obs:self.off_z] = twinlayer.observer_rhs(
            obs, self.upsilon, cfg.topology, dos_now, cfg.mu1).ravel()
        d[self.off_z:self.off_delta] = twinlayer.estimator_rhs(
            z, obs, lead_x, cfg.topology, dos_now, cfg.mu2, self.tl.G).ravel()

        o_x = self.off_x
        o_d = self.off_delta
        for i, fm in enumerate(self.models):
            s_hat = obs[i, :self.q, :]
            r_hat = obs[i, self.q:, :]
            M, Nmat = self._MN[i]
            Y = deltas[i].reshape(fm.n + fm.m, self.q, order="F")
            rstar = np.vstack([np.zeros((fm.n, self.q)), r_hat])
            W = M @ Y - Nmat @ Y @ s_hat - rstar
            dY = -cfg.mu3 * (M.T @ W - Nmat.T @ W @ s_hat.T)
            d[o_d:o_d + self.delta_sizes[i]] = dY.flatten("F")

            pi_hat, gamma_hat = Y[:fm.n], Y[fm.n:]
            eps = xs[i] - pi_hat @ z[i]
            w_vec = self._PB[i].T @ eps
            w = float(np.linalg.norm(w_vec))
            chi_hat = w_vec / (w + cfg.adapt_omega) * rho[i]
            u = gamma_hat @ z[i] + self.K[i] @ eps - chi_hat
            chi = cfg.followers[i].attack.signal(t, fm.m)
            d[o_x:o_x + fm.n] = fm.A @ xs[i] + fm.B @ (u + chi)
            if w >= cfg.dbar:
                d[self.off_rho + i] = w + 2.0 * cfg.adapt_omega
            else:
                d[self.off_rho + i] = w + 2.0 * cfg.adapt_omega * w / cfg.dbar

            if collect is not None:
                collect.setdefault("u", []).append(u)
                collect.setdefault("eps", []).append(eps)
                collect.setdefault("reg_res", []).append(la.norm(W, "fro"))
                collect.setdefault("chi_hat", []).append(chi_hat)
            o_x += fm.n
            o_d += self.delta_sizes[i]
        return d

    def step(self, t: float, st: np.ndarray, dt: float) -> np.ndarray:
        """One classical RK4 step; DoS gate held at its value at the left
        endpoint of the step."""
        gate = self.config.dos.active(t)
        k1 = self.rhs(t, st, gate)
        k2 = self.rhs(t + 0.5 * dt, st + 0.5 * dt * k1, gate)
        k3 = self.rhs(t + 0.5 * dt, st + 0.5 * dt * k2, gate)
        k4 = self.rhs(t + dt, st + dt * k3, gate)
        out = st + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(out)):
            raise SimDivergenceError(t)
        return out


def assemble(config: ClosedLoopConfig, strict: bool = True) -> ClosedLoop:
    return ClosedLoop(config, strict=strict)


def run(config: ClosedLoopConfig, loop: ClosedLoop | None = None) -> SimTrace:
    """Integrate over [0, horizon], recording every stride-th step."""
    from . import metrics

    loop = loop if loop is not None else assemble(config)
    cfg = config
    n_steps = int(round(cfg.horizon / cfg.dt))
    st = loop.initial_state()
    rec_times = []
    rows = []
    xi_rows = []
    chi_rows = []
    for s in range(n_steps + 1):
        t = s * cfg.dt
        if s % cfg.stride == 0 or s == n_steps:
            rec_times.append(t)
            row, chi_norms = _record(loop, t, st)
            rows.append(row)
            chi_rows.append(chi_norms)
            xi_rows.append(_xi_bar_norms(loop, t, st))
        if s < n_steps:
            st = loop.step(t, st, cfg.dt)

    times = np.array(rec_times)
    columns = {name: np.array([r[name] for r in rows]) for name in rows[0]}
    trace = SimTrace(times=times, columns=columns,
                     xi_bar_norms=np.array(xi_rows),
                     chi_hat_norms=np.array(chi_rows),
                     validation=loop.validation, summary={})
    trace.summary = metrics.summarize(loop, trace)
    return trace


def _record(loop: ClosedLoop, t: float, st: np.ndarray):
    from . import metrics

    cfg = loop.config
    lead_x, xs, obs, z, deltas, rho = loop.split(st)
    collect: dict = {}
    loop.rhs(t, st, cfg.dos.active(t), collect=collect)
    leader_y = lead_x @ cfg.leader.R.T
    y = [fm.C @ x for fm, x in zip(loop.models, xs)]
    e = metrics.global_containment_error(loop.gm, y, leader_y)
    z_err = twinlayer.estimator_error(z, lead_x, loop.gm)

    row: dict = {"t": t, "dos": 1.0 if cfg.dos.active(t) else 0.0}
    for k in range(loop.M):
        for dcomp in range(loop.p):
            row[f"yk_{k}_{dcomp}"] = leader_y[k, dcomp]
    for i in range(loop.N):
        for dcomp in range(loop.p):
            row[f"y_{i}_{dcomp}"] = y[i][dcomp]
    for i in range(loop.N):
        row[f"e_{i}_norm"] = float(np.linalg.norm(e[i * loop.p:(i + 1) * loop.p]))
    for i in range(loop.N):
        row[f"obs_err_{i}"] = float(la.norm(obs[i] - loop.upsilon, "fro"))
    row["z_err_norm"] = float(np.linalg.norm(z_err))
    for i in range(loop.N):
        row[f"reg_res_{i}"] = float(collect["reg_res"][i])
    for i in range(loop.N):
        row[f"eps_norm_{i}"] = float(np.linalg.norm(collect["eps"][i]))
    for i in range(loop.N):
        row[f"rho_{i}"] = float(rho[i])
    for i in range(loop.N):
        for dcomp in range(loop.ms[i]):
            row[f"u_{i}_{dcomp}"] = float(collect["u"][i][dcomp])
    chi_norms = np.array([np.linalg.norm(c) for c in collect["chi_hat"]])
    return row, chi_norms


def _xi_bar_norms(loop: ClosedLoop, t: float, st: np.ndarray) -> np.ndarray:
    cfg = loop.config
    lead_x, xs, _obs, _z, _deltas, _rho = loop.split(st)
    leader_y = lead_x @ cfg.leader.R.T
    y = [fm.C @ x for fm, x in zip(loop.models, xs)]
    xb = corrupted_xi(cfg.topology, cfg.fdi, cfg.camouflage, cfg.dos,
                      y, list(leader_y), t)
    return np.array([np.linalg.norm(v) for v in xb])
