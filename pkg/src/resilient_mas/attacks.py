"""Attack models: DoS interval schedules, unbounded actuation attacks,
FDI output distortion and camouflage signal injection.

DoS is all-or-nothing over the whole network (global switching of the
effective edge weights); attack intervals are half-open [t, t+duration).
FDI and camouflage touch only the diagnostic measurement path (the
corrupted local containment information); the twin-layer protocol never
consumes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class AttackModelError(ValueError):
    pass


@dataclass(frozen=True)
class DosSchedule:
    """Ordered, non-overlapping half-open DoS intervals [t, t + duration)."""

    intervals: tuple = ()

    def __post_init__(self):
        iv = tuple((float(t), float(d)) for t, d in self.intervals)
        prev_end = -math.inf
        for t, d in iv:
            if d <= 0:
                raise AttackModelError(f"nonpositive DoS duration at t={t}")
            if t <= prev_end:
                raise AttackModelError("DoS intervals must be strictly ordered and "
                                       "non-overlapping")
            prev_end = t + d
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def periodic(cls, period: float, start_offset: float, duration: float,
                 horizon: float) -> "DosSchedule":
        """Expand [start_offset + k*period, + duration) for every k whose
        interval starts before the horizon."""
        if duration >= period:
            raise AttackModelError("periodic DoS duration must be shorter than the period")
        k = 0
        out = []
        while start_offset + k * period < horizon:
            out.append((start_offset + k * period, duration))
            k += 1
        return cls(tuple(out))

    def active(self, t: float) -> bool:
        """True iff t lies in some attack interval (half-open on the right)."""
        for start, dur in self.intervals:
            if start > t:
                return False
            if t < start + dur:
                return True
        return False

    def metrics(self, t1: float, t2: float):
        """(count, total attacked time, frequency) over the window [t1, t2)."""
        if not t2 > t1 >= 0:
            raise AttackModelError("need t2 > t1 >= 0")
        count = 0
        total = 0.0
        for start, dur in self.intervals:
            lo, hi = max(start, t1), min(start + dur, t2)
            if hi > lo:
                count += 1
                total += hi - lo
        return count, total, count / (t2 - t1)

    def duty_fit(self, horizon: float):
        """Fit (tau_a, T0): the largest tau_a whose attack-duration inequality
        T_a(t1,t2) <= T0 + (t2-t1)/tau_a holds over the horizon with the
        smallest T0 >= 0.

        tau_a is the horizon-to-attacked-time ratio; T0 is the worst slack over
        all interval-endpoint-aligned windows (the supremum for a piecewise
        constant indicator is attained there).  An always-attacked schedule is
        rejected: the definition requires tau_a > 1.
        """
        if not self.intervals:
            return math.inf, 0.0
        _, total, _ = self.metrics(0.0, horizon)
        if total >= horizon * (1 - 1e-12):
            raise AttackModelError("DoS active over the whole horizon: tau_a would "
                                   "be 1, infeasible under the duty-cycle definition")
        tau_a = horizon / total
        edges = sorted({0.0, horizon}
                       | {max(0.0, min(s, horizon)) for s, _ in self.intervals}
                       | {min(s + d, horizon) for s, d in self.intervals})
        t0_req = 0.0
        for a_idx, t1 in enumerate(edges):
            for t2 in edges[a_idx + 1:]:
                _, ta, _ = self.metrics(t1, t2)
                t0_req = max(t0_req, ta - (t2 - t1) / tau_a)
        return tau_a, t0_req


@dataclass(frozen=True)
class ActuationAttack:
    """Additive input attack chi(t) with derivative bounded by dbar.

    kind 'none': zero signal.  kind 'ramp': chi(t) = rate * t.  kind 'table':
    linear interpolation of (time, value-vector) samples.
    """

    kind: str = "none"
    rate: np.ndarray | None = None
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    dbar: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "ramp", "table"):
            raise AttackModelError(f"unknown actuation attack kind {self.kind!r}")
        if self.kind == "ramp":
            rate = np.asarray(self.rate, dtype=float).ravel()
            object.__setattr__(self, "rate", rate)
            if np.linalg.norm(rate) > self.dbar + 1e-12:
                raise AttackModelError(
                    f"ramp rate norm {np.linalg.norm(rate):.6g} exceeds the "
                    f"derivative bound dbar={self.dbar}")
        elif self.kind == "table":
            times = np.asarray(self.times, dtype=float).ravel()
            values = np.atleast_2d(np.asarray(self.values, dtype=float))
            if len(times) != values.shape[0] or len(times) < 2:
                raise AttackModelError("table attack needs >= 2 (time, value) samples")
            if np.any(np.diff(times) <= 0):
                raise AttackModelError("table times must be strictly increasing")
            slopes = np.diff(values, axis=0) / np.diff(times)[:, None]
            worst = float(np.max(np.linalg.norm(slopes, axis=1)))
            if worst > self.dbar + 1e-12:
                raise AttackModelError(
                    f"table slope norm {worst:.6g} exceeds dbar={self.dbar}")
            object.__setattr__(self, "times", times)
            object.__setattr__(self, "values", values)

    def signal(self, t: float, dim: int) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(dim)
        if self.kind == "ramp":
            return self.rate * t
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = min(max(idx, 0), len(self.times) - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.values[idx] + w * self.values[idx + 1]


def _fdi_map(kind: str, params):
    if kind == "identity":
        return lambda y, t: y
    if kind == "additive_bias":
        bias = np.asarray(params, dtype=float).ravel()
        return lambda y, t: y + bias
    if kind == "additive_sine":
        amp, freq = float(params[0]), float(params[1])
        return lambda y, t: y + amp * math.sin(2 * math.pi * freq * t)
    if kind == "gain":
        g = float(params)
        return lambda y, t: g * y
    raise AttackModelError(f"unknown FDI distortion kind {kind!r}")


@dataclass(frozen=True)
class FdiModel:
    """Per directed pair distortion of exchanged outputs.

    Keys are (receiver, sender) pairs over the combined follower/leader index
    space used by the config; unset pairs are identity.
    """

    distortions: tuple = ()  # ((receiver, sender, kind, params), ...)

    def __post_init__(self):
        table = {}
        for recv, send, kind, params in self.distortions:
            table[(recv, send)] = _fdi_map(kind, params)
        object.__setattr__(self, "_table", table)

    def apply(self, receiver: int, sender: int, y: np.ndarray, t: float) -> np.ndarray:
        f = self._table.get((receiver, sender))
        return y if f is None else f(np.asarray(y, dtype=float), t)

    @property
    def empty(self) -> bool:
        return not self._table


@dataclass(frozen=True)
class CamouflageSource:
    """Impostor 'leader' signal y_l(t) injected into pinned followers."""

    attacker_id: int
    amplitude: np.ndarray
    frequency: float = 0.25
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude", np.asarray(self.amplitude, dtype=float).ravel())

    def signal(self, t: float) -> np.ndarray:
        return self.amplitude * math.sin(2 * math.pi * self.frequency * t + self.phase)


def corrupted_xi(topology, fdi: FdiModel, camouflage, dos: DosSchedule,
                 outputs_at_t, leader_outputs_at_t, t: float):
    """Per-follower corrupted local containment information.

    xi_bar_i sums the FDI-distorted neighbor/leader relative outputs with DoS
    gating plus the camouflage terms.  Diagnostic only: the implemented
    twin-layer protocol never reads this signal.
    """
    N = topology.n_followers
    M = topology.m_leaders
    cam_by_id = {c.attacker_id: c for c in camouflage}
    denied = dos.active(t)
    out = []
    for i in range(N):
        y_ii = fdi.apply(i, i, outputs_at_t[i], t)
        acc = np.zeros_like(y_ii)
        if not denied:
            for j in range(N):
                a = topology.follower_adjacency[i, j]
                if a:
                    acc += a * (fdi.apply(i, j, outputs_at_t[j], t) - y_ii)
            for k in range(M):
                g = topology.pinning[i, k]
                if g:
                    acc += g * (fdi.apply(i, N + k, leader_outputs_at_t[k], t) - y_ii)
        for fol, att_id, w in topology.camouflage_edges:
            if fol == i and w:
                acc += w * (cam_by_id[att_id].signal(t) - y_ii)
        out.append(acc)
    return out
