"""JSON experiment-config loading and validation.

The config format is versioned ("version": "1"); errors carry the offending
field path so the CLI can print actionable diagnostics.
"""

from __future__ import annotations

import json

import numpy as np

from .attacks import ActuationAttack, CamouflageSource, DosSchedule, FdiModel
from .dynamics import FollowerModel, LeaderModel
from .sim import ClosedLoopConfig, FollowerSetup
from .topology import Topology


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


def _need(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return doc[key]


def _matrix(doc, field: str) -> np.ndarray:
    try:
        arr = np.array(doc, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field, f"not a numeric array: {exc}") from exc
    if arr.ndim not in (1, 2):
        raise ConfigError(field, f"expected vector or matrix, got ndim={arr.ndim}")
    return arr


def _topology(doc: dict, cam_edges) -> Topology:
    N = int(_need(doc, "followers", "topology"))
    M = int(_need(doc, "leaders", "topology"))
    adj = np.zeros((N, N))
    for idx, edge in enumerate(doc.get("edges", [])):
        src, dst, w = edge
        if not (0 <= src < N and 0 <= dst < N):
            raise ConfigError(f"topology.edges[{idx}]", f"follower index out of range: {edge}")
        adj[int(dst), int(src)] = float(w)
    pin = np.zeros((N, M))
    for idx, edge in enumerate(doc.get("pinning", [])):
        lead, fol, w = edge
        if not (0 <= lead < M and 0 <= fol < N):
            raise ConfigError(f"topology.pinning[{idx}]", f"index out of range: {edge}")
        pin[int(fol), int(lead)] = float(w)
    for idx, edge in enumerate(doc.get("camouflage", [])):
        att, fol, w = edge
        cam_edges.append((int(fol), int(att), float(w)))
    return Topology(n_followers=N, m_leaders=M, follower_adjacency=adj,
                    pinning=pin, camouflage_edges=tuple(cam_edges))


def _dos(doc, horizon: float) -> DosSchedule:
    if doc is None:
        return DosSchedule()
    if "periodic" in doc:
        p = doc["periodic"]
        return DosSchedule.periodic(float(_need(p, "period", "attacks.dos.periodic")),
                                    float(_need(p, "start_offset", "attacks.dos.periodic")),
                                    float(_need(p, "duration", "attacks.dos.periodic")),
                                    horizon)
    if "intervals" in doc:
        return DosSchedule(tuple((float(t), float(d)) for t, d in doc["intervals"]))
    raise ConfigError("attacks.dos", "expected 'periodic' or 'intervals'")


def _actuation(entry, dbar_default: float) -> ActuationAttack:
    if entry is None:
        return ActuationAttack()
    dbar = float(entry.get("dbar", dbar_default))
    if "ramp" in entry:
        return ActuationAttack(kind="ramp", rate=_matrix(entry["ramp"], "attacks.actuation.ramp"),
                               dbar=dbar)
    if "table" in entry:
        tab = entry["table"]
        return ActuationAttack(kind="table",
                               times=_matrix(tab["times"], "attacks.actuation.table.times"),
                               values=_matrix(tab["values"], "attacks.actuation.table.values"),
                               dbar=dbar)
    return ActuationAttack()


def load_config(path: str) -> ClosedLoopConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("(document)", f"malformed JSON at line {exc.lineno}: {exc.msg}")
    except OSError as exc:
        raise ConfigError("(document)", str(exc))

    if str(doc.get("version")) != "1":
        raise ConfigError("version", f"unsupported config version {doc.get('version')!r}")

    sim_doc = doc.get("sim", {})
    dt = float(sim_doc.get("dt", 1e-3))
    horizon = float(sim_doc.get("horizon", 30.0))
    stride = int(sim_doc.get("stride", 10))

    attacks_doc = doc.get("attacks", {})
    cam_edges: list = []
    camouflage = []
    for idx, cam in enumerate(attacks_doc.get("camouflage", [])):
        att_id = int(cam.get("attacker_id", 1000 + idx))
        sig = cam.get("signal", {})
        camouflage.append(CamouflageSource(
            attacker_id=att_id,
            amplitude=_matrix(_need(sig, "amplitude", f"attacks.camouflage[{idx}].signal"),
                              f"attacks.camouflage[{idx}].signal.amplitude"),
            frequency=float(sig.get("frequency", 0.25)),
            phase=float(sig.get("phase", 0.0))))
        cam_edges.append((int(_need(cam, "target", f"attacks.camouflage[{idx}]")),
                          att_id, float(cam.get("weight", 1.0))))

    topology = _topology(_need(doc, "topology", ""), cam_edges)

    lead_doc = _need(doc, "leader", "")
    leader = LeaderModel(S=_matrix(_need(lead_doc, "S", "leader"), "leader.S"),
                         R=_matrix(_need(lead_doc, "R", "leader"), "leader.R"))
    leader_x0 = _matrix(_need(lead_doc, "x0", "leader"), "leader.x0")

    dbar = float(attacks_doc.get("dbar", 0.0))
    act_docs = attacks_doc.get("actuation", [None] * topology.n_followers)
    if len(act_docs) != topology.n_followers:
        raise ConfigError("attacks.actuation", "one entry per follower required")

    followers = []
    for i, fdoc in enumerate(_need(doc, "followers", "")):
        where = f"followers[{i}]"
        fm = FollowerModel(A=_matrix(_need(fdoc, "A", where), f"{where}.A"),
                           B=_matrix(_need(fdoc, "B", where), f"{where}.B"),
                           C=_matrix(_need(fdoc, "C", where), f"{where}.C"))
        followers.append(FollowerSetup(
            model=fm,
            x0=_matrix(_need(fdoc, "x0", where), f"{where}.x0"),
            Q_weight=None if "Q" not in fdoc else _matrix(fdoc["Q"], f"{where}.Q"),
            R_weight=None if "Rw" not in fdoc else _matrix(fdoc["Rw"], f"{where}.Rw"),
            K_override=None if "K" not in fdoc else _matrix(fdoc["K"], f"{where}.K"),
            attack=_actuation(act_docs[i], dbar)))

    gains = _need(doc, "gains", "")
    fdi_entries = tuple(
        (int(f["to"]), int(f["from"]), f.get("kind", "identity"), f.get("params"))
        for f in attacks_doc.get("fdi", []))

    return ClosedLoopConfig(
        topology=topology,
        leader=leader,
        leader_x0=leader_x0,
        followers=followers,
        mu1=float(_need(gains, "mu1", "gains")),
        mu2=float(_need(gains, "mu2", "gains")),
        mu3=float(_need(gains, "mu3", "gains")),
        dos=_dos(attacks_doc.get("dos"), horizon),
        fdi=FdiModel(fdi_entries),
        camouflage=tuple(camouflage),
        alpha1_tilde=float(gains.get("alpha1_tilde", 1.0)),
        k1=float(gains.get("k1", 0.01)),
        adapt_omega=float(gains.get("omega", 0.01)),
        dbar=dbar,
        dt=dt, horizon=horizon, stride=stride,
        preconverge_regulator=bool(sim_doc.get("preconverge_regulator", False)))
