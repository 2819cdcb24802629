import time
from pathlib import Path

import numpy as np
import pytest

from resilient_mas.config import load_config
from resilient_mas.sim import assemble, run

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
EXAMPLE1 = CONFIG_DIR / "example1.json"
EXAMPLE2 = CONFIG_DIR / "example2.json"


class RunResult:
    def __init__(self, loop, trace, wall):
        self.loop = loop
        self.trace = trace
        self.wall = wall


def _timed_run(path):
    cfg = load_config(str(path))
    loop = assemble(cfg)
    t0 = time.perf_counter()
    trace = run(cfg, loop)
    return RunResult(loop, trace, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def ex1_run():
    return _timed_run(EXAMPLE1)


@pytest.fixture(scope="session")
def ex2_run():
    return _timed_run(EXAMPLE2)


@pytest.fixture(scope="session")
def both_runs(ex1_run, ex2_run):
    return {"example1": ex1_run, "example2": ex2_run}


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def small_config_doc(horizon=1.0):
    """Minimal two-follower / one-leader experiment that runs in well under a
    second; used by CLI and loader tests."""
    follower = {
        "A": [[0.0, 1.0], [-1.0, -1.0]],
        "B": [[0.0], [1.0]],
        "C": [[1.0, 0.0]],
    }
    return {
        "version": "1",
        "topology": {
            "followers": 2,
            "leaders": 1,
            "edges": [[0, 1, 1.0]],
            "pinning": [[0, 0, 1.0]],
        },
        "leader": {
            "S": [[0.0, 1.0], [-1.0, 0.0]],
            "R": [[1.0, 0.0]],
            "x0": [[1.0, 0.0]],
        },
        "followers": [dict(follower, x0=[0.5, -0.2]),
                      dict(follower, x0=[-0.3, 0.1])],
        "gains": {"mu1": 4.0, "mu2": 1.0, "mu3": 10.0},
        "attacks": {
            "dos": {"intervals": [[0.2, 0.2]]},
            "dbar": 0.02,
            "actuation": [{"ramp": [0.01]}, None],
        },
        "sim": {"dt": 1e-3, "horizon": horizon, "stride": 10},
    }


def random_reachable_topology(rng, n_max=6, m_max=4):
    """Random weighted digraph guaranteed leader-reachable: a follower chain
    rooted at a pinned follower plus random extra edges."""
    from resilient_mas.topology import Topology

    N = int(rng.integers(2, n_max + 1))
    M = int(rng.integers(1, m_max + 1))
    adj = np.zeros((N, N))
    for i in range(1, N):
        adj[i, i - 1] = rng.uniform(0.5, 2.0)
    extra = rng.random((N, N)) < 0.3
    np.fill_diagonal(extra, False)
    adj = np.where(extra, rng.uniform(0.1, 2.0, (N, N)), adj)
    np.fill_diagonal(adj, 0.0)
    adj[1:, 0] = np.maximum(adj[1:, 0], 0.0)
    for i in range(1, N):
        if adj[i].sum() == 0:
            adj[i, i - 1] = 1.0
    pin = np.where(rng.random((N, M)) < 0.3, rng.uniform(0.1, 2.0, (N, M)), 0.0)
    pin[0, int(rng.integers(0, M))] = rng.uniform(0.5, 2.0)
    return Topology(n_followers=N, m_leaders=M, follower_adjacency=adj, pinning=pin)
