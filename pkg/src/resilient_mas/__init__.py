"""Two-layer resilient output-containment control of heterogeneous multi-agent
systems under composite attacks (DoS, data injection, camouflage, actuation).

A secure twin layer runs distributed observers/estimators that only DoS can
touch; the cyber-physical layer tracks the twin layer with adaptive
compensation of unbounded actuation attacks.
"""

from .topology import Topology, GraphMatrices, build_graph_matrices  # noqa: F401
from .dynamics import LeaderModel, FollowerModel, care_solve, design_tl_gain  # noqa: F401
from .attacks import DosSchedule, ActuationAttack, FdiModel, CamouflageSource  # noqa: F401
from .sim import ClosedLoopConfig, FollowerSetup, assemble, run  # noqa: F401
from .config import load_config  # noqa: F401

__version__ = "0.1.0"
