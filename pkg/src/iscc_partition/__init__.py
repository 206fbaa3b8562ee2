"""Latency-optimal three-tier DNN partitioning for sensing-aware edge offloading.

Devices split a DNN between local execution, an edge server behind a
multi-antenna base station, and a cloud server. Uplink precoders must keep
a fixed transmit covariance that serves radar sensing; partitions are chosen
by a cross-entropy search and compared against exhaustive and restricted
baselines.
"""

from .baselines import SchemeId, run_ced_wdp, run_ed_dp, run_exhaustive, run_local_only
from .ce import CeParams, optimize
from .harness import RunOptions, SweepSpec, run_sweep, run_trial, run_trials
from .inner import Evaluator, InnerSolution, SolverOptions, solve_inner
from .profile import DnnProfile, PartitionPair, alexnet, load_profile
from .scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "SchemeId",
    "run_ced_wdp",
    "run_ed_dp",
    "run_exhaustive",
    "run_local_only",
    "CeParams",
    "optimize",
    "RunOptions",
    "SweepSpec",
    "run_sweep",
    "run_trial",
    "run_trials",
    "Evaluator",
    "InnerSolution",
    "SolverOptions",
    "solve_inner",
    "DnnProfile",
    "PartitionPair",
    "alexnet",
    "load_profile",
    "Scenario",
    "load_scenario",
]
