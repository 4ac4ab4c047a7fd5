"""Deterministic simulation of multithreaded loop self-scheduling, plus
automated scheduling-algorithm selection over a 12-member portfolio."""

from .core import (
    ChunkAssignment,
    LoopRecord,
    SystemModel,
    Workload,
    cov,
    execution_imbalance,
    lib_percent,
)
from .schedulers import (
    ALL_KINDS,
    EXTRA_KINDS,
    PORTFOLIO,
    SchedulerKind,
    exp_chunk,
    kind_from_name,
    portfolio_index,
)
from .simulator import SimConfig, dump_chunk_trace, run_timesteps, simulate_loop
from .workloads import WorkloadSpec, build_workload, dump_workload, load_trace
from .selection import (
    ConstantProvider,
    ExhaustiveSel,
    ExpertSel,
    QTable,
    RLConfig,
    RLProvider,
    RandomSel,
    RewardTracker,
    dump_qtable,
    explore_first_sequence,
    load_qtable,
    oracle_select,
    qlearn_update,
    resolve_chunk_param,
    reward,
    sarsa_update,
)
from .experiments import Campaign, emit_selection_summary, parse_config, run_campaign

__version__ = "0.1.0"

__all__ = [
    "ChunkAssignment",
    "LoopRecord",
    "SystemModel",
    "Workload",
    "cov",
    "execution_imbalance",
    "lib_percent",
    "ALL_KINDS",
    "EXTRA_KINDS",
    "PORTFOLIO",
    "SchedulerKind",
    "exp_chunk",
    "kind_from_name",
    "portfolio_index",
    "SimConfig",
    "dump_chunk_trace",
    "run_timesteps",
    "simulate_loop",
    "WorkloadSpec",
    "build_workload",
    "dump_workload",
    "load_trace",
    "ConstantProvider",
    "ExhaustiveSel",
    "ExpertSel",
    "QTable",
    "RLConfig",
    "RLProvider",
    "RandomSel",
    "RewardTracker",
    "dump_qtable",
    "explore_first_sequence",
    "load_qtable",
    "oracle_select",
    "qlearn_update",
    "resolve_chunk_param",
    "reward",
    "sarsa_update",
    "Campaign",
    "emit_selection_summary",
    "parse_config",
    "run_campaign",
    "__version__",
]
