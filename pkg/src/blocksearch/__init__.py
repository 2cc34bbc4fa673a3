"""Q-learning structure search over multi-block CNN architectures."""

__version__ = "0.1.0"

from .catalog import GAP, SM, catalog, format_code, parse_code
from .space import (
    Trajectory,
    decode_net,
    encode_net,
    enumerate_all,
    initial_state,
    legal_actions,
)
from .qlearn import (
    EpsilonSchedule,
    LearningParams,
    QTable,
    ReplayEntry,
    ReplayMemory,
    greedy_trajectory,
    q_update,
    replay_update,
    sample_trajectory,
)
from .graph import ArchitectureGraph, build, count_params, export_graph, summarize
from .reward import SimulatedOracleConfig, external_evaluate, oracle_evaluate
from .harness import SearchConfig, SearchLog, resume, run_search

__all__ = [
    "GAP",
    "SM",
    "catalog",
    "format_code",
    "parse_code",
    "Trajectory",
    "decode_net",
    "encode_net",
    "enumerate_all",
    "initial_state",
    "legal_actions",
    "EpsilonSchedule",
    "LearningParams",
    "QTable",
    "ReplayEntry",
    "ReplayMemory",
    "greedy_trajectory",
    "q_update",
    "replay_update",
    "sample_trajectory",
    "ArchitectureGraph",
    "build",
    "count_params",
    "export_graph",
    "summarize",
    "SimulatedOracleConfig",
    "external_evaluate",
    "oracle_evaluate",
    "SearchConfig",
    "SearchLog",
    "resume",
    "run_search",
]
