"""Desk-scale performance experiments with correctness checks built in."""

from provflow.bench.tc import (
    TreeGraphSpec,
    build_tree_graph,
    run_tc,
    time_strategy,
    verify_strategies,
)
from provflow.bench.throughput import (
    ThroughputSample,
    longest_plateau,
    run_engine_bench,
)

__all__ = [
    "ThroughputSample",
    "TreeGraphSpec",
    "build_tree_graph",
    "longest_plateau",
    "run_engine_bench",
    "run_tc",
    "time_strategy",
    "verify_strategies",
]
