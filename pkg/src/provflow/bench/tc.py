"""Reachability timing: materialized index vs per-query traversal.

The workload is a forest of identical trees whose edges are
data-provenance links, queried for all descendants of a fixed number
of roots. Tree levels alternate data and calculation kinds so every
edge passes the link rules (data feeds a calculation, a calculation
creates data).

Both strategies are checked for set-equal answers before any timing
runs, so a reported number can never belong to a wrong result.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from provflow.exceptions import BenchError
from provflow.graph.links import LinkType
from provflow.graph.nodes import Node
from provflow.query.traverse import descendants_of
from provflow.store import Store

CSV_COLUMNS = ("N", "B", "D", "strategy", "seconds")


@dataclass(frozen=True)
class TreeGraphSpec:
    """A forest of ``n_trees`` trees, each vertex with ``breadth`` children
    down to ``depth`` levels below the root."""

    n_trees: int
    breadth: int = 2
    depth: int = 2

    def __post_init__(self):
        if self.n_trees < 1:
            raise BenchError("n_trees must be positive")
        if self.breadth not in (2, 4) or self.depth not in (2, 4):
            raise BenchError("breadth and depth must be 2 or 4")

    @property
    def nodes_per_tree(self) -> int:
        return sum(self.breadth**level for level in range(self.depth + 1))


def build_tree_graph(store: Store, spec: TreeGraphSpec) -> list[str]:
    """Populate ``store`` with the forest; returns the root uuids."""
    roots = []
    with store.transaction():
        for t in range(spec.n_trees):
            root = Node("data.int", label=f"tree{t}")
            store.store_node(root)
            roots.append(root.uuid)
            # (uuid, level); even levels hold data, odd ones calculations
            frontier = [(root.uuid, 0)]
            while frontier:
                parent, level = frontier.pop()
                if level == spec.depth:
                    continue
                child_is_calc = level % 2 == 0
                for i in range(spec.breadth):
                    if child_is_calc:
                        child = Node("process.calculation.calcfunction")
                        incoming = [(parent, LinkType.INPUT_CALC, "x")]
                    else:
                        child = Node("data.int")
                        incoming = [(parent, LinkType.CREATE, f"c{i}")]
                    store.store_node(child, incoming=incoming)
                    frontier.append((child.uuid, level + 1))
    return roots


def verify_strategies(store: Store, roots) -> None:
    """Both strategies must agree on every root before anything is timed."""
    for root in roots:
        otf = set(descendants_of(store, root, "otf"))
        table = set(descendants_of(store, root, "table"))
        if otf != table:
            raise BenchError(
                f"strategy mismatch on root {root}: "
                f"otf={len(otf)} table={len(table)} descendants"
            )


def time_strategy(store: Store, roots, strategy: str, reps: int = 5) -> float:
    """Median over ``reps`` of the total time to query every root."""
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        for root in roots:
            descendants_of(store, root, strategy)
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def run_tc(
    base_dir,
    spec: TreeGraphSpec,
    strategies=("otf", "table"),
    reps: int = 5,
    query_roots: int = 50,
    csv_path=None,
) -> list[dict]:
    """Build, verify, time; returns one result row per strategy.

    The store is built once in table mode, which serves both
    strategies: the traversal path never reads the index and the index
    path never walks links, so sharing a graph keeps the comparison on
    identical data.
    """
    workdir = Path(base_dir) / f"tc_n{spec.n_trees}_b{spec.breadth}_d{spec.depth}"
    store = Store(workdir, tc_mode="table")
    try:
        roots = build_tree_graph(store, spec)
        targets = roots[: min(query_roots, len(roots))]
        verify_strategies(store, targets)
        rows = []
        for strategy in strategies:
            seconds = time_strategy(store, targets, strategy, reps=reps)
            rows.append(
                {
                    "N": spec.n_trees,
                    "B": spec.breadth,
                    "D": spec.depth,
                    "strategy": strategy,
                    "seconds": seconds,
                }
            )
    finally:
        store.close()
    if csv_path is not None:
        append_csv(csv_path, rows)
    return rows


def append_csv(path, rows) -> None:
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if fresh:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)
