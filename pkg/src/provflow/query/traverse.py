"""Ancestor/descendant traversal over the data-provenance DAG.

Two interchangeable strategies answer the same question: ``otf`` walks
the {input_calc, create} links at query time with a recursive CTE,
``table`` reads the incrementally maintained reachability rows. Both
return every reachable node with its minimal hop count.
"""

from __future__ import annotations

from typing import Optional

from provflow.exceptions import NodeNotFoundError, QueryError
from provflow.store.store import Store

_DP_TYPES = "('input_calc','create')"


def descendants_of(
    store: Store, uuid: str, strategy: str = "otf", max_depth: Optional[int] = None
) -> dict[str, int]:
    return _traverse(store, uuid, strategy, max_depth, forward=True)


def ancestors_of(
    store: Store, uuid: str, strategy: str = "otf", max_depth: Optional[int] = None
) -> dict[str, int]:
    return _traverse(store, uuid, strategy, max_depth, forward=False)


def _traverse(store, uuid, strategy, max_depth, forward):
    if strategy not in ("otf", "table"):
        raise QueryError(f"unknown traversal strategy {strategy!r}")
    if not store.has(uuid):
        raise NodeNotFoundError(uuid)
    if max_depth is not None and max_depth < 1:
        return {}
    if strategy == "table":
        found = store.tc_descendants(uuid) if forward else store.tc_ancestors(uuid)
        if max_depth is not None:
            found = {n: d for n, d in found.items() if d <= max_depth}
        return found

    here, there = ("source", "target") if forward else ("target", "source")
    depth_cap = "" if max_depth is None else "AND walk.depth < :max_depth"
    rows = store.db.execute(
        f"""
        WITH RECURSIVE walk(node, depth) AS (
            SELECT :start, 0
            UNION
            SELECT links.{there}, walk.depth + 1
            FROM links JOIN walk ON links.{here} = walk.node
            WHERE links.type IN {_DP_TYPES} {depth_cap}
        )
        SELECT node, MIN(depth) AS depth FROM walk
        WHERE node != :start GROUP BY node
        """,
        {"start": uuid, "max_depth": max_depth},
    )
    return {r["node"]: r["depth"] for r in rows}
