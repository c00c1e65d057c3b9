"""Evaluate query plans against a store.

Matching is a nested-loop join in append order over id-sorted candidate
lists, which yields deterministic row order for free. Embeddings are
homomorphic: two patterns may bind the same stored node. Each run takes
one read snapshot.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterator, Optional

from provflow.query.plan import (
    _MISSING,
    EDGE_MODES,
    FilterExpr,
    Pattern,
    QueryPlan,
    evaluate,
    resolve_path,
)
from provflow.query.traverse import ancestors_of, descendants_of


class QueryBuilder:
    """Fluent front end: ``append`` patterns, then ``all`` or ``count``."""

    def __init__(self, store, plan: Optional[QueryPlan] = None):
        self.store = store
        self.plan = plan or QueryPlan()

    def append(self, kind: str, **kwargs) -> "QueryBuilder":
        self.plan.append(kind, **kwargs)
        return self

    def all(self) -> list[tuple]:
        with self.store.transaction(immediate=False):
            projections = self.plan.projections()
            tag_index = {p.tag: i for i, p in enumerate(self.plan.patterns)}
            rows = []
            for bound in self._embeddings():
                row = []
                for tag, path in projections:
                    value = resolve_path(bound[tag_index[tag]], path)
                    row.append(None if value is _MISSING else value)
                rows.append(tuple(row))
            return rows

    def count(self) -> int:
        with self.store.transaction(immediate=False):
            return sum(1 for _ in self._embeddings())

    def first(self) -> Optional[tuple]:
        rows = self.all()
        return rows[0] if rows else None

    # -- evaluation ------------------------------------------------------

    def _embeddings(self) -> Iterator[list[dict]]:
        patterns = self.plan.patterns
        if not patterns:
            return
        candidates = [self._candidates(p) for p in patterns]
        out_adj, in_adj = self._adjacency()
        tag_index = {p.tag: i for i, p in enumerate(patterns)}
        reach_cache: dict[tuple[str, bool], dict] = {}

        def reach(uuid: str, forward: bool) -> dict:
            key = (uuid, forward)
            if key not in reach_cache:
                fn = descendants_of if forward else ancestors_of
                reach_cache[key] = fn(self.store, uuid, strategy="otf")
            return reach_cache[key]

        def admits(pattern: Pattern, record: dict, bound: list[dict]) -> bool:
            rel = pattern.relation
            if rel is None:
                return True
            other = bound[tag_index[rel.tag]]
            if rel.mode in EDGE_MODES:
                if rel.mode == "with_outgoing":
                    edges = [
                        l for l in out_adj[record["uuid"]] if l.target == other["uuid"]
                    ]
                else:
                    edges = [
                        l for l in in_adj[record["uuid"]] if l.source == other["uuid"]
                    ]
                return any(
                    all(self._edge_passes(f, link) for f in pattern.edge_filters)
                    for link in edges
                )
            if rel.mode == "with_ancestors":
                return other["uuid"] in reach(record["uuid"], forward=False)
            return other["uuid"] in reach(record["uuid"], forward=True)

        def extend(k: int, bound: list[dict]) -> Iterator[list[dict]]:
            if k == len(patterns):
                yield bound
                return
            pattern = patterns[k]
            for record in candidates[k]:
                if admits(pattern, record, bound):
                    yield from extend(k + 1, bound + [record])

        yield from extend(0, [])

    def _candidates(self, pattern: Pattern) -> list[dict]:
        records = self.store.node_records(kind_prefix=pattern.kind)
        return [
            r
            for r in records
            if all(evaluate(f.op, resolve_path(r, f.path), f.value) for f in pattern.filters)
        ]

    def _adjacency(self):
        out_adj = defaultdict(list)
        in_adj = defaultdict(list)
        for link in self.store.all_links():
            out_adj[link.source].append(link)
            in_adj[link.target].append(link)
        return out_adj, in_adj

    @staticmethod
    def _edge_passes(f: FilterExpr, link) -> bool:
        value = link.label if f.path == "label" else link.type.value
        return evaluate(f.op, value, f.value)
