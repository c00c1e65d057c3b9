"""Declarative query plans: patterns, filters, projections.

A plan is an ordered list of vertex patterns joined in append order.
Plans round-trip through plain JSON documents, which is what the CLI
``query`` subcommand loads and what the REST filter grammar compiles to.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from provflow.exceptions import QueryError
from provflow.graph.kinds import default_registry

OPERATORS = ("==", "!=", "<", "<=", ">", ">=", "in", "like", "has_key", "of_type")

TYPE_NAMES = ("null", "bool", "int", "float", "str", "list", "dict")

RELATION_MODES = ("with_outgoing", "with_incoming", "with_ancestors", "with_descendants")

# relations where the two nodes are joined by one concrete link
EDGE_MODES = ("with_outgoing", "with_incoming")

_EDGE_PATHS = ("label", "type")


@dataclass(frozen=True)
class FilterExpr:
    """One ``path op value`` predicate over a node (or link) property."""

    path: str
    op: str
    value: object = None

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise QueryError(f"unknown filter operator {self.op!r}")
        if self.op == "in" and not isinstance(self.value, list):
            raise QueryError("'in' needs a list operand")
        if self.op == "like" and not isinstance(self.value, str):
            raise QueryError("'like' needs a string operand")
        if self.op == "has_key" and not isinstance(self.value, str):
            raise QueryError("'has_key' needs a string key")
        if self.op == "of_type" and self.value not in TYPE_NAMES:
            raise QueryError(f"'of_type' operand must be one of {TYPE_NAMES}")
        if not self.path:
            raise QueryError("empty filter path")

    def to_dict(self) -> dict:
        return {"path": self.path, "op": self.op, "value": self.value}

    @classmethod
    def from_dict(cls, doc: dict) -> "FilterExpr":
        try:
            return cls(doc["path"], doc["op"], doc.get("value"))
        except (TypeError, KeyError) as exc:
            raise QueryError(f"malformed filter {doc!r}") from exc


@dataclass(frozen=True)
class Relation:
    """How a pattern hangs off an earlier tag."""

    mode: str
    tag: str

    def __post_init__(self):
        if self.mode not in RELATION_MODES:
            raise QueryError(f"unknown relation mode {self.mode!r}")


@dataclass
class Pattern:
    tag: str
    kind: str
    filters: list[FilterExpr] = field(default_factory=list)
    relation: Optional[Relation] = None
    edge_filters: list[FilterExpr] = field(default_factory=list)
    project: list[str] = field(default_factory=list)


@dataclass
class QueryPlan:
    patterns: list[Pattern] = field(default_factory=list)

    def append(
        self,
        kind: str,
        tag: Optional[str] = None,
        filters: Optional[list] = None,
        edge_filters: Optional[list] = None,
        project: Optional[list[str]] = None,
        with_outgoing: Optional[str] = None,
        with_incoming: Optional[str] = None,
        with_ancestors: Optional[str] = None,
        with_descendants: Optional[str] = None,
    ) -> "QueryPlan":
        default_registry().require(kind)
        relations = [
            Relation(mode, ref)
            for mode, ref in (
                ("with_outgoing", with_outgoing),
                ("with_incoming", with_incoming),
                ("with_ancestors", with_ancestors),
                ("with_descendants", with_descendants),
            )
            if ref is not None
        ]
        if len(relations) > 1:
            raise QueryError("a pattern may join through at most one relation")
        relation = relations[0] if relations else None

        known = {p.tag for p in self.patterns}
        if relation and relation.tag not in known:
            raise QueryError(f"relation references unknown tag {relation.tag!r}")
        if tag is None:
            tag = self._auto_tag(kind, known)
        elif tag in known:
            raise QueryError(f"duplicate tag {tag!r}")

        filters = [f if isinstance(f, FilterExpr) else FilterExpr(**f) for f in filters or []]
        edge_filters = [
            f if isinstance(f, FilterExpr) else FilterExpr(**f) for f in edge_filters or []
        ]
        if edge_filters:
            if relation is None or relation.mode not in EDGE_MODES:
                raise QueryError("edge filters need a with_outgoing/with_incoming relation")
            for f in edge_filters:
                if f.path not in _EDGE_PATHS:
                    raise QueryError(f"edge filter path must be one of {_EDGE_PATHS}")

        self.patterns.append(
            Pattern(tag, kind, filters, relation, edge_filters, list(project or []))
        )
        return self

    @staticmethod
    def _auto_tag(kind: str, known: set) -> str:
        base = kind.split(".")[-1]
        if base not in known:
            return base
        i = 2
        while f"{base}_{i}" in known:
            i += 1
        return f"{base}_{i}"

    def projections(self) -> list[tuple[str, str]]:
        """(tag, path) pairs in row order; defaults to uuid per pattern."""
        explicit = [(p.tag, path) for p in self.patterns for path in p.project]
        if explicit:
            return explicit
        return [(p.tag, "uuid") for p in self.patterns]

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "patterns": [
                {
                    "tag": p.tag,
                    "kind": p.kind,
                    "filters": [f.to_dict() for f in p.filters],
                    "relation": (
                        {"mode": p.relation.mode, "tag": p.relation.tag}
                        if p.relation
                        else None
                    ),
                    "edge_filters": [f.to_dict() for f in p.edge_filters],
                    "project": list(p.project),
                }
                for p in self.patterns
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "QueryPlan":
        if not isinstance(doc, dict) or not isinstance(doc.get("patterns"), list):
            raise QueryError("plan document needs a 'patterns' list")
        plan = cls()
        for entry in doc["patterns"]:
            if not isinstance(entry, dict) or "kind" not in entry:
                raise QueryError(f"malformed pattern {entry!r}")
            relation = entry.get("relation") or {}
            kwargs = {}
            if relation:
                mode = relation.get("mode")
                if mode not in RELATION_MODES:
                    raise QueryError(f"unknown relation mode {mode!r}")
                kwargs[mode] = relation.get("tag")
            plan.append(
                entry["kind"],
                tag=entry.get("tag"),
                filters=[FilterExpr.from_dict(f) for f in entry.get("filters", [])],
                edge_filters=[
                    FilterExpr.from_dict(f) for f in entry.get("edge_filters", [])
                ],
                project=entry.get("project"),
                **kwargs,
            )
        return plan

    @classmethod
    def from_json(cls, text: str) -> "QueryPlan":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise QueryError(f"plan is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


# -- predicate evaluation (shared by builder and REST filters) -------------


def equal_values(a, b) -> bool:
    """Structural equality; int/float interchange, bools stay bools."""
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _both_numeric(a, b) -> bool:
    return (
        isinstance(a, (int, float))
        and isinstance(b, (int, float))
        and not isinstance(a, bool)
        and not isinstance(b, bool)
    )


def evaluate(op: str, value, operand) -> bool:
    """Apply one operator to a resolved property value.

    ``value`` is _MISSING when the path does not exist on the node; every
    operator treats that as no-match.
    """
    if value is _MISSING:
        return False
    if op == "==":
        return equal_values(value, operand)
    if op == "!=":
        return not equal_values(value, operand)
    if op in ("<", "<=", ">", ">="):
        if _both_numeric(value, operand) or (
            isinstance(value, str) and isinstance(operand, str)
        ):
            if op == "<":
                return value < operand
            if op == "<=":
                return value <= operand
            if op == ">":
                return value > operand
            return value >= operand
        return False
    if op == "in":
        return any(equal_values(value, item) for item in operand)
    if op == "like":
        if not isinstance(value, str):
            return False
        pattern = ".*".join(re.escape(part) for part in operand.split("%"))
        return re.fullmatch(pattern, value, flags=re.DOTALL) is not None
    if op == "has_key":
        return isinstance(value, dict) and operand in value
    if op == "of_type":
        return _TYPE_CHECKS[operand](value)
    raise QueryError(f"unknown operator {op!r}")


_TYPE_CHECKS = {
    "null": lambda v: v is None,
    "bool": lambda v: isinstance(v, bool),
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, float),
    "str": lambda v: isinstance(v, str),
    "list": lambda v: isinstance(v, list),
    "dict": lambda v: isinstance(v, dict),
}

_MISSING = object()


def resolve_path(record: dict, path: str):
    """Dotted property lookup on a node record; _MISSING when absent.

    Core fields (uuid, id, kind, label, description, ctime, mtime,
    computer, hash) resolve directly; anything under ``attributes.`` or
    ``extras.`` descends into the documents.
    """
    parts = path.split(".")
    current: object = record
    for part in parts:
        if isinstance(current, dict) and part in current:
            current = current[part]
        else:
            return _MISSING
    return current
