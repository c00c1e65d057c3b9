"""Typed, labeled edges and the structural rules they must obey.

Endpoint kinds are fixed per link type, create/call links carry
cardinality limits, input/output labels must be unique per process, and
the {INPUT_CALC, CREATE} subgraph must stay acyclic. ``validate_link``
checks a candidate against a graph view; the store wraps it in the same
transaction as the insert so the rules hold under concurrency.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol

from provflow.exceptions import NodeNotFoundError
from provflow.graph.kinds import default_registry

LABEL_RE = re.compile(r"^[a-z0-9_]{1,255}$")


class LinkType(str, enum.Enum):
    INPUT_CALC = "input_calc"
    INPUT_WORK = "input_work"
    CREATE = "create"
    RETURN = "return"
    CALL_CALC = "call_calc"
    CALL_WORK = "call_work"


# data provenance: how data came to be; cycles here are structurally impossible
DATA_PROVENANCE_TYPES = frozenset({LinkType.INPUT_CALC, LinkType.CREATE})

INPUT_TYPES = frozenset({LinkType.INPUT_CALC, LinkType.INPUT_WORK})
CALL_TYPES = frozenset({LinkType.CALL_CALC, LinkType.CALL_WORK})

# (source ancestor kind, target ancestor kind) per link type
_ENDPOINTS = {
    LinkType.INPUT_CALC: ("data", "process.calculation"),
    LinkType.INPUT_WORK: ("data", "process.workflow"),
    LinkType.CREATE: ("process.calculation", "data"),
    LinkType.RETURN: ("process.workflow", "data"),
    LinkType.CALL_CALC: ("process.workflow", "process.calculation"),
    LinkType.CALL_WORK: ("process.workflow", "process.workflow"),
}


@dataclass(frozen=True)
class Link:
    """Directed edge between two node uuids."""

    source: str
    target: str
    type: LinkType
    label: str

    def __post_init__(self):
        object.__setattr__(self, "type", LinkType(self.type))


@dataclass(frozen=True)
class LinkViolation:
    """Names the specific structural rule a candidate link breaks."""

    rule: str
    message: str


class GraphView(Protocol):
    """Read access the validators need; implemented by the store and by
    the in-memory graph."""

    def kind_of(self, uuid: str) -> Optional[str]: ...

    def links_from(self, uuid: str, types=None) -> Iterable[Link]: ...

    def links_to(self, uuid: str, types=None) -> Iterable[Link]: ...


def validate_link(view: GraphView, link: Link) -> Optional[LinkViolation]:
    """Check one candidate link against the current graph.

    Returns None when every rule holds, else the first violation found.
    Dangling endpoints raise NodeNotFoundError: that is a caller bug, not
    a rule violation.
    """
    source_kind = view.kind_of(link.source)
    if source_kind is None:
        raise NodeNotFoundError(link.source)
    target_kind = view.kind_of(link.target)
    if target_kind is None:
        raise NodeNotFoundError(link.target)

    if not LABEL_RE.match(link.label):
        return LinkViolation("label-syntax", f"bad link label {link.label!r}")

    registry = default_registry()
    want_source, want_target = _ENDPOINTS[link.type]
    if not registry.is_a(source_kind, want_source):
        return LinkViolation(
            "endpoint-kinds",
            f"{link.type.value} requires a {want_source} source, got {source_kind}",
        )
    if not registry.is_a(target_kind, want_target):
        return LinkViolation(
            "endpoint-kinds",
            f"{link.type.value} requires a {want_target} target, got {target_kind}",
        )

    incoming = list(view.links_to(link.target))
    outgoing = list(view.links_from(link.source))

    for existing in incoming:
        if (
            existing.source == link.source
            and existing.type == link.type
            and existing.label == link.label
        ):
            return LinkViolation("duplicate-link", "identical link already present")

    if link.type == LinkType.CREATE:
        if any(e.type == LinkType.CREATE for e in incoming):
            return LinkViolation(
                "creator-cardinality",
                f"data node {link.target} already has a creator",
            )
    if link.type in CALL_TYPES:
        if any(e.type in CALL_TYPES for e in incoming):
            return LinkViolation(
                "caller-cardinality",
                f"process {link.target} already has a caller",
            )

    if link.type in INPUT_TYPES:
        if any(e.type in INPUT_TYPES and e.label == link.label for e in incoming):
            return LinkViolation(
                "label-uniqueness",
                f"input label {link.label!r} already used on {link.target}",
            )
    if link.type in (LinkType.CREATE, LinkType.RETURN):
        if any(e.type == link.type and e.label == link.label for e in outgoing):
            return LinkViolation(
                "label-uniqueness",
                f"{link.type.value} label {link.label!r} already used by {link.source}",
            )

    if link.type in DATA_PROVENANCE_TYPES:
        if link.source == link.target or _reaches(view, link.target, link.source):
            return LinkViolation(
                "acyclicity",
                f"{link.source} -> {link.target} would close a data-provenance cycle",
            )
    return None


def _reaches(view: GraphView, start: str, goal: str) -> bool:
    """Path start => goal over {INPUT_CALC, CREATE} links?"""
    seen = {start}
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for link in view.links_from(node, types=DATA_PROVENANCE_TYPES):
            if link.target == goal:
                return True
            if link.target not in seen:
                seen.add(link.target)
                frontier.append(link.target)
    return False


def check_data_provenance_acyclic(view, nodes: Iterable[str]) -> Optional[list[str]]:
    """Scan the {INPUT_CALC, CREATE} subgraph for a cycle.

    Returns None when acyclic, else a concrete witness: the node uuids of
    one cycle in traversal order.
    """
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[str, int] = {}
    stack_path: list[str] = []

    def visit(node: str) -> Optional[list[str]]:
        color[node] = GRAY
        stack_path.append(node)
        for link in view.links_from(node, types=DATA_PROVENANCE_TYPES):
            child = link.target
            state = color.get(child, WHITE)
            if state == GRAY:
                return stack_path[stack_path.index(child) :] + [child]
            if state == WHITE:
                witness = visit(child)
                if witness:
                    return witness
        stack_path.pop()
        color[node] = BLACK
        return None

    for node in nodes:
        if color.get(node, WHITE) == WHITE:
            witness = visit(node)
            if witness:
                return witness
    return None
