"""Node/link taxonomy of the provenance graph and its structural rules."""

from provflow.graph.kinds import (
    DEFAULT_KINDS,
    KindRegistry,
    default_registry,
    is_a,
    register_kind,
)
from provflow.graph.links import (
    DATA_PROVENANCE_TYPES,
    Link,
    LinkType,
    LinkViolation,
    check_data_provenance_acyclic,
    validate_link,
)
from provflow.graph.memory import MemoryGraph
from provflow.graph.nodes import Node, new_uuid
from provflow.graph.values import canonical_json, validate_document, validate_value

__all__ = [
    "DEFAULT_KINDS",
    "DATA_PROVENANCE_TYPES",
    "KindRegistry",
    "Link",
    "LinkType",
    "LinkViolation",
    "MemoryGraph",
    "Node",
    "canonical_json",
    "check_data_provenance_acyclic",
    "default_registry",
    "is_a",
    "new_uuid",
    "register_kind",
    "validate_document",
    "validate_link",
    "validate_value",
]
