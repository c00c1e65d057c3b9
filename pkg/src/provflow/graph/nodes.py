"""The Node vertex type.

A node is mutable while being assembled and freezes its content
(attributes + repository files) the moment it is stored; only extras stay
writable afterwards.
"""

from __future__ import annotations

import uuid as _uuid
from dataclasses import dataclass, field

from provflow.exceptions import ImmutableError
from provflow.graph.kinds import default_registry
from provflow.graph.values import validate_document


def new_uuid() -> str:
    """RFC 4122 version 4 identifier, canonical lowercase form."""
    return str(_uuid.uuid4())


@dataclass
class Node:
    """One vertex of the provenance graph.

    ``id`` and timestamps are assigned by the store; ``attributes`` and
    ``repo`` reject mutation once ``stored`` is set.
    """

    kind: str
    uuid: str = field(default_factory=new_uuid)
    id: int | None = None
    label: str = ""
    description: str = ""
    ctime: float | None = None
    mtime: float | None = None
    computer: str | None = None
    attributes: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    repo: dict[str, bytes] = field(default_factory=dict)
    # path -> content key, filled in for nodes loaded back from a store
    repo_keys: dict[str, str] = field(default_factory=dict)
    hash: str | None = None
    stored: bool = False

    def __post_init__(self):
        default_registry().require(self.kind)
        validate_document(self.attributes, "attributes")
        validate_document(self.extras, "extras")

    def set_attribute(self, key: str, value) -> None:
        self._check_mutable()
        validate_document({key: value}, "attributes")
        self.attributes[key] = value

    def put_file(self, path: str, content: bytes) -> None:
        self._check_mutable()
        if not isinstance(content, bytes):
            raise TypeError("repo content must be bytes")
        self.repo[path] = content

    def _check_mutable(self) -> None:
        if self.stored:
            raise ImmutableError(
                f"node {self.uuid} is stored; attributes and repo are frozen"
            )

    def __repr__(self):
        tag = self.uuid[:8]
        return f"<Node {self.kind} {tag} {'stored' if self.stored else 'unstored'}>"
