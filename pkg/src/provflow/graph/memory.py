"""In-memory graph view: the reference surface for validation rules.

Handy for assembling fixtures and for property tests that do not need
persistence; the store enforces exactly the same rules transactionally.
"""

from __future__ import annotations

from collections import defaultdict

from provflow.exceptions import LinkViolationError, NodeNotFoundError
from provflow.graph.links import Link, LinkType, validate_link


class MemoryGraph:
    def __init__(self):
        self._kinds: dict[str, str] = {}
        self._out: dict[str, list[Link]] = defaultdict(list)
        self._in: dict[str, list[Link]] = defaultdict(list)
        self.links: list[Link] = []

    def add_node(self, uuid: str, kind: str) -> str:
        self._kinds[uuid] = kind
        return uuid

    def kind_of(self, uuid: str):
        return self._kinds.get(uuid)

    def nodes(self):
        return list(self._kinds)

    def links_from(self, uuid: str, types=None):
        links = self._out.get(uuid, ())
        if types is None:
            return list(links)
        return [l for l in links if l.type in types]

    def links_to(self, uuid: str, types=None):
        links = self._in.get(uuid, ())
        if types is None:
            return list(links)
        return [l for l in links if l.type in types]

    def add_link(self, source: str, target: str, type: LinkType, label: str) -> Link:
        """Validate-then-insert; raises LinkViolationError on any broken rule."""
        link = Link(source, target, LinkType(type), label)
        violation = validate_link(self, link)
        if violation:
            raise LinkViolationError(violation.rule, violation.message)
        self._insert(link)
        return link

    def add_link_unchecked(self, source, target, type, label) -> Link:
        """Insert without validation: for building deliberately broken graphs."""
        if source not in self._kinds:
            raise NodeNotFoundError(source)
        if target not in self._kinds:
            raise NodeNotFoundError(target)
        link = Link(source, target, LinkType(type), label)
        self._insert(link)
        return link

    def _insert(self, link: Link) -> None:
        self._out[link.source].append(link)
        self._in[link.target].append(link)
        self.links.append(link)
