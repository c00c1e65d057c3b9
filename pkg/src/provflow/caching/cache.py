"""Reuse of finished calculations by content hash.

A calculation about to run can instead adopt the outputs of an earlier
calculation with the same hash: the outputs are duplicated under fresh
uuids, CREATE-linked from the new calculation, and the reused source is
recorded in the new node's extras. The resulting graph is shaped exactly
as if the calculation had executed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from typing import Optional

from provflow.caching.hashing import compute_node_hash
from provflow.exceptions import StoreError
from provflow.graph.kinds import default_registry
from provflow.graph.links import Link, LinkType
from provflow.graph.nodes import Node
from provflow.states import FINISHED, K_CACHE_SOURCE, K_EXIT, K_STATE


@dataclass
class CacheConfig:
    """On/off switch plus per-process glob overrides.

    Globs are matched against both the node kind path and the registered
    process identifier; ``disabled_for`` beats ``enabled_for`` beats
    ``default``.
    """

    default: bool = False
    enabled_for: list[str] = field(default_factory=list)
    disabled_for: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "CacheConfig":
        doc = doc or {}
        raw = doc.get("default", False)
        default = raw if isinstance(raw, bool) else str(raw).lower() in ("on", "true", "1")
        return cls(
            default=default,
            enabled_for=list(doc.get("enabled_for", [])),
            disabled_for=list(doc.get("disabled_for", [])),
        )

    def enabled(self, kind: str, process_id: Optional[str] = None) -> bool:
        names = [kind] + ([process_id] if process_id else [])
        if any(fnmatchcase(n, g) for n in names for g in self.disabled_for):
            return False
        if any(fnmatchcase(n, g) for n in names for g in self.enabled_for):
            return True
        return self.default


def compute_hash(store, ref) -> str:
    """Recompute a stored node's content hash from persisted state.

    The result equals the hash stamped at store time whenever the node's
    input set has not grown since.
    """
    node = ref if isinstance(ref, Node) else store.get(ref)
    if not node.stored:
        raise StoreError("hash is defined over frozen content; store the node first")
    inputs = []
    for link in store.links_to(node.uuid, types={LinkType.INPUT_CALC}):
        source_hash = store.get(link.source).hash
        if source_hash:
            inputs.append((link.label, source_hash))
    return compute_node_hash(
        node.kind, node.attributes, node.repo_keys, inputs, store.hash_policy
    )


def find_cache_source(store, uuid: str, config: Optional[CacheConfig] = None) -> Optional[str]:
    """Earliest finished(0) calculation sharing the node's hash.

    ``config=None`` means the caller already decided caching applies.
    Excepted, killed, or nonzero-exit candidates never qualify.
    """
    node = store.get(uuid)
    if not default_registry().is_a(node.kind, "process.calculation"):
        return None
    if config is not None and not config.enabled(node.kind, node.attributes.get("process_id")):
        return None
    if not node.hash:
        return None
    rows = store.db.execute(
        "SELECT uuid, extras FROM nodes WHERE hash=? AND uuid != ? ORDER BY id",
        (node.hash, uuid),
    ).fetchall()
    for row in rows:
        extras = store.get_extras(row["uuid"])
        if extras.get(K_STATE) == FINISHED and extras.get(K_EXIT) == 0:
            return row["uuid"]
    return None


def clone_outputs_from(store, source_uuid: str, target_uuid: str) -> bool:
    """Duplicate the source's outputs onto the target calculation.

    Returns False (cache aborted, caller should execute normally) when
    the source has no outputs; otherwise the target gains one CREATE
    link per source output, same labels, content-identical nodes under
    fresh uuids, and extras noting where the results came from.
    """
    outputs = store.links_from(source_uuid, types={LinkType.CREATE})
    if not outputs:
        return False
    with store.transaction():
        for link in outputs:
            clone = store.duplicate_node(link.target)
            store.insert_link(Link(target_uuid, clone.uuid, LinkType.CREATE, link.label))
        store.set_extra(target_uuid, K_CACHE_SOURCE, source_uuid)
    return True
