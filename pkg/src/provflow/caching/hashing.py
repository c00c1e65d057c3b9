"""Content hash of a node.

The hash covers what determines a computation's outcome: the node kind,
its attributes (minus keys excluded by policy), the repository files, and
for calculation nodes the labeled hashes of their inputs. Identity and
bookkeeping fields (uuid, numeric id, timestamps, extras, computer name)
stay out, so re-running the same calculation on a different day or
machine yields the same hash.
"""

from __future__ import annotations

import hashlib
from fnmatch import fnmatchcase
from typing import Iterable, Mapping

from provflow.graph.kinds import default_registry
from provflow.graph.values import canonical_json

# policy maps a kind glob to attribute keys left out of the hash
DEFAULT_EXCLUDED_ATTR_KEYS: dict[str, list[str]] = {"process.*": ["_version"]}

_DIGEST_SIZE = 32


def excluded_attr_keys_for(kind: str, policy: Mapping[str, list[str]] | None) -> set[str]:
    if policy is None:
        policy = DEFAULT_EXCLUDED_ATTR_KEYS
    keys: set[str] = set()
    for pattern, names in policy.items():
        if fnmatchcase(kind, pattern):
            keys.update(names)
    return keys


def compute_node_hash(
    kind: str,
    attributes: Mapping,
    repo_digests: Mapping[str, str],
    input_hashes: Iterable[tuple[str, str]] = (),
    policy: Mapping[str, list[str]] | None = None,
) -> str:
    """BLAKE2b-256 over the node's canonical content.

    ``repo_digests`` maps repository path to the sha256 of the file
    content; ``input_hashes`` is (link label, source node hash) pairs and
    only contributes for calculation kinds.
    """
    excluded = excluded_attr_keys_for(kind, policy)
    payload = {
        "kind": kind,
        "attributes": {k: v for k, v in attributes.items() if k not in excluded},
        "repo": dict(repo_digests),
    }
    if default_registry().is_a(kind, "process.calculation"):
        payload["inputs"] = sorted([label, h] for label, h in input_hashes)
    blob = canonical_json(payload).encode("utf-8")
    return hashlib.blake2b(blob, digest_size=_DIGEST_SIZE).hexdigest()


def sha256_hex(content: bytes) -> str:
    return hashlib.sha256(content).hexdigest()
