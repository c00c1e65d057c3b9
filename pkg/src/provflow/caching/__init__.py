"""Content hashing and reuse of previously computed results."""

from provflow.caching.cache import (
    CacheConfig,
    clone_outputs_from,
    compute_hash,
    find_cache_source,
)
from provflow.caching.hashing import (
    DEFAULT_EXCLUDED_ATTR_KEYS,
    compute_node_hash,
    excluded_attr_keys_for,
)

__all__ = [
    "CacheConfig",
    "DEFAULT_EXCLUDED_ATTR_KEYS",
    "clone_outputs_from",
    "compute_hash",
    "compute_node_hash",
    "excluded_attr_keys_for",
    "find_cache_source",
]
