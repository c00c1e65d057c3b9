"""provflow: a provenance-first workflow engine.

Every executed process and every datum it consumes or produces becomes a
node in a validated, queryable directed graph, while an event-driven,
checkpointed, multi-worker engine runs calculations and workflows to
completion with at-least-once delivery, automatic error recovery and
content-hash caching.
"""

__version__ = "0.1.0"
