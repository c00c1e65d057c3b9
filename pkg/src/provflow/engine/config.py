"""Engine settings, persisted in the profile so every worker agrees.

The daemon writes the active configuration into the store's ``meta``
table at startup; workers launched later (or relaunched after a crash)
read it back instead of trusting their command line. Anything not set
falls back to the defaults below.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

META_KEY = "engine_config"

MODE_EVENT = "event"
MODE_POLLING = "polling"


@dataclass
class EngineConfig:
    # daemon-managed worker process count
    workers: int = 2
    # how many processes one worker will own at a time
    prefetch: int = 8
    heartbeat_interval: float = 5.0
    # a worker whose heartbeat is older than interval * allowance is
    # presumed dead and its tasks are requeued
    missed_heartbeats: int = 2
    tick_interval: float = 0.05
    mode: str = MODE_EVENT
    poll_interval: float = 5.0
    rpc_timeout: float = 10.0
    backoff_initial: float = 1.0
    backoff_multiplier: float = 2.0
    backoff_max_attempts: int = 5
    cache: dict = field(default_factory=dict)
    # imported by each worker at boot so registered processes resolve
    modules: list[str] = field(default_factory=lambda: ["provflow.processes.builtins"])

    @property
    def stale_after(self) -> float:
        return self.heartbeat_interval * self.missed_heartbeats

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in (doc or {}).items() if k in known})


def save_config(store, config: EngineConfig) -> None:
    store.db.execute(
        "INSERT INTO meta(key, value) VALUES (?, ?) "
        "ON CONFLICT(key) DO UPDATE SET value = excluded.value",
        (META_KEY, json.dumps(config.to_dict(), sort_keys=True)),
    )


def load_config(store) -> EngineConfig:
    row = store.db.execute(
        "SELECT value FROM meta WHERE key = ?", (META_KEY,)
    ).fetchone()
    if row is None:
        return EngineConfig()
    return EngineConfig.from_dict(json.loads(row["value"]))
