"""Execution targets for jobs: where files go and who runs the script.

A computer is a named bundle of configuration stored alongside the
graph, so every worker process sees the same settings. The simulated
setup still exercises the real machinery: files are staged through a
transport, scripts run under a scheduler, and status checks are rate
limited per computer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from provflow.exceptions import StoreError


@dataclass(frozen=True)
class Computer:
    name: str
    workdir: str
    transport: str = "local"
    scheduler: str = "sim"
    # seconds that must pass between two transport opens to this machine
    min_open_interval: float = 0.0
    # batched scheduler status checks are reused for this many seconds
    status_window: float = 10.0
    # how long a parked job waits before asking the scheduler again
    poll_interval: float = 0.2
    # simulated queueing/running time, shapes the reported job state
    queue_delay: float = 0.0
    run_delay: float = 0.0
    # path of a fault-injection counter file; see LocalTransport
    fault_flag: Optional[str] = None
    # skip the actual script run; jobs complete with rc 0 and no files
    no_execute: bool = False
    extra: dict = field(default_factory=dict)

    _FIELDS = (
        "workdir transport scheduler min_open_interval status_window "
        "poll_interval queue_delay run_delay fault_flag no_execute"
    ).split()

    def to_config(self) -> dict:
        doc = {name: getattr(self, name) for name in self._FIELDS}
        doc.update(self.extra)
        return doc

    @classmethod
    def from_config(cls, name: str, config: dict) -> "Computer":
        known = {k: v for k, v in config.items() if k in cls._FIELDS}
        extra = {k: v for k, v in config.items() if k not in cls._FIELDS}
        return cls(name=name, extra=extra, **known)


def register_computer(store, name: str, workdir: str, **config) -> Computer:
    computer = Computer.from_config(name, {"workdir": workdir, **config})
    with store.transaction():
        store.db.execute(
            "INSERT INTO computers (name, config) VALUES (?, ?) "
            "ON CONFLICT (name) DO UPDATE SET config = excluded.config",
            (name, json.dumps(computer.to_config(), sort_keys=True)),
        )
    return computer


def get_computer(store, name: str) -> Computer:
    row = store.db.execute(
        "SELECT config FROM computers WHERE name = ?", (name,)
    ).fetchone()
    if row is None:
        raise StoreError(f"computer {name!r} is not registered")
    return Computer.from_config(name, json.loads(row["config"]))


def list_computers(store) -> list[Computer]:
    rows = store.db.execute("SELECT name, config FROM computers ORDER BY name")
    return [Computer.from_config(r["name"], json.loads(r["config"])) for r in rows]
