"""Durable task queue, workers, daemon, and fault handling."""

from provflow.engine.backoff import BackoffPolicy, with_backoff
from provflow.engine.client import action, kill_tree, submit, wait_for
from provflow.engine.config import EngineConfig, load_config, save_config
from provflow.engine.daemon import (
    Daemon,
    daemon_scale,
    daemon_status,
    daemon_stop,
    start_detached,
)
from provflow.engine.worker import Worker, WorkerRuntime

__all__ = [
    "BackoffPolicy",
    "Daemon",
    "EngineConfig",
    "Worker",
    "WorkerRuntime",
    "action",
    "daemon_scale",
    "daemon_status",
    "daemon_stop",
    "kill_tree",
    "load_config",
    "save_config",
    "start_detached",
    "submit",
    "wait_for",
    "with_backoff",
]
