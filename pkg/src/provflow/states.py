"""Process lifecycle states, the legal transition relation, and the
reserved extras keys where runtime state lives.

A process node's attributes are frozen at store time, so everything
that changes while the process runs (state, exit code, retry counters)
is kept in reserved extras keys. They are ordinary extras: queryable,
mutable, excluded from content hashes by construction.
"""

from __future__ import annotations

import json
import time

from provflow.exceptions import ProvFlowError

CREATED = "created"
RUNNING = "running"
WAITING = "waiting"
PAUSED = "paused"
FINISHED = "finished"
EXCEPTED = "excepted"
KILLED = "killed"

TERMINAL = frozenset({FINISHED, EXCEPTED, KILLED})

# created->killed and paused->killed are permitted so an operator can
# always get rid of a process that never started or is parked; excepted
# is reachable from every live state because failure does not wait for
# a convenient moment (a step that rolls back leaves the process in its
# pre-step state, and the crash must still be recordable)
TRANSITIONS = {
    CREATED: {RUNNING, PAUSED, EXCEPTED, KILLED},
    RUNNING: {WAITING, PAUSED, FINISHED, EXCEPTED, KILLED},
    WAITING: {RUNNING, PAUSED, FINISHED, EXCEPTED, KILLED},
    PAUSED: {RUNNING, WAITING, EXCEPTED, KILLED},
    FINISHED: set(),
    EXCEPTED: set(),
    KILLED: set(),
}

# reserved extras keys
K_STATE = "_state"
K_EXIT = "_exit_code"
K_EXCEPTION = "_exception"
K_RETRIES = "_retries"
K_PAUSE_REASON = "_pause_reason"
K_CACHE_SOURCE = "_cache_source"


class IllegalTransition(ProvFlowError):
    def __init__(self, uuid: str, old: str, new: str):
        self.old, self.new = old, new
        super().__init__(f"process {uuid}: no transition {old} -> {new}")


def state_of(store, uuid: str) -> str:
    return store.get_extras(uuid).get(K_STATE, CREATED)


def is_terminal(state: str) -> bool:
    return state in TERMINAL


def exit_code_of(store, uuid: str):
    return store.get_extras(uuid).get(K_EXIT)


def record_state(
    store,
    uuid: str,
    new: str,
    exit_code=None,
    exception=None,
    pause_reason=None,
) -> str:
    """Transition a process and append the matching broadcast event.

    Validates against the transition relation inside the same
    transaction that writes the extras, so concurrent writers cannot
    race a process out of a terminal state. Returns the previous state.
    """
    with store.transaction():
        old = state_of(store, uuid)
        if old == new:
            return old
        if new not in TRANSITIONS[old]:
            raise IllegalTransition(uuid, old, new)
        store.set_extra(uuid, K_STATE, new)
        if exit_code is not None:
            store.set_extra(uuid, K_EXIT, exit_code)
        if exception is not None:
            store.set_extra(uuid, K_EXCEPTION, str(exception))
        if pause_reason is not None:
            store.set_extra(uuid, K_PAUSE_REASON, pause_reason)
        elif new != PAUSED:
            store.delete_extra(uuid, K_PAUSE_REASON)
        payload = {"old": old, "new": new}
        if exit_code is not None:
            payload["exit_code"] = exit_code
        store.db.execute(
            "INSERT INTO events (process_uuid, kind, payload, time) VALUES (?,?,?,?)",
            (uuid, "state", json.dumps(payload, sort_keys=True), time.time()),
        )
        return old


def mark_created(store, uuid: str) -> None:
    """Stamp a fresh process node; emits the initial event."""
    with store.transaction():
        store.set_extra(uuid, K_STATE, CREATED)
        store.db.execute(
            "INSERT INTO events (process_uuid, kind, payload, time) VALUES (?,?,?,?)",
            (uuid, "state", json.dumps({"old": None, "new": CREATED}), time.time()),
        )
