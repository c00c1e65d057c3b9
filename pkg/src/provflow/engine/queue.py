"""Task queue, worker registry and mailbox, all inside the profile db.

Claiming runs under BEGIN IMMEDIATE so two workers can never take the
same task; every claim and release is mirrored into ``assignment_log``,
which makes double assignment provable (or, hopefully, disprovable)
after the fact. Workers never talk to each other directly: actions on a
process someone else owns go through the ``rpc`` table, and anything
noteworthy lands in ``events`` for the others to poll.
"""

from __future__ import annotations

import json
import time
from typing import Optional, Sequence

# task states
PENDING = "pending"
CLAIMED = "claimed"
PAUSED = "paused"


def enqueue(store, process_uuid: str) -> None:
    """Put a process on the queue; a no-op if it is already there."""
    with store.transaction():
        store.db.execute(
            "INSERT OR IGNORE INTO tasks (process_uuid, state, enqueue_time) "
            "VALUES (?, ?, ?)",
            (process_uuid, PENDING, time.time()),
        )
        record_event(store, process_uuid, "enqueued", None)


def claim_tasks(store, worker_id: str, limit: int) -> list[str]:
    """Atomically take up to ``limit`` pending tasks, oldest first."""
    if limit <= 0:
        return []
    now = time.time()
    with store.transaction(immediate=True):
        rows = store.db.execute(
            "SELECT id, process_uuid FROM tasks WHERE state = ? "
            "ORDER BY id LIMIT ?",
            (PENDING, limit),
        ).fetchall()
        for row in rows:
            store.db.execute(
                "UPDATE tasks SET state = ?, worker_id = ?, claim_time = ?, "
                "delivery_count = delivery_count + 1 WHERE id = ?",
                (CLAIMED, worker_id, now, row["id"]),
            )
            store.db.execute(
                "INSERT INTO assignment_log (process_uuid, worker_id, claimed) "
                "VALUES (?, ?, ?)",
                (row["process_uuid"], worker_id, now),
            )
    return [row["process_uuid"] for row in rows]


def owner_of(store, process_uuid: str) -> Optional[str]:
    row = store.db.execute(
        "SELECT worker_id FROM tasks WHERE process_uuid = ? AND state = ?",
        (process_uuid, CLAIMED),
    ).fetchone()
    return row["worker_id"] if row else None


def task_row(store, process_uuid: str):
    return store.db.execute(
        "SELECT * FROM tasks WHERE process_uuid = ?", (process_uuid,)
    ).fetchone()


def delivery_count(store, process_uuid: str) -> int:
    row = task_row(store, process_uuid)
    return row["delivery_count"] if row else 0


def _close_assignment(store, process_uuid: str, worker_id: str, outcome: str) -> None:
    store.db.execute(
        "UPDATE assignment_log SET released = ?, outcome = ? "
        "WHERE process_uuid = ? AND worker_id = ? AND released IS NULL",
        (time.time(), outcome, process_uuid, worker_id),
    )


def ack_task(store, process_uuid: str, worker_id: str, outcome: str) -> None:
    """Drop a finished task from the queue and close its assignment."""
    with store.transaction():
        store.db.execute(
            "DELETE FROM tasks WHERE process_uuid = ?", (process_uuid,)
        )
        _close_assignment(store, process_uuid, worker_id, outcome)


def release_task(store, process_uuid: str, worker_id: str) -> None:
    """Hand a claimed task back (graceful shutdown, lost interest)."""
    with store.transaction():
        store.db.execute(
            "UPDATE tasks SET state = ?, worker_id = NULL, claim_time = NULL "
            "WHERE process_uuid = ? AND worker_id = ?",
            (PENDING, process_uuid, worker_id),
        )
        _close_assignment(store, process_uuid, worker_id, "released")


def pause_task(store, process_uuid: str) -> None:
    """Park the task so no worker picks it up until play."""
    with store.transaction():
        row = task_row(store, process_uuid)
        worker = row["worker_id"] if row else None
        store.db.execute(
            "UPDATE tasks SET state = ?, worker_id = NULL, claim_time = NULL "
            "WHERE process_uuid = ?",
            (PAUSED, process_uuid),
        )
        if worker:
            _close_assignment(store, process_uuid, worker, "paused")


def resume_task(store, process_uuid: str) -> None:
    """Make a paused (or missing) task claimable again."""
    with store.transaction():
        updated = store.db.execute(
            "UPDATE tasks SET state = ? WHERE process_uuid = ? AND state = ?",
            (PENDING, process_uuid, PAUSED),
        ).rowcount
        if not updated:
            store.db.execute(
                "INSERT OR IGNORE INTO tasks (process_uuid, state, enqueue_time) "
                "VALUES (?, ?, ?)",
                (process_uuid, PENDING, time.time()),
            )
        record_event(store, process_uuid, "resumed", None)


def queue_stats(store) -> dict:
    rows = store.db.execute(
        "SELECT state, COUNT(*) AS n FROM tasks GROUP BY state"
    ).fetchall()
    stats = {PENDING: 0, CLAIMED: 0, PAUSED: 0}
    for row in rows:
        stats[row["state"]] = row["n"]
    return stats


# -- worker registry ----------------------------------------------------


def heartbeat(store, worker_id: str, pid: int) -> None:
    now = time.time()
    with store.transaction():
        store.db.execute(
            "INSERT INTO workers (worker_id, pid, started, last_heartbeat) "
            "VALUES (?, ?, ?, ?) ON CONFLICT(worker_id) DO UPDATE SET "
            "last_heartbeat = excluded.last_heartbeat",
            (worker_id, pid, now, now),
        )


def remove_worker(store, worker_id: str) -> None:
    store.db.execute("DELETE FROM workers WHERE worker_id = ?", (worker_id,))


def worker_rows(store) -> list:
    return store.db.execute(
        "SELECT * FROM workers ORDER BY worker_id"
    ).fetchall()


def _requeue_locked(store, worker_id: str, recovered: list) -> None:
    for row in store.db.execute(
        "SELECT process_uuid FROM tasks WHERE worker_id = ? AND state = ?",
        (worker_id, CLAIMED),
    ):
        recovered.append(row["process_uuid"])
        _close_assignment(store, row["process_uuid"], worker_id, "stale")
    store.db.execute(
        "UPDATE tasks SET state = ?, worker_id = NULL, claim_time = NULL "
        "WHERE worker_id = ? AND state = ?",
        (PENDING, worker_id, CLAIMED),
    )
    store.db.execute("DELETE FROM workers WHERE worker_id = ?", (worker_id,))


def requeue_worker(store, worker_id: str) -> list[str]:
    """Take everything back from one worker known to be gone."""
    recovered: list[str] = []
    with store.transaction(immediate=True):
        _requeue_locked(store, worker_id, recovered)
        for uuid in recovered:
            record_event(store, uuid, "requeued", None)
    return recovered


def requeue_stale(store, stale_after: float) -> list[str]:
    """Recover tasks stuck with workers that stopped heartbeating.

    Returns the process uuids that went back to pending. The delivery
    count is preserved, so redelivery stays visible to the consumer.
    """
    cutoff = time.time() - stale_after
    recovered: list[str] = []
    with store.transaction(immediate=True):
        dead = [
            row["worker_id"]
            for row in store.db.execute(
                "SELECT worker_id FROM workers WHERE last_heartbeat < ?",
                (cutoff,),
            )
        ]
        # tasks claimed by a worker that never registered (crashed before
        # the first heartbeat) count as stale too once old enough
        orphaned = [
            row["worker_id"]
            for row in store.db.execute(
                "SELECT DISTINCT worker_id FROM tasks WHERE state = ? "
                "AND claim_time < ? AND worker_id NOT IN "
                "(SELECT worker_id FROM workers)",
                (CLAIMED, cutoff),
            )
        ]
        for worker_id in dead + orphaned:
            _requeue_locked(store, worker_id, recovered)
        for uuid in recovered:
            record_event(store, uuid, "requeued", None)
    return recovered


def assignment_overlaps(store) -> list[tuple]:
    """Pairs of assignment rows for the same process that overlap in time.

    Exactly-once claiming means this must always come back empty; the
    crash tests assert exactly that.
    """
    rows = store.db.execute(
        "SELECT process_uuid, worker_id, claimed, released FROM assignment_log "
        "ORDER BY process_uuid, claimed"
    ).fetchall()
    overlaps = []
    by_process: dict[str, list] = {}
    for row in rows:
        by_process.setdefault(row["process_uuid"], []).append(row)
    for uuid, held in by_process.items():
        for first, second in zip(held, held[1:]):
            end = first["released"]
            if end is None or second["claimed"] < end:
                overlaps.append((uuid, first["worker_id"], second["worker_id"]))
    return overlaps


# -- rpc mailbox ----------------------------------------------------------

RPC_PENDING = "pending"
RPC_DONE = "done"


def post_rpc(store, target_uuid: str, action: str, argument=None) -> int:
    with store.transaction():
        cur = store.db.execute(
            "INSERT INTO rpc (target_uuid, action, argument, created, state) "
            "VALUES (?, ?, ?, ?, ?)",
            (
                target_uuid,
                action,
                json.dumps(argument) if argument is not None else None,
                time.time(),
                RPC_PENDING,
            ),
        )
        return cur.lastrowid


def pending_rpcs(store, target_uuids: Sequence[str]) -> list:
    if not target_uuids:
        return []
    marks = ",".join("?" for _ in target_uuids)
    return store.db.execute(
        f"SELECT * FROM rpc WHERE state = ? AND target_uuid IN ({marks}) "
        "ORDER BY id",
        (RPC_PENDING, *target_uuids),
    ).fetchall()


def answer_rpc(store, rpc_id: int, reply: dict) -> None:
    store.db.execute(
        "UPDATE rpc SET state = ?, reply = ? WHERE id = ?",
        (RPC_DONE, json.dumps(reply, sort_keys=True), rpc_id),
    )


def rpc_reply(store, rpc_id: int) -> Optional[dict]:
    row = store.db.execute(
        "SELECT state, reply FROM rpc WHERE id = ?", (rpc_id,)
    ).fetchone()
    if row is None or row["state"] != RPC_DONE:
        return None
    return json.loads(row["reply"]) if row["reply"] else {}


# -- broadcast events ------------------------------------------------------


def record_event(store, process_uuid: str, kind: str, payload) -> None:
    store.db.execute(
        "INSERT INTO events (process_uuid, kind, payload, time) VALUES (?,?,?,?)",
        (
            process_uuid,
            kind,
            json.dumps(payload, sort_keys=True) if payload is not None else None,
            time.time(),
        ),
    )


def last_event_seq(store) -> int:
    row = store.db.execute("SELECT MAX(seq) AS top FROM events").fetchone()
    return row["top"] or 0


def events_after(store, seq: int) -> list:
    return store.db.execute(
        "SELECT * FROM events WHERE seq > ? ORDER BY seq", (seq,)
    ).fetchall()
