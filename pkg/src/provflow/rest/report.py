"""Process report assembly, shared by the HTTP endpoint and the CLI."""

from __future__ import annotations

import json

from provflow import states
from provflow.exceptions import CheckpointNotFoundError, NodeNotFoundError
from provflow.rest import models
from provflow.store import Store


def build_report(store: Store, uuid: str) -> models.ProcessReport:
    """Everything recorded about one process, in one document.

    Combines the state flag and exit code from the node's extras with
    the event trail (state changes, retry attempts), the step log, and
    the latest checkpoint version. Raises NodeNotFoundError when the
    uuid is unknown or does not belong to a process node.
    """
    rec = store.node_record(uuid)
    if not rec["kind"].startswith("process"):
        raise NodeNotFoundError(f"{uuid} is not a process node")
    extras = rec["extras"]
    history, retries = [], []
    rows = store.db.execute(
        "SELECT kind, payload, time FROM events"
        " WHERE process_uuid=? ORDER BY seq",
        (uuid,),
    ).fetchall()
    for row in rows:
        payload = json.loads(row["payload"]) if row["payload"] else {}
        if row["kind"] == "state":
            history.append(
                models.StateChange(
                    old=payload.get("old"),
                    new=payload.get("new", ""),
                    exit_code=payload.get("exit_code"),
                    time=row["time"],
                )
            )
        elif row["kind"] == "retry":
            retries.append(
                models.RetryRecord(
                    attempt=payload.get("attempt", 0),
                    delay=payload.get("delay", 0.0),
                    error=payload.get("error", ""),
                    time=row["time"],
                )
            )
    steps = [
        models.StepRecord(
            step=row["step"], worker_id=row["worker_id"], time=row["time"]
        )
        for row in store.db.execute(
            "SELECT step, worker_id, time FROM steplog"
            " WHERE process_uuid=? ORDER BY id",
            (uuid,),
        )
    ]
    try:
        version, _ = store.load_checkpoint(uuid)
    except CheckpointNotFoundError:
        version = None
    return models.ProcessReport(
        uuid=uuid,
        kind=rec["kind"],
        state=extras.get(states.K_STATE, states.CREATED),
        exit_code=extras.get(states.K_EXIT),
        exception=extras.get(states.K_EXCEPTION),
        pause_reason=extras.get(states.K_PAUSE_REASON),
        retries=extras.get(states.K_RETRIES, 0),
        retry_log=retries,
        history=history,
        steps=steps,
        checkpoint_version=version,
    )
