"""Producer-side interface to the engine.

Everything here talks to the profile directly: submitting enqueues a
task, watching polls the recorded state, and steering a live process
either applies the change in place (nobody owns it) or posts a remote
call for the owning worker to pick up between steps.
"""

from __future__ import annotations

import time
from typing import Optional

from provflow import states
from provflow.engine import queue as taskq
from provflow.engine.config import load_config
from provflow.exceptions import RpcRejected, RpcUnreachable
from provflow.graph.links import LinkType

ACTIONS = ("pause", "play", "kill")

CALL_TYPES = {LinkType.CALL_CALC, LinkType.CALL_WORK}


def submit(store, ref, inputs: Optional[dict] = None, *, computer=None, **kw):
    """Create the process node and queue it; returns without running.

    Validation happens before anything is written, so a bad submission
    leaves neither a node nor a task behind.
    """
    # imported here: processes pulls in the engine for its own needs,
    # so a module-level import would be circular
    from provflow.processes.factory import new_process_node
    from provflow.processes.registry import get_process

    defn = get_process(ref)
    merged = dict(inputs or {})
    merged.update(kw)
    with store.transaction():
        node = new_process_node(store, defn, merged, computer=computer)
        taskq.enqueue(store, node.uuid)
    return store.get(node.uuid)


def wait_for(store, uuid: str, timeout: float = 60.0, poll: float = 0.05) -> str:
    """Block until the process reaches a terminal state; returns it."""
    deadline = time.time() + timeout
    while True:
        state = states.state_of(store, uuid)
        if states.is_terminal(state):
            return state
        if time.time() >= deadline:
            raise TimeoutError(
                f"process {uuid} still {state} after {timeout:.1f}s"
            )
        time.sleep(poll)


def action(store, uuid: str, act: str, timeout: Optional[float] = None,
           reason: Optional[str] = None) -> str:
    """Pause, play or kill a live process; returns the resulting state.

    When a worker owns the process the request goes through the rpc
    mailbox and this call waits for the answer; otherwise it is applied
    directly.
    """
    if act not in ACTIONS:
        raise ValueError(f"unknown action {act!r}")
    store.get(uuid)  # not-found propagates
    state = states.state_of(store, uuid)
    if states.is_terminal(state):
        raise RpcRejected(f"process is already terminal ({state})")

    if act == "play":
        # paused processes are never owned, so play is always direct
        if state != states.PAUSED:
            raise RpcRejected(f"only a paused process can be played ({state})")
        with store.transaction():
            states.record_state(store, uuid, states.RUNNING)
            taskq.resume_task(store, uuid)
        return states.RUNNING

    owner = taskq.owner_of(store, uuid)
    if owner is None:
        if act == "pause":
            with store.transaction():
                states.record_state(
                    store, uuid, states.PAUSED,
                    pause_reason=reason or "user request",
                )
                taskq.pause_task(store, uuid)
            return states.PAUSED
        kill_tree(store, uuid)
        return states.KILLED

    if timeout is None:
        timeout = load_config(store).rpc_timeout
    rpc_id = taskq.post_rpc(store, uuid, act, reason)
    deadline = time.time() + timeout
    while time.time() < deadline:
        reply = taskq.rpc_reply(store, rpc_id)
        if reply is not None:
            if not reply.get("ok"):
                raise RpcRejected(reply.get("error", "rejected"))
            return reply.get("state", states.state_of(store, uuid))
        # the worker may have raced the request: settle from the state
        current = states.state_of(store, uuid)
        if act == "kill" and current == states.KILLED:
            return current
        if act == "pause" and current == states.PAUSED:
            return current
        if states.is_terminal(current):
            raise RpcRejected(
                f"process reached {current} before the {act} was delivered"
            )
        time.sleep(0.02)
    raise RpcUnreachable(
        f"no worker answered the {act} call for {uuid} within {timeout:.1f}s"
    )


def kill_tree(store, uuid: str, own_worker: Optional[str] = None) -> None:
    """Finalize a process as killed and propagate through its calls.

    Children owned by other workers get a kill rpc instead of a direct
    write; their owner applies it between steps, which keeps the state
    machine free of mid-step races.
    """
    from provflow.processes.calcjob import kill_job

    state = states.state_of(store, uuid)
    if not states.is_terminal(state):
        node = store.get(uuid)
        with store.transaction():
            states.record_state(store, uuid, states.KILLED)
            row = taskq.task_row(store, uuid)
            if row is not None:
                taskq.ack_task(store, uuid, row["worker_id"] or "", "killed")
        kill_job(store, node)  # drops the scheduler job if one is live
    for link in store.links_from(uuid, types=CALL_TYPES):
        child = link.target
        if states.is_terminal(states.state_of(store, child)):
            continue
        owner = taskq.owner_of(store, child)
        if owner is None or owner == own_worker:
            kill_tree(store, child, own_worker)
        else:
            taskq.post_rpc(store, child, "kill")
