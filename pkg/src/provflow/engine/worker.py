"""Queue consumer: one OS process that claims tasks and drives them.

The heart of a worker is a single-threaded scheduler loop. Every tick it
drains the communication mailbox, reads the broadcast feed, handles
remote calls aimed at processes it owns, tops up its claim up to the
prefetch limit, then advances runnable processes by one step each.
Advances are budgeted per tick and rotate through the owned set, so a
freshly claimed backlog cannot monopolize the loop and newly woken
processes get served within a bounded number of ticks. Processes
waiting on children or on a timer are parked and cost nothing until an
event (or the clock) wakes them.

A separate communication thread keeps heartbeats ticking, but it never
touches the store itself; it only schedules the write onto the loop via
the mailbox. All store access happens on the loop thread.

In polling mode the worker talks to the queue (claims, events, remote
calls) only at fixed wall-clock multiples of the poll interval, which
reproduces the latency profile of a poll-based engine without changing
anything else.

Run one with ``python -m provflow.engine.worker PROFILE WORKER_ID``.
"""

from __future__ import annotations

import importlib
import json
import os
import queue as _threadq
import signal
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from provflow import states
from provflow.caching import CacheConfig
from provflow.engine import queue as taskq
from provflow.engine.backoff import BackoffPolicy
from provflow.engine.config import EngineConfig, MODE_POLLING, load_config
from provflow.exceptions import OwnershipLostError, RpcRejected
from provflow.processes.factory import new_process_node
from provflow.processes.registry import get_process
from provflow.processes.runtime import (
    make_driver,
    run_function_process,
    try_cache_hit,
)
from provflow.store import Store

# ceiling on process advances per tick; keeps the loop responsive to
# events and fresh claims even right after adopting a large backlog
ADVANCE_BATCH = 16


class WorkerRuntime:
    """Runtime handed to drivers when running under a worker.

    Children are enqueued instead of executed in place, so a step that
    submits ends with the parent parked. The ownership guard makes every
    process-advancing transaction abort if the task has been requeued to
    another worker in the meantime; that is what keeps a worker that
    stalled (and was presumed dead) from corrupting work someone else
    already picked up.
    """

    def __init__(self, store, worker_id: str, cache: CacheConfig,
                 backoff: BackoffPolicy, sleep=time.sleep):
        self.store = store
        self.worker_id = worker_id
        self.cache = cache
        self.backoff = backoff
        self.sleep = sleep

    def guard(self, store, uuid: str) -> None:
        if taskq.owner_of(store, uuid) != self.worker_id:
            raise OwnershipLostError(
                f"process {uuid} is no longer assigned to {self.worker_id}"
            )

    def submit_child(self, store, defn, inputs, caller=None, computer=None):
        node = new_process_node(
            store, defn, inputs, caller=caller, computer=computer
        )
        # nested in the parent's step transaction: if the step rolls
        # back, the child and its task vanish with it
        taskq.enqueue(store, node.uuid)
        return store.get(node.uuid)


@dataclass
class _Owned:
    defn: object
    driver: Optional[object]            # None for one-shot function processes
    awaiting: set = field(default_factory=set)
    wake_at: Optional[float] = None

    def runnable(self, now: float) -> bool:
        if self.awaiting:
            return False
        return self.wake_at is None or now >= self.wake_at


class Worker:
    def __init__(self, profile, worker_id: str, config: Optional[EngineConfig] = None):
        self.store = Store(profile)
        self.worker_id = worker_id
        self.config = config or load_config(self.store)
        self.runtime = WorkerRuntime(
            self.store,
            worker_id,
            CacheConfig.from_dict(self.config.cache),
            BackoffPolicy(
                initial=self.config.backoff_initial,
                multiplier=self.config.backoff_multiplier,
                max_attempts=self.config.backoff_max_attempts,
            ),
        )
        self.owned: dict[str, _Owned] = {}
        self.cursor = taskq.last_event_seq(self.store)
        self.mailbox: _threadq.Queue = _threadq.Queue()
        self._stop = threading.Event()
        self._next_poll = 0.0
        self._rotate = 0

    # -- lifecycle -------------------------------------------------------

    def run(self) -> None:
        for module in self.config.modules:
            importlib.import_module(module)
        taskq.heartbeat(self.store, self.worker_id, os.getpid())
        beat = threading.Thread(target=self._comm_loop, daemon=True)
        beat.start()
        try:
            while not self._stop.is_set():
                self._tick()
                self._stop.wait(self.config.tick_interval)
        finally:
            self._shutdown()

    def stop(self, *_signal_args) -> None:
        self._stop.set()

    def _shutdown(self) -> None:
        """Hand everything back so another worker can continue."""
        for uuid in list(self.owned):
            taskq.release_task(self.store, uuid, self.worker_id)
        self.owned.clear()
        with self.store.transaction():
            taskq.remove_worker(self.store, self.worker_id)
        self.store.close()

    def _comm_loop(self) -> None:
        # communication lane: never touches the store, only schedules
        # the heartbeat write onto the main loop
        while not self._stop.wait(self.config.heartbeat_interval):
            self.mailbox.put(
                lambda: taskq.heartbeat(self.store, self.worker_id, os.getpid())
            )

    # -- one scheduler tick ------------------------------------------------

    def _tick(self) -> None:
        while True:
            try:
                job = self.mailbox.get_nowait()
            except _threadq.Empty:
                break
            job()
        if self._broker_due():
            self._absorb_events()
            self._handle_rpcs()
            self._claim()
        now = time.time()
        order = list(self.owned)
        if not order:
            return
        pivot = self._rotate % len(order)
        self._rotate += 1
        budget = ADVANCE_BATCH
        for uuid in order[pivot:] + order[:pivot]:
            if budget <= 0:
                break
            entry = self.owned.get(uuid)
            if entry is not None and entry.runnable(now):
                self._advance(uuid, entry)
                budget -= 1

    def _broker_due(self) -> bool:
        if self.config.mode != MODE_POLLING:
            return True
        now = time.time()
        if now < self._next_poll:
            return False
        interval = self.config.poll_interval
        self._next_poll = (int(now / interval) + 1) * interval
        return True

    def _absorb_events(self) -> None:
        rows = taskq.events_after(self.store, self.cursor)
        if not rows:
            return
        self.cursor = rows[-1]["seq"]
        finished = set()
        for row in rows:
            if row["kind"] != "state" or not row["payload"]:
                continue
            if states.is_terminal(json.loads(row["payload"]).get("new", "")):
                finished.add(row["process_uuid"])
        for entry in self.owned.values():
            entry.awaiting -= finished

    def _claim(self) -> None:
        room = self.config.prefetch - len(self.owned)
        if room <= 0:
            return
        for uuid in taskq.claim_tasks(self.store, self.worker_id, room):
            self._adopt(uuid)

    def _adopt(self, uuid: str) -> None:
        node = self.store.get(uuid)
        state = states.state_of(self.store, uuid)
        if states.is_terminal(state):
            # e.g. killed while still queued
            taskq.ack_task(self.store, uuid, self.worker_id, state)
            return
        defn = get_process(node.attributes["process_id"])
        if state == states.CREATED:
            try:
                if try_cache_hit(self.store, node, self.runtime.cache,
                                 guard=self.runtime.guard):
                    taskq.ack_task(self.store, uuid, self.worker_id, "finished")
                    return
            except OwnershipLostError:
                return
        if defn.flavor in ("calcfunction", "workfunction"):
            self.owned[uuid] = _Owned(defn, None)
        else:
            driver = make_driver(self.store, node, self.runtime, self.worker_id)
            self.owned[uuid] = _Owned(defn, driver)

    def _advance(self, uuid: str, entry: _Owned) -> None:
        from provflow.processes.workchain import Await, Done, Paused, Wait

        entry.wake_at = None
        try:
            if entry.driver is None:
                node = self.store.get(uuid)
                outcome = run_function_process(
                    self.store, node, entry.defn, self.runtime, self.worker_id
                )
            else:
                outcome = entry.driver.tick()
        except OwnershipLostError:
            # requeued from under us; the new owner resumes from the
            # checkpoint, nothing here was committed
            self.owned.pop(uuid, None)
            return
        except Exception as exc:
            self._quarantine(uuid, exc)
            return
        if isinstance(outcome, Done):
            self.owned.pop(uuid, None)
            taskq.ack_task(self.store, uuid, self.worker_id, outcome.state)
        elif isinstance(outcome, Paused):
            self.owned.pop(uuid, None)
            taskq.pause_task(self.store, uuid)
        elif isinstance(outcome, Wait):
            entry.wake_at = time.time() + outcome.delay
        elif isinstance(outcome, Await):
            # subscribe first, then re-check: a child may have finished
            # on another worker before we parked
            entry.awaiting = set(outcome.children)
            entry.awaiting = {
                child
                for child in entry.awaiting
                if not states.is_terminal(states.state_of(self.store, child))
            }
        # anything else (Continue) simply stays runnable

    def _quarantine(self, uuid: str, exc: Exception) -> None:
        """Last-resort handling for a driver that raised instead of
        recording; keeps one broken process from wedging the worker."""
        self.owned.pop(uuid, None)
        state = states.state_of(self.store, uuid)
        if not states.is_terminal(state):
            try:
                states.record_state(
                    self.store, uuid, states.EXCEPTED, exception=str(exc)
                )
                state = states.EXCEPTED
            except Exception:
                state = states.state_of(self.store, uuid)
        taskq.ack_task(self.store, uuid, self.worker_id, state)

    # -- remote calls -------------------------------------------------------

    def _handle_rpcs(self) -> None:
        rows = taskq.pending_rpcs(self.store, list(self.owned))
        for row in rows:
            uuid = row["target_uuid"]
            argument = json.loads(row["argument"]) if row["argument"] else None
            try:
                if row["action"] == "pause":
                    reply = self._do_pause(uuid, argument)
                elif row["action"] == "kill":
                    reply = self._do_kill(uuid)
                else:
                    reply = {"ok": False, "error": f"unknown action {row['action']!r}"}
            except RpcRejected as exc:
                reply = {"ok": False, "error": exc.reason}
            with self.store.transaction():
                taskq.answer_rpc(self.store, row["id"], reply)

    def _do_pause(self, uuid: str, argument) -> dict:
        state = states.state_of(self.store, uuid)
        if states.is_terminal(state):
            raise RpcRejected(f"process is already terminal ({state})")
        reason = argument or "user request"
        with self.store.transaction():
            self.runtime.guard(self.store, uuid)
            states.record_state(
                self.store, uuid, states.PAUSED, pause_reason=reason
            )
            taskq.pause_task(self.store, uuid)
        self.owned.pop(uuid, None)
        return {"ok": True, "state": states.PAUSED}

    def _do_kill(self, uuid: str) -> dict:
        from provflow.engine.client import kill_tree

        state = states.state_of(self.store, uuid)
        if states.is_terminal(state):
            raise RpcRejected(f"process is already terminal ({state})")
        self.owned.pop(uuid, None)
        kill_tree(self.store, uuid, own_worker=self.worker_id)
        return {"ok": True, "state": states.KILLED}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m provflow.engine.worker PROFILE WORKER_ID",
              file=sys.stderr)
        return 2
    worker = Worker(argv[0], argv[1])
    signal.signal(signal.SIGTERM, worker.stop)
    signal.signal(signal.SIGINT, worker.stop)
    worker.run()
    return 0


if __name__ == "__main__":
    sys.exit(main())
