"""Foreground execution of processes.

``run_process`` drives a process to a terminal state in the calling
thread. Children submitted by work chains are executed synchronously,
so by the time a step ends its children are terminal and the chain
never actually parks. The queue-based engine reuses the same drivers
and outcome types but parks instead of recursing.
"""

from __future__ import annotations

import time
from typing import Optional

from provflow import states
from provflow.caching import CacheConfig, clone_outputs_from, find_cache_source
from provflow.engine.backoff import BackoffPolicy
from provflow.exceptions import OwnershipLostError
from provflow.graph.kinds import is_a
from .context import current_caller, use_store
from .factory import load_inputs, load_outputs, new_process_node
from .functions import execute_function_body
from .registry import ProcessDefinition, get_process
from .workchain import (
    Await,
    ChainDriver,
    Done,
    Paused,
    Wait,
    encode_checkpoint,
    log_step,
    CHECKPOINT_FORMAT,
)


def try_cache_hit(store, node, cache: CacheConfig, guard=None) -> bool:
    """Satisfy a calculation from an equivalent earlier run, if allowed.

    On a hit the outputs are cloned, the process jumps straight to
    finished and nothing is executed.
    """
    if not is_a(node.kind, "process.calculation"):
        return False
    process_id = node.attributes.get("process_id")
    if not cache.enabled(node.kind, process_id):
        return False
    source = find_cache_source(store, node.uuid)
    if source is None:
        return False
    with store.transaction():
        if guard is not None:
            guard(store, node.uuid)
        if not clone_outputs_from(store, source, node.uuid):
            return False
        states.record_state(store, node.uuid, states.RUNNING)
        states.record_state(store, node.uuid, states.FINISHED, exit_code=0)
    return True


def run_function_process(
    store, node, defn: ProcessDefinition, runtime, worker_id: str
) -> Done:
    """Execute a stored function process in one shot."""
    with store.transaction():
        runtime.guard(store, node.uuid)
        doc = {
            "format": CHECKPOINT_FORMAT,
            "flavor": defn.flavor,
            "process_id": defn.id,
            "stage": "run",
        }
        store.save_checkpoint(node.uuid, encode_checkpoint(doc))
        log_step(store, node.uuid, "run", worker_id)
    inputs = load_inputs(store, node.uuid)
    try:
        with use_store(store):
            execute_function_body(store, node, defn, inputs, guard=runtime.guard)
    except OwnershipLostError:
        raise
    except Exception:
        return Done(states.EXCEPTED)
    return Done(states.FINISHED, 0)


def make_driver(store, node, runtime, worker_id: str):
    """Driver instance for a chain or job process node."""
    defn = get_process(node.attributes["process_id"])
    if defn.flavor == "calcjob":
        from .calcjob import CalcJobDriver

        return CalcJobDriver(store, node, runtime, worker_id)
    return ChainDriver(store, node, runtime, worker_id)


class InlineRuntime:
    """Runs submitted children immediately, in the current thread."""

    def __init__(
        self,
        store,
        cache: Optional[CacheConfig] = None,
        sleep=time.sleep,
        backoff: Optional[BackoffPolicy] = None,
    ):
        self.store = store
        self.cache = cache or CacheConfig()
        self.sleep = sleep
        self.backoff = backoff or BackoffPolicy()

    def guard(self, store, uuid):
        """Ownership re-check hook; nothing contests a foreground run."""

    def submit_child(
        self, store, defn: ProcessDefinition, inputs, caller=None, computer=None
    ):
        node = new_process_node(
            store, defn, inputs, caller=caller, computer=computer
        )
        self.drive(store, node)
        return store.get(node.uuid)

    def drive(self, store, node) -> Done:
        defn = get_process(node.attributes["process_id"])
        if try_cache_hit(store, node, self.cache):
            return Done(states.FINISHED, 0)
        if defn.flavor in ("calcfunction", "workfunction"):
            return run_function_process(store, node, defn, self, "inline")
        driver = make_driver(store, node, self, "inline")
        while True:
            outcome = driver.tick()
            if isinstance(outcome, Done):
                return outcome
            if isinstance(outcome, Paused):
                # a foreground run has nowhere to park; surface it
                raise RuntimeError(
                    f"process {node.uuid} paused: {outcome.reason}"
                )
            if isinstance(outcome, Wait):
                self.sleep(outcome.delay)
            elif isinstance(outcome, Await):
                # inline children ran synchronously inside the step, so
                # an await that is not already resolved means a child was
                # created behind the runtime's back
                if not any(
                    states.is_terminal(states.state_of(store, u))
                    for u in outcome.children
                ):
                    raise RuntimeError(
                        "foreground run is waiting on children that never ran"
                    )


def run_process(store, ref, inputs: Optional[dict] = None, *, cache=None, computer=None, **kw):
    """Create and run a process to completion; returns (node, outputs).

    ``ref`` is a process id, a decorated function, or a chain class.
    Inputs can be passed as a dict or as keyword arguments. The process
    node is returned in its stored form; consult its extras for the
    final state and exit code.
    """
    defn = get_process(ref)
    merged = dict(inputs or {})
    merged.update(kw)
    runtime = InlineRuntime(store, cache=cache)
    node = runtime.submit_child(
        store, defn, merged, caller=current_caller(), computer=computer
    )
    return node, load_outputs(store, node.uuid)
