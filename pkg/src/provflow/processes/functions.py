"""Decorators that turn plain functions into recorded processes.

A decorated function still behaves like the original: call it with data
nodes, get data nodes back. What changes is that every call stores a
process node, links the arguments as inputs and the results as outputs,
and tracks state so the call shows up in queries like any other run.

The two flavors differ in what they may hand back:

* a calculation function must create its outputs, so returning a node
  that is already stored is an error
* a workflow function only orchestrates, so it must return nodes that
  already exist (typically produced by calculations it called)
"""

from __future__ import annotations

import functools
import traceback
from typing import Optional

from provflow import states
from provflow.exceptions import OwnershipLostError, SpecValidationError
from provflow.graph.links import Link
from provflow.graph.nodes import Node
from .context import current_caller, push_process, require_store
from .factory import create_process_node, output_link_type
from .registry import ProcessDefinition, function_definition


def normalize_outputs(result) -> dict:
    """Map a function's return value onto labeled outputs.

    A bare node becomes {"result": node}; a dict is taken as-is; None
    means no outputs. Anything else is a usage error.
    """
    if result is None:
        return {}
    if isinstance(result, Node):
        return {"result": result}
    if isinstance(result, dict):
        for key, value in result.items():
            if not isinstance(value, Node):
                raise SpecValidationError(
                    f"output {key!r} is {type(value).__name__}, expected a node"
                )
        return dict(result)
    raise SpecValidationError(
        f"process function returned {type(result).__name__}; "
        "expected a node, a dict of nodes, or None"
    )


class ProcessFunction:
    """Callable wrapper produced by calcfunction/workfunction."""

    def __init__(self, fn, definition: ProcessDefinition):
        self._fn = fn
        self._definition = definition
        self._process_definition = definition  # registry lookup hook
        functools.update_wrapper(self, fn)

    @property
    def definition(self) -> ProcessDefinition:
        return self._definition

    def __call__(self, *args, **kwargs):
        store = require_store()
        inputs = self._bind(args, kwargs)
        node = create_process_node(
            store, self._definition, inputs, caller=current_caller()
        )
        outputs = execute_function_body(store, node, self._definition, inputs)
        return self._reshape(outputs)

    def run(self, store, *args, **kwargs):
        """Like calling directly, but with an explicit store."""
        from .context import use_store

        with use_store(store):
            return self(*args, **kwargs)

    def _bind(self, args, kwargs) -> dict:
        names = list(self._definition.spec.inputs)
        if len(args) > len(names):
            raise SpecValidationError(
                f"{self._definition.id}: takes at most {len(names)} "
                f"positional arguments ({len(args)} given)"
            )
        inputs = {}
        for name, value in zip(names, args):
            inputs[name] = value
        for name, value in kwargs.items():
            if name in inputs:
                raise SpecValidationError(
                    f"{self._definition.id}: duplicate argument {name!r}"
                )
            inputs[name] = value
        return inputs

    def _reshape(self, outputs: dict):
        if not outputs:
            return None
        if set(outputs) == {"result"}:
            return outputs["result"]
        return outputs


def execute_function_body(store, node, defn: ProcessDefinition, inputs, guard=None) -> dict:
    """Run a function process that already has its node stored.

    Used both for direct calls and when a worker picks the process up
    from the queue. Raises whatever the body raised after recording the
    failed state, so direct callers see the original error. ``guard`` is
    re-checked inside every transaction that advances the process; when
    it raises the process belongs to someone else and is left untouched.
    """
    with store.transaction():
        if guard is not None:
            guard(store, node.uuid)
        states.record_state(store, node.uuid, states.RUNNING)
    try:
        with push_process(node.uuid, node.kind):
            result = defn.target(**inputs)
        outputs = normalize_outputs(result)
        with store.transaction():
            if guard is not None:
                guard(store, node.uuid)
            store_function_outputs(store, node, defn, outputs)
            states.record_state(store, node.uuid, states.FINISHED, exit_code=0)
    except OwnershipLostError:
        raise
    except Exception as exc:
        message = "".join(
            traceback.format_exception_only(type(exc), exc)
        ).strip()
        with store.transaction():
            if guard is not None:
                guard(store, node.uuid)
            states.record_state(
                store, node.uuid, states.EXCEPTED, exception=message
            )
        raise
    return outputs


def store_function_outputs(store, node, defn: ProcessDefinition, outputs: dict):
    link_type = output_link_type(node.kind)
    creates = link_type.value == "create"
    with store.transaction():
        for name, value in outputs.items():
            defn.spec.check_output(name, value)
            if creates:
                if value.id is not None:
                    raise SpecValidationError(
                        f"{defn.id}: output {name!r} is already stored; "
                        "a calculation must create new data"
                    )
                store.store_node(value, incoming=[(node.uuid, link_type, name)])
            else:
                if value.id is None:
                    raise SpecValidationError(
                        f"{defn.id}: output {name!r} is not stored; "
                        "a workflow may only return existing data"
                    )
                store.insert_link(Link(node.uuid, value.uuid, link_type, name))
        missing = defn.spec.missing_outputs(outputs)
        if missing:
            raise SpecValidationError(
                f"{defn.id}: required outputs not produced: {sorted(missing)}"
            )


def calcfunction(id: Optional[str] = None, spec=None):
    """Record calls of the decorated function as calculations."""

    def wrap(fn):
        defn = function_definition(fn, "calcfunction", id=id, spec=spec)
        return ProcessFunction(fn, defn)

    return wrap


def workfunction(id: Optional[str] = None, spec=None):
    """Record calls of the decorated function as workflows."""

    def wrap(fn):
        defn = function_definition(fn, "workfunction", id=id, spec=spec)
        return ProcessFunction(fn, defn)

    return wrap
