"""Ambient execution context for process code.

Process functions are plain calls like ``add(x, y)``; the store they
record into and the process that called them travel implicitly through
context variables, set by ``run_process``/the worker around each step.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Optional

from provflow.exceptions import SpecValidationError

_STORE: ContextVar[Optional[object]] = ContextVar("provflow_store", default=None)
# stack of (node uuid, node kind) of live processes, innermost last
_STACK: ContextVar[tuple] = ContextVar("provflow_process_stack", default=())


@contextmanager
def use_store(store):
    token = _STORE.set(store)
    try:
        yield store
    finally:
        _STORE.reset(token)


def ambient_store():
    return _STORE.get()


def require_store():
    store = _STORE.get()
    if store is None:
        raise SpecValidationError(
            "no active store; call through run_process or wrap in use_store(store)"
        )
    return store


@contextmanager
def push_process(uuid: str, kind: str):
    token = _STACK.set(_STACK.get() + ((uuid, kind),))
    try:
        yield
    finally:
        _STACK.reset(token)


def current_caller() -> Optional[tuple]:
    """(uuid, kind) of the innermost live process, if any."""
    stack = _STACK.get()
    return stack[-1] if stack else None
