"""Resumable multi-step workflows.

A work chain declares its control flow as an outline of steps, loops and
branches. Execution advances one step at a time; after every step the
position, the context and any children being waited on are written to a
checkpoint inside the same transaction as the step's graph effects.
Whoever picks the process up later (the same runner or a different
worker after a crash) resumes from that checkpoint, so each step's
effects land exactly once even though the step code may run again after
a rollback.

The position ("pc") is a path of indices into the outline: one index
per plain block level, and for branches an extra element selecting the
arm. Loop predicates are re-evaluated whenever the path climbs back out
of the loop body, which is what makes a While actually loop.
"""

from __future__ import annotations

import json
import time
import traceback
from dataclasses import dataclass
from typing import Optional

from provflow import states
from provflow.exceptions import (
    CheckpointError,
    CheckpointNotFoundError,
    OwnershipLostError,
    SpecValidationError,
)
from provflow.graph.links import Link, LinkType
from provflow.graph.nodes import Node
from .context import push_process, use_store
from .factory import load_inputs, load_outputs
from .registry import ProcessDefinition, get_process
from .spec import If, Step, While

CHECKPOINT_FORMAT = 1

MARK_NODE = "$node"
MARK_MAP = "$map"


# ---------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class Continue:
    """The step finished and the next one can run immediately."""


@dataclass(frozen=True)
class Await:
    """Parked until the listed child processes reach a terminal state."""

    children: tuple


@dataclass(frozen=True)
class Wait:
    """Nothing to do until roughly ``delay`` seconds from now."""

    delay: float


@dataclass(frozen=True)
class Done:
    """The process reached a terminal state."""

    state: str
    exit_code: Optional[int] = None


@dataclass(frozen=True)
class Paused:
    """Suspended (retries exhausted or an operator asked); resumable."""

    reason: str


# ------------------------------------------------------- outline navigation


def instruction_at(block: tuple, pc: list):
    head, rest = pc[0], pc[1:]
    instr = block[head]
    if not rest:
        return instr
    if isinstance(instr, While):
        return instruction_at(instr.body, rest)
    if isinstance(instr, If):
        arm = instr.then if rest[0] == 0 else instr.orelse
        return instruction_at(arm, rest[1:])
    raise CheckpointError(f"position {pc} does not match the outline")


def successor(block: tuple, pc: list) -> Optional[list]:
    """Position after the instruction at ``pc``; None when the block ends.

    Climbing out of a While body lands back on the While itself so the
    predicate is tested again; climbing out of an If arm completes the
    whole If.
    """
    head, rest = pc[0], pc[1:]
    instr = block[head]
    if rest:
        if isinstance(instr, While):
            sub = successor(instr.body, rest)
            if sub is not None:
                return [head] + sub
            return [head]
        if isinstance(instr, If):
            arm = instr.then if rest[0] == 0 else instr.orelse
            sub = successor(arm, rest[1:])
            if sub is not None:
                return [head, rest[0]] + sub
            # arm exhausted: the If as a whole is complete, fall through
        else:
            raise CheckpointError(f"position {pc} does not match the outline")
    if head + 1 < len(block):
        return [head + 1]
    return None


def route(block: tuple, pc: Optional[list], test) -> Optional[list]:
    """Resolve a position to the next runnable step.

    ``test(name)`` evaluates a predicate method by name. While the
    position sits on a While or If, descend into the chosen arm (or
    advance past it); stop as soon as it points at a plain step. None
    means the outline is complete.
    """
    while pc is not None:
        instr = instruction_at(block, pc)
        if isinstance(instr, Step):
            return pc
        if isinstance(instr, While):
            if test(instr.predicate):
                pc = pc + [0]
            else:
                pc = successor(block, pc)
        else:
            if test(instr.predicate):
                pc = pc + [0, 0]
            elif instr.orelse:
                pc = pc + [1, 0]
            else:
                pc = successor(block, pc)
    return None


# ---------------------------------------------------------------- context


class Context:
    """Attribute-style bag for per-run state; values must checkpoint."""

    def __init__(self, values: Optional[dict] = None):
        object.__setattr__(self, "_values", dict(values or {}))

    def __getattr__(self, name):
        try:
            return self._values[name]
        except KeyError:
            raise AttributeError(f"no context value {name!r}") from None

    def __setattr__(self, name, value):
        self._values[name] = value

    def __delattr__(self, name):
        self._values.pop(name, None)

    def __contains__(self, name):
        return name in self._values

    def get(self, name, default=None):
        return self._values.get(name, default)

    def as_dict(self) -> dict:
        return dict(self._values)


def encode_value(value, store=None):
    if isinstance(value, Node):
        if value.id is None:
            raise CheckpointError("context holds an unstored node")
        return {MARK_NODE: value.uuid}
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [encode_value(v) for v in value]
    if isinstance(value, dict):
        return {MARK_MAP: {str(k): encode_value(v) for k, v in value.items()}}
    raise CheckpointError(f"cannot checkpoint a {type(value).__name__}")


def decode_value(value, store):
    if isinstance(value, list):
        return [decode_value(v, store) for v in value]
    if isinstance(value, dict):
        if set(value) == {MARK_NODE}:
            return store.get(value[MARK_NODE])
        if set(value) == {MARK_MAP}:
            return {k: decode_value(v, store) for k, v in value[MARK_MAP].items()}
        raise CheckpointError(f"unrecognized checkpoint value: {value!r}")
    return value


def log_step(store, process_uuid: str, step: str, worker_id: str) -> None:
    """Audit row marking one completed step; written in the step's txn."""
    store.db.execute(
        "INSERT INTO steplog (process_uuid, step, worker_id, time) "
        "VALUES (?, ?, ?, ?)",
        (process_uuid, step, worker_id, time.time()),
    )


def encode_checkpoint(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def decode_checkpoint(payload: bytes) -> dict:
    try:
        doc = json.loads(payload.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("checkpoint format not recognized")
    return doc


# ---------------------------------------------------------------- base class


class WorkChain:
    """Base class for outline-driven workflows.

    Subclasses set a class-level ``id``, implement ``define(spec)`` to
    declare ports and the outline, and provide one method per step.
    Step methods return None to continue or an int exit code to stop.
    """

    id: Optional[str] = None
    # what to do when an awaited child fails: "except" or "continue"
    child_failure_action = "except"

    def __init__(self):
        self.ctx = Context()
        self.inputs: dict = {}
        self.node: Optional[Node] = None
        self._driver = None

    @classmethod
    def define(cls, spec):
        raise NotImplementedError

    # -- helpers available to step methods

    def submit(self, ref, _computer: Optional[str] = None, **inputs) -> Node:
        """Launch a child process; returns its (stored) process node.

        The chain parks at the end of the current step until every
        submitted child is terminal. ``_computer`` routes a job to a
        machine other than its class default.
        """
        return self._driver.spawn(get_process(ref), inputs, computer=_computer)

    def store_data(self, node: Node) -> Node:
        """Store a constant the chain needs in its context."""
        if node.id is None:
            self._driver.store.store_node(node)
        return node

    def out(self, name: str, node: Node) -> None:
        """Declare an output; the node must already be stored."""
        self._driver.add_output(name, node)

    def outputs_of(self, process_node) -> dict:
        uuid = process_node.uuid if isinstance(process_node, Node) else process_node
        return load_outputs(self._driver.store, uuid)

    def exit_code_of(self, process_node) -> Optional[int]:
        uuid = process_node.uuid if isinstance(process_node, Node) else process_node
        return states.exit_code_of(self._driver.store, uuid)


# ----------------------------------------------------------------- driver


class ChainDriver:
    """Advances one stored work-chain process step by step."""

    def __init__(self, store, node, runtime, worker_id: str = "inline"):
        self.store = store
        self.node = node
        self.runtime = runtime
        self.worker_id = worker_id
        self.defn: ProcessDefinition = get_process(node.attributes["process_id"])
        if not isinstance(self.defn.target, type) or not issubclass(
            self.defn.target, WorkChain
        ):
            raise SpecValidationError(f"{self.defn.id!r} is not a work chain")
        self.chain: WorkChain = self.defn.target()
        self.chain.node = node
        self.chain.inputs = load_inputs(store, node.uuid)
        self.chain._driver = self
        self.pc: Optional[list] = None
        self.awaiting: list = []
        self._spawned: list = []
        self._restore()

    # -- persistence

    def _restore(self):
        program = self.defn.spec.outline_program
        try:
            _, payload = self.store.load_checkpoint(self.node.uuid)
        except CheckpointNotFoundError:
            self.pc = [0] if program else None
            return
        doc = decode_checkpoint(payload)
        self.pc = doc.get("pc")
        self.awaiting = list(doc.get("awaiting", ()))
        ctx = decode_value(doc.get("ctx", {MARK_MAP: {}}), self.store)
        self.chain.ctx = Context(ctx)

    def _save_checkpoint(self):
        doc = {
            "format": CHECKPOINT_FORMAT,
            "flavor": self.defn.flavor,
            "process_id": self.defn.id,
            "pc": self.pc,
            "awaiting": list(self.awaiting),
            "ctx": encode_value(self.chain.ctx.as_dict()),
        }
        self.store.save_checkpoint(self.node.uuid, encode_checkpoint(doc))

    def _log_step(self, step_name: str):
        log_step(self.store, self.node.uuid, step_name, self.worker_id)

    # -- callbacks used by the WorkChain helpers

    def spawn(self, defn: ProcessDefinition, inputs: dict, computer=None) -> Node:
        child = self.runtime.submit_child(
            self.store,
            defn,
            inputs,
            caller=(self.node.uuid, self.node.kind),
            computer=computer,
        )
        self._spawned.append(child.uuid)
        return child

    def add_output(self, name: str, node: Node):
        if node.id is None:
            raise SpecValidationError(
                f"output {name!r} is not stored; a workflow may only "
                "return existing data"
            )
        self.defn.spec.check_output(name, node)
        self.store.insert_link(
            Link(self.node.uuid, node.uuid, LinkType.RETURN, name)
        )

    # -- stepping

    def tick(self) -> object:
        """Run at most one step; report how the process should proceed."""
        state = states.state_of(self.store, self.node.uuid)
        if states.is_terminal(state):
            return Done(state, states.exit_code_of(self.store, self.node.uuid))
        if state == states.PAUSED:
            reason = self.store.get_extras(self.node.uuid).get(
                states.K_PAUSE_REASON, ""
            )
            return Paused(reason)

        if self.awaiting:
            blocker = self._collect_children()
            if blocker is not None:
                return blocker

        program = self.defn.spec.outline_program
        try:
            pc = route(program, self.pc, self._test)
        except OwnershipLostError:
            raise
        except Exception as exc:
            return self._except(exc)
        if pc is None:
            return self._finalize(exit_code=0)

        step = instruction_at(program, pc)
        self.pc = pc
        self._spawned = []
        try:
            with self.store.transaction():
                self.runtime.guard(self.store, self.node.uuid)
                if state != states.RUNNING:
                    states.record_state(self.store, self.node.uuid, states.RUNNING)
                with use_store(self.store), push_process(
                    self.node.uuid, self.node.kind
                ):
                    result = getattr(self.chain, step.name)()
                if result is not None and not isinstance(result, int):
                    raise SpecValidationError(
                        f"step {step.name} returned {result!r}; expected "
                        "None or an int exit code"
                    )
                if result is not None:
                    # early exit requested by the step itself
                    self.pc = None
                else:
                    self.pc = successor(program, self.pc)
                # children stay listed until collected, even if they
                # already finished, so the failure policy sees them
                self.awaiting = list(self._spawned)
                pending = [
                    u
                    for u in self.awaiting
                    if not states.is_terminal(states.state_of(self.store, u))
                ]
                if pending:
                    states.record_state(
                        self.store, self.node.uuid, states.WAITING
                    )
                self._save_checkpoint()
                self._log_step(step.name)
        except OwnershipLostError:
            raise
        except Exception as exc:
            return self._except(exc)

        if result is not None:
            return self._finalize(exit_code=result)
        if pending:
            return Await(tuple(pending))
        return Continue()

    def _test(self, predicate: str) -> bool:
        with use_store(self.store), push_process(self.node.uuid, self.node.kind):
            return bool(getattr(self.chain, predicate)())

    def _collect_children(self):
        pending = [
            u
            for u in self.awaiting
            if not states.is_terminal(states.state_of(self.store, u))
        ]
        if pending:
            return Await(tuple(pending))
        failed = [u for u in self.awaiting if self._child_failed(u)]
        self.awaiting = []
        if failed and self.chain.child_failure_action == "except":
            return self._except(
                SpecValidationError(
                    "awaited child process failed: " + ", ".join(failed)
                )
            )
        return None

    def _child_failed(self, uuid: str) -> bool:
        state = states.state_of(self.store, uuid)
        if state in (states.EXCEPTED, states.KILLED):
            return True
        return state == states.FINISHED and (
            states.exit_code_of(self.store, uuid) or 0
        ) != 0

    def _finalize(self, exit_code: int):
        if exit_code == 0:
            produced = {
                link.label
                for link in self.store.links_from(
                    self.node.uuid, types=(LinkType.RETURN,)
                )
            }
            missing = self.defn.spec.missing_outputs(produced)
            if missing:
                return self._except(
                    SpecValidationError(
                        f"required outputs not produced: {missing}"
                    )
                )
        with self.store.transaction():
            self.runtime.guard(self.store, self.node.uuid)
            states.record_state(
                self.store, self.node.uuid, states.FINISHED, exit_code=exit_code
            )
        return Done(states.FINISHED, exit_code)

    def _except(self, exc: Exception):
        message = "".join(
            traceback.format_exception_only(type(exc), exc)
        ).strip()
        with self.store.transaction():
            self.runtime.guard(self.store, self.node.uuid)
            states.record_state(
                self.store, self.node.uuid, states.EXCEPTED, exception=message
            )
        return Done(states.EXCEPTED)
