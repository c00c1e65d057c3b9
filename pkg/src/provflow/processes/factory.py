"""Create process nodes with their input and call links."""

from __future__ import annotations

from typing import Mapping, Optional

from provflow import __version__
from provflow.exceptions import SpecValidationError
from provflow.graph.links import LinkType
from provflow.graph.nodes import Node
from provflow.graph.kinds import is_a
from provflow.states import mark_created
from .registry import ProcessDefinition

# attributes every process node carries
ATTR_PROCESS_ID = "process_id"
ATTR_VERSION = "_version"


def input_link_type(process_kind: str) -> LinkType:
    if is_a(process_kind, "process.calculation"):
        return LinkType.INPUT_CALC
    return LinkType.INPUT_WORK


def call_link_type(process_kind: str) -> LinkType:
    if is_a(process_kind, "process.calculation"):
        return LinkType.CALL_CALC
    return LinkType.CALL_WORK


def output_link_type(process_kind: str) -> LinkType:
    if is_a(process_kind, "process.calculation"):
        return LinkType.CREATE
    return LinkType.RETURN


def create_process_node(
    store,
    defn: ProcessDefinition,
    inputs: Mapping[str, Node],
    caller: Optional[tuple] = None,
    attributes: Optional[Mapping] = None,
    repo_files: Optional[Mapping[str, bytes]] = None,
    computer: Optional[str] = None,
) -> Node:
    """Store a new process node wired to its inputs.

    ``caller`` is an (uuid, kind) pair of the live process that spawned
    this one; only workflows may call, so a calculation caller is
    rejected up front rather than at link validation.

    Unstored input nodes are stored here first. The definition source is
    captured into the node repository so stored provenance does not
    depend on the code still being importable.
    """
    defn.spec.validate_inputs(inputs)
    if caller is not None and is_a(caller[1], "process.calculation"):
        raise SpecValidationError(
            f"process {defn.id!r} invoked from a calculation; "
            "only workflows may call other processes"
        )

    node = Node(kind=defn.node_kind, label=defn.id, computer=computer)
    node.attributes[ATTR_PROCESS_ID] = defn.id
    node.attributes[ATTR_VERSION] = {"provflow": __version__}
    if attributes:
        for key, value in attributes.items():
            node.attributes[key] = value

    source = defn.source_text()
    if source:
        node.put_file("source.py", source.encode())
    for path, content in (repo_files or {}).items():
        node.put_file(path, content)

    in_type = input_link_type(defn.node_kind)
    with store.transaction():
        for name, value in inputs.items():
            if value.id is None:
                store.store_node(value)
        incoming = [(inp.uuid, in_type, name) for name, inp in inputs.items()]
        if caller is not None:
            # link labels have a tighter grammar than process ids
            label = defn.id.replace(".", "_")
            incoming.append((caller[0], call_link_type(defn.node_kind), label))
        store.store_node(node, incoming=incoming)
        mark_created(store, node.uuid)
    return node


def new_process_node(
    store,
    defn: ProcessDefinition,
    inputs: Mapping[str, Node],
    caller: Optional[tuple] = None,
    computer: Optional[str] = None,
) -> Node:
    """Flavor-aware node creation.

    Jobs get their working-directory files prepared up front, at
    submission, so the stored node already holds everything the run
    will use and its content hash covers it all.
    """
    if defn.flavor != "calcjob":
        return create_process_node(store, defn, inputs, caller=caller)

    from .computers import get_computer

    cls = defn.target
    defn.spec.validate_inputs(inputs)
    files = cls().prepare(dict(inputs))
    if cls.script_name not in files:
        raise SpecValidationError(
            f"{defn.id}: prepare() produced no {cls.script_name!r} script"
        )
    name = computer or cls.computer
    if not name:
        raise SpecValidationError(
            f"{defn.id}: no computer given and the class declares no default"
        )
    get_computer(store, name)  # unregistered machines fail at submit, not mid-run
    attributes = {
        "script": cls.script_name,
        "retrieve": list(cls.retrieve),
    }
    return create_process_node(
        store,
        defn,
        inputs,
        caller=caller,
        attributes=attributes,
        repo_files=files,
        computer=name,
    )


def load_inputs(store, uuid: str) -> dict:
    """Input nodes of a stored process, keyed by link label."""
    inputs = {}
    for link in store.links_to(uuid):
        if link.type in (LinkType.INPUT_CALC, LinkType.INPUT_WORK):
            inputs[link.label] = store.get(link.source)
    return inputs


def load_outputs(store, uuid: str) -> dict:
    """Output nodes of a stored process, keyed by link label."""
    outputs = {}
    for link in store.links_from(uuid):
        if link.type in (LinkType.CREATE, LinkType.RETURN):
            outputs[link.label] = store.get(link.target)
    return outputs


def caller_of(store, uuid: str) -> Optional[str]:
    for link in store.links_to(uuid):
        if link.type in (LinkType.CALL_CALC, LinkType.CALL_WORK):
            return link.source
    return None


def called_by(store, uuid: str) -> list:
    """Uuids of processes this one called, in link insertion order."""
    out = []
    for link in store.links_from(uuid):
        if link.type in (LinkType.CALL_CALC, LinkType.CALL_WORK):
            out.append(link.target)
    return out
