"""Declared interface of a process: typed ports plus, for work chains,
the outline program.

The spec doubles as documentation: ``describe()`` renders the ports and
the control flow as text, so a chain's logic is readable without running
it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from provflow.exceptions import SpecValidationError
from provflow.graph.kinds import default_registry
from provflow.graph.nodes import Node


@dataclass(frozen=True)
class Port:
    name: str
    kind: str = "data"
    required: bool = True
    help: str = ""


@dataclass(frozen=True)
class Step:
    name: str


@dataclass(frozen=True)
class While:
    predicate: str
    body: tuple

    def __post_init__(self):
        if not self.body:
            raise SpecValidationError("while block needs a non-empty body")


@dataclass(frozen=True)
class If:
    predicate: str
    then: tuple
    orelse: tuple = ()

    def __post_init__(self):
        if not self.then:
            raise SpecValidationError("if block needs a non-empty then-branch")


def _as_instruction(item):
    if isinstance(item, (Step, While, If)):
        return item
    if callable(item):
        return Step(item.__name__)
    if isinstance(item, str):
        return Step(item)
    raise SpecValidationError(f"not an outline instruction: {item!r}")


def _as_name(item) -> str:
    return item.__name__ if callable(item) else str(item)


def while_(predicate, *body) -> While:
    return While(_as_name(predicate), tuple(_as_instruction(i) for i in body))


def if_(predicate, *then, orelse=()) -> If:
    return If(
        _as_name(predicate),
        tuple(_as_instruction(i) for i in then),
        tuple(_as_instruction(i) for i in orelse),
    )


class ProcessSpec:
    def __init__(self):
        self.inputs: dict[str, Port] = {}
        self.outputs: dict[str, Port] = {}
        self.outline_program: tuple = ()

    def input(self, name: str, kind: str = "data", required: bool = True, help: str = ""):
        if name in self.inputs:
            raise SpecValidationError(f"duplicate input port {name!r}")
        default_registry().require(kind)
        self.inputs[name] = Port(name, kind, required, help)
        return self

    def output(self, name: str, kind: str = "data", required: bool = True, help: str = ""):
        if name in self.outputs:
            raise SpecValidationError(f"duplicate output port {name!r}")
        default_registry().require(kind)
        self.outputs[name] = Port(name, kind, required, help)
        return self

    def outline(self, *instructions):
        self.outline_program = tuple(_as_instruction(i) for i in instructions)
        return self

    def step_names(self, block=None) -> set[str]:
        """Every step and predicate name the outline references."""
        names: set[str] = set()
        for instr in self.outline_program if block is None else block:
            if isinstance(instr, Step):
                names.add(instr.name)
            elif isinstance(instr, While):
                names.add(instr.predicate)
                names |= self.step_names(instr.body)
            elif isinstance(instr, If):
                names.add(instr.predicate)
                names |= self.step_names(instr.then)
                names |= self.step_names(instr.orelse)
        return names

    def validate_inputs(self, inputs: dict) -> None:
        """Check a name->Node map against the declared input ports."""
        registry = default_registry()
        for name, node in inputs.items():
            port = self.inputs.get(name)
            if port is None:
                raise SpecValidationError(f"unknown input {name!r}")
            if not isinstance(node, Node):
                raise SpecValidationError(f"input {name!r} must be a node")
            if not registry.is_a(node.kind, port.kind):
                raise SpecValidationError(
                    f"input {name!r} must be a {port.kind}, got {node.kind}"
                )
        for name, port in self.inputs.items():
            if port.required and name not in inputs:
                raise SpecValidationError(f"missing required input {name!r}")

    def check_output(self, name: str, node: Node) -> None:
        port = self.outputs.get(name)
        if port is None:
            return  # undeclared outputs allowed, declared ones typed
        if not default_registry().is_a(node.kind, port.kind):
            raise SpecValidationError(
                f"output {name!r} must be a {port.kind}, got {node.kind}"
            )

    def missing_outputs(self, produced: set) -> list[str]:
        return sorted(
            name
            for name, port in self.outputs.items()
            if port.required and name not in produced
        )

    def describe(self, title: Optional[str] = None) -> str:
        lines = []
        if title:
            lines.append(title)
        for label, ports in (("inputs", self.inputs), ("outputs", self.outputs)):
            lines.append(f"{label}:")
            for port in ports.values():
                flag = "" if port.required else " (optional)"
                text = f"  {port.name}: {port.kind}{flag}"
                if port.help:
                    text += f"  - {port.help}"
                lines.append(text)
        if self.outline_program:
            lines.append("outline:")
            lines.extend(self._render(self.outline_program, 1))
        return "\n".join(lines)

    def _render(self, block, depth) -> list[str]:
        pad = "  " * depth
        out = []
        for instr in block:
            if isinstance(instr, Step):
                out.append(f"{pad}{instr.name}")
            elif isinstance(instr, While):
                out.append(f"{pad}while {instr.predicate}:")
                out.extend(self._render(instr.body, depth + 1))
            else:
                out.append(f"{pad}if {instr.predicate}:")
                out.extend(self._render(instr.then, depth + 1))
                if instr.orelse:
                    out.append(f"{pad}else:")
                    out.extend(self._render(instr.orelse, depth + 1))
        return out
