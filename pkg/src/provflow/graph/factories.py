"""Convenience constructors for the common data node kinds."""

from __future__ import annotations

from provflow.graph.nodes import Node


def Int(value, **kw) -> Node:
    return Node("data.int", attributes={"value": int(value)}, **kw)


def Float(value, **kw) -> Node:
    return Node("data.float", attributes={"value": float(value)}, **kw)


def Str(value, **kw) -> Node:
    return Node("data.str", attributes={"value": str(value)}, **kw)


def Dict(mapping=None, **kw) -> Node:
    return Node("data.dict", attributes=dict(mapping or {}), **kw)


def Code(label: str, **kw) -> Node:
    return Node("data.code", label=label, **kw)


def value_of(node: Node):
    """The payload of a plain value node; whole attributes for dicts."""
    if node.kind.startswith("data.dict"):
        return dict(node.attributes)
    return node.attributes.get("value")
