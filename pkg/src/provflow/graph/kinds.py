"""Hierarchical node-kind taxonomy.

Kind paths form a tree rooted at ``data`` and ``process``; ancestry is
segment-prefix containment, so ``process.workflow.workchain`` is a
``process.workflow`` but ``data.intx`` is not a ``data.int``.
"""

from __future__ import annotations

import re

from provflow.exceptions import UnknownKindError

_SEGMENT = re.compile(r"^[a-z0-9_]+$")

DEFAULT_KINDS = (
    "data",
    "data.int",
    "data.float",
    "data.str",
    "data.dict",
    "data.code",
    "data.remote",
    "data.folder",
    "process",
    "process.calculation",
    "process.calculation.calcjob",
    "process.calculation.calcfunction",
    "process.workflow",
    "process.workflow.workchain",
    "process.workflow.workfunction",
)


class KindRegistry:
    """Set of registered kind paths with ancestry checks."""

    def __init__(self, kinds=DEFAULT_KINDS):
        self._kinds: set[str] = set()
        for kind in kinds:
            self.register(kind)

    def register(self, path: str) -> str:
        segments = path.split(".")
        if not segments or not all(_SEGMENT.match(s) for s in segments):
            raise UnknownKindError(f"malformed kind path: {path!r}")
        if segments[0] not in ("data", "process"):
            raise UnknownKindError(f"kind must be rooted at data or process: {path!r}")
        if segments[0] == "process" and len(segments) > 1:
            if segments[1] not in ("calculation", "workflow"):
                raise UnknownKindError(
                    f"process kinds live under process.calculation or "
                    f"process.workflow: {path!r}"
                )
        self._kinds.add(path)
        # implicit ancestors so is_a on intermediate paths always resolves
        for i in range(1, len(segments)):
            self._kinds.add(".".join(segments[:i]))
        return path

    def known(self, path: str) -> bool:
        return path in self._kinds

    def require(self, path: str) -> None:
        if path not in self._kinds:
            raise UnknownKindError(f"unregistered kind: {path!r}")

    def is_a(self, kind: str, ancestor: str) -> bool:
        """True iff ``ancestor``'s path is a segment-prefix of ``kind``'s."""
        self.require(kind)
        self.require(ancestor)
        a = ancestor.split(".")
        k = kind.split(".")
        return k[: len(a)] == a

    def is_process(self, kind: str) -> bool:
        return kind.split(".")[0] == "process"

    def is_data(self, kind: str) -> bool:
        return kind.split(".")[0] == "data"

    def is_calculation(self, kind: str) -> bool:
        return kind.split(".")[:2] == ["process", "calculation"]

    def is_workflow(self, kind: str) -> bool:
        return kind.split(".")[:2] == ["process", "workflow"]

    def all_kinds(self) -> list[str]:
        return sorted(self._kinds)


_default = KindRegistry()


def default_registry() -> KindRegistry:
    return _default


def register_kind(path: str) -> str:
    """Register an extension kind (for example a domain data type)."""
    return _default.register(path)


def is_a(kind: str, ancestor: str) -> bool:
    return _default.is_a(kind, ancestor)
